// Wall-time comparison of the serial reference kernels against the OpenMP
// parallel path. Both produce bitwise-identical outputs (asserted here too).

#include <cstdio>
#include <cstring>
#include <vector>

#include "bira/kernels.hpp"
#include "bira/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>

using namespace bira;

namespace {

double now_seconds() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
#endif
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void report(const char* name, double serial_s, double parallel_s, bool bitwise_equal) {
    std::printf("%-24s serial %8.2f ms   omp %8.2f ms   speedup %4.2fx   bitwise %s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                bitwise_equal ? "equal" : "DIFFER");
}

}  // namespace

int main() {
    Rng rng(42);
    std::printf("threads: %d\n", kernels::max_threads());

    {  // gemm 256x256x256
        const i64 m = 256, n = 256, k = 256;
        auto a = random_vec(rng, static_cast<std::size_t>(m * k));
        auto b = random_vec(rng, static_cast<std::size_t>(k * n));
        std::vector<double> c_serial(static_cast<std::size_t>(m * n));
        std::vector<double> c_omp(static_cast<std::size_t>(m * n));
        kernels::set_exec_mode(kernels::ExecMode::serial);
        const double ts = time_best_of(3, [&] {
            kernels::gemm(false, false, m, n, k, a.data(), b.data(), c_serial.data(), false);
        });
        kernels::set_exec_mode(kernels::ExecMode::parallel);
        const double tp = time_best_of(3, [&] {
            kernels::gemm(false, false, m, n, k, a.data(), b.data(), c_omp.data(), false);
        });
        report("gemm 256^3", ts, tp,
               std::memcmp(c_serial.data(), c_omp.data(), c_serial.size() * 8) == 0);
    }

    {  // conv2d forward + both backward kernels, 8x16x32x32 by 32x16x3x3
        kernels::Conv2dDims d;
        d.n = 8; d.c_in = 16; d.h = 32; d.w = 32;
        d.c_out = 32; d.kh = 3; d.kw = 3; d.stride = 1; d.pad = 1;
        d.h_out = 32; d.w_out = 32;
        auto in = random_vec(rng, static_cast<std::size_t>(d.n * d.c_in * d.h * d.w));
        auto ker = random_vec(rng, static_cast<std::size_t>(d.c_out * d.c_in * d.kh * d.kw));
        auto dout = random_vec(rng, static_cast<std::size_t>(d.n * d.c_out * d.h_out * d.w_out));
        std::vector<double> out_s(dout.size()), out_p(dout.size());
        std::vector<double> din_s(in.size()), din_p(in.size());
        std::vector<double> dker_s(ker.size()), dker_p(ker.size());

        kernels::set_exec_mode(kernels::ExecMode::serial);
        const double f_s = time_best_of(3, [&] {
            kernels::conv2d_forward(in.data(), ker.data(), out_s.data(), d);
        });
        kernels::set_exec_mode(kernels::ExecMode::parallel);
        const double f_p = time_best_of(3, [&] {
            kernels::conv2d_forward(in.data(), ker.data(), out_p.data(), d);
        });
        report("conv2d_forward", f_s, f_p,
               std::memcmp(out_s.data(), out_p.data(), out_s.size() * 8) == 0);

        kernels::set_exec_mode(kernels::ExecMode::serial);
        const double bi_s = time_best_of(3, [&] {
            std::fill(din_s.begin(), din_s.end(), 0.0);
            kernels::conv2d_backward_input(ker.data(), dout.data(), din_s.data(), d);
        });
        kernels::set_exec_mode(kernels::ExecMode::parallel);
        const double bi_p = time_best_of(3, [&] {
            std::fill(din_p.begin(), din_p.end(), 0.0);
            kernels::conv2d_backward_input(ker.data(), dout.data(), din_p.data(), d);
        });
        report("conv2d_backward_input", bi_s, bi_p,
               std::memcmp(din_s.data(), din_p.data(), din_s.size() * 8) == 0);

        kernels::set_exec_mode(kernels::ExecMode::serial);
        const double bk_s = time_best_of(3, [&] {
            std::fill(dker_s.begin(), dker_s.end(), 0.0);
            kernels::conv2d_backward_kernel(in.data(), dout.data(), dker_s.data(), d);
        });
        kernels::set_exec_mode(kernels::ExecMode::parallel);
        const double bk_p = time_best_of(3, [&] {
            std::fill(dker_p.begin(), dker_p.end(), 0.0);
            kernels::conv2d_backward_kernel(in.data(), dout.data(), dker_p.data(), d);
        });
        report("conv2d_backward_kernel", bk_s, bk_p,
               std::memcmp(dker_s.data(), dker_p.data(), dker_s.size() * 8) == 0);
    }

    {  // elementwise map via parallel_for, 8M elements
        const i64 n = 8 * 1024 * 1024;
        auto a = random_vec(rng, static_cast<std::size_t>(n));
        auto b = random_vec(rng, static_cast<std::size_t>(n));
        std::vector<double> y_s(a.size()), y_p(a.size());
        kernels::set_exec_mode(kernels::ExecMode::serial);
        const double ts = time_best_of(3, [&] {
            kernels::parallel_for(n, [&](i64 i) { y_s[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)]; });
        });
        kernels::set_exec_mode(kernels::ExecMode::parallel);
        const double tp = time_best_of(3, [&] {
            kernels::parallel_for(n, [&](i64 i) { y_p[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)]; });
        });
        report("elementwise_mul 8M", ts, tp,
               std::memcmp(y_s.data(), y_p.data(), y_s.size() * 8) == 0);
    }

    kernels::set_exec_mode(kernels::ExecMode::parallel);
    return 0;
}
