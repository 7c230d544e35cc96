#include "bira/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace bira::kernels {

namespace {
ExecMode g_mode = ExecMode::parallel;
std::atomic<long> g_div_guard{0};
std::atomic<long> g_norm_guard{0};
}  // namespace

ExecMode exec_mode() { return g_mode; }
void set_exec_mode(ExecMode m) { g_mode = m; }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

std::atomic<long>& div_guard_hits() { return g_div_guard; }
std::atomic<long>& norm_guard_hits() { return g_norm_guard; }

void reset_guard_counters() {
    g_div_guard = 0;
    g_norm_guard = 0;
}

long total_guard_hits() { return g_div_guard.load() + g_norm_guard.load(); }

void conv2d_forward(const double* in, const double* ker, double* out, const Conv2dDims& d) {
    const i64 out_plane = d.h_out * d.w_out;
    const i64 in_plane = d.h * d.w;
    // One task per (batch, output channel); writes are disjoint per task and
    // the (c_in, ky, kx) accumulation order per output element is fixed.
    parallel_for(d.n * d.c_out, [&](i64 t) {
        const i64 n = t / d.c_out;
        const i64 o = t % d.c_out;
        double* out_map = out + (n * d.c_out + o) * out_plane;
        std::memset(out_map, 0, sizeof(double) * static_cast<std::size_t>(out_plane));
        for (i64 c = 0; c < d.c_in; ++c) {
            const double* in_map = in + (n * d.c_in + c) * in_plane;
            const double* ker_map = ker + (o * d.c_in + c) * d.kh * d.kw;
            for (i64 y = 0; y < d.h_out; ++y) {
                double* out_row = out_map + y * d.w_out;
                for (i64 ky = 0; ky < d.kh; ++ky) {
                    const i64 iy = y * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) continue;
                    const double* in_row = in_map + iy * d.w;
                    for (i64 kx = 0; kx < d.kw; ++kx) {
                        const double wgt = ker_map[ky * d.kw + kx];
                        // ix = x*stride + kx - pad must land in [0, w)
                        i64 x_lo = 0;
                        while (x_lo < d.w_out && x_lo * d.stride + kx - d.pad < 0) ++x_lo;
                        i64 x_hi = d.w_out;
                        while (x_hi > x_lo && (x_hi - 1) * d.stride + kx - d.pad >= d.w) --x_hi;
                        const i64 off = kx - d.pad;
                        if (d.stride == 1) {
                            for (i64 x = x_lo; x < x_hi; ++x) out_row[x] += wgt * in_row[x + off];
                        } else {
                            for (i64 x = x_lo; x < x_hi; ++x)
                                out_row[x] += wgt * in_row[x * d.stride + off];
                        }
                    }
                }
            }
        }
    });
}

void conv2d_backward_input(const double* ker, const double* dout, double* din,
                           const Conv2dDims& d) {
    const i64 out_plane = d.h_out * d.w_out;
    const i64 in_plane = d.h * d.w;
    // One task per (batch, input channel).
    parallel_for(d.n * d.c_in, [&](i64 t) {
        const i64 n = t / d.c_in;
        const i64 c = t % d.c_in;
        double* din_map = din + (n * d.c_in + c) * in_plane;
        for (i64 o = 0; o < d.c_out; ++o) {
            const double* dout_map = dout + (n * d.c_out + o) * out_plane;
            const double* ker_map = ker + (o * d.c_in + c) * d.kh * d.kw;
            for (i64 y = 0; y < d.h_out; ++y) {
                const double* dout_row = dout_map + y * d.w_out;
                for (i64 ky = 0; ky < d.kh; ++ky) {
                    const i64 iy = y * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) continue;
                    double* din_row = din_map + iy * d.w;
                    for (i64 kx = 0; kx < d.kw; ++kx) {
                        const double wgt = ker_map[ky * d.kw + kx];
                        i64 x_lo = 0;
                        while (x_lo < d.w_out && x_lo * d.stride + kx - d.pad < 0) ++x_lo;
                        i64 x_hi = d.w_out;
                        while (x_hi > x_lo && (x_hi - 1) * d.stride + kx - d.pad >= d.w) --x_hi;
                        const i64 off = kx - d.pad;
                        for (i64 x = x_lo; x < x_hi; ++x)
                            din_row[x * d.stride + off] += wgt * dout_row[x];
                    }
                }
            }
        }
    });
}

void conv2d_backward_kernel(const double* in, const double* dout, double* dker,
                            const Conv2dDims& d) {
    const i64 out_plane = d.h_out * d.w_out;
    const i64 in_plane = d.h * d.w;
    // One task per (output channel, input channel) kernel slice.
    parallel_for(d.c_out * d.c_in, [&](i64 t) {
        const i64 o = t / d.c_in;
        const i64 c = t % d.c_in;
        double* dker_map = dker + (o * d.c_in + c) * d.kh * d.kw;
        for (i64 ky = 0; ky < d.kh; ++ky) {
            for (i64 kx = 0; kx < d.kw; ++kx) {
                double acc = 0.0;
                for (i64 n = 0; n < d.n; ++n) {
                    const double* in_map = in + (n * d.c_in + c) * in_plane;
                    const double* dout_map = dout + (n * d.c_out + o) * out_plane;
                    for (i64 y = 0; y < d.h_out; ++y) {
                        const i64 iy = y * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        const double* in_row = in_map + iy * d.w;
                        const double* dout_row = dout_map + y * d.w_out;
                        i64 x_lo = 0;
                        while (x_lo < d.w_out && x_lo * d.stride + kx - d.pad < 0) ++x_lo;
                        i64 x_hi = d.w_out;
                        while (x_hi > x_lo && (x_hi - 1) * d.stride + kx - d.pad >= d.w) --x_hi;
                        const i64 off = kx - d.pad;
                        for (i64 x = x_lo; x < x_hi; ++x)
                            acc += in_row[x * d.stride + off] * dout_row[x];
                    }
                }
                dker_map[ky * d.kw + kx] += acc;
            }
        }
    });
}

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k, const double* a, const double* b, double* c,
          bool accumulate) {
    parallel_for(m, [&](i64 i) {
        double* c_row = c + i * n;
        if (!accumulate) std::memset(c_row, 0, sizeof(double) * static_cast<std::size_t>(n));
        if (!ta && !tb) {
            for (i64 kk = 0; kk < k; ++kk) {
                const double aik = a[i * k + kk];
                const double* b_row = b + kk * n;
                for (i64 j = 0; j < n; ++j) c_row[j] += aik * b_row[j];
            }
        } else if (!ta && tb) {
            const double* a_row = a + i * k;
            for (i64 j = 0; j < n; ++j) {
                const double* b_row = b + j * k;
                double acc = 0.0;
                for (i64 kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
                c_row[j] += acc;
            }
        } else if (ta && !tb) {
            for (i64 kk = 0; kk < k; ++kk) {
                const double aik = a[kk * m + i];
                const double* b_row = b + kk * n;
                for (i64 j = 0; j < n; ++j) c_row[j] += aik * b_row[j];
            }
        } else {
            for (i64 j = 0; j < n; ++j) {
                double acc = 0.0;
                for (i64 kk = 0; kk < k; ++kk) acc += a[kk * m + i] * b[j * k + kk];
                c_row[j] += acc;
            }
        }
    });
}

}  // namespace bira::kernels
