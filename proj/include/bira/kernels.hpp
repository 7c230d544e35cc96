#pragma once

#include <atomic>
#include <cstdint>

#include "bira/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bira::kernels {

// Execution mode for the data-parallel kernels. `serial` is the reference
// path; `parallel` runs the same per-output bodies under OpenMP. Every kernel
// parallelizes only over disjoint output elements and keeps the per-element
// accumulation order fixed, so both modes produce bitwise-identical results.
enum class ExecMode { serial, parallel };

ExecMode exec_mode();
void set_exec_mode(ExecMode m);
int max_threads();
void set_num_threads(int n);

// RAII toggle used by tests and the benchmark.
struct ExecModeGuard {
    explicit ExecModeGuard(ExecMode m) : prev_(exec_mode()) { set_exec_mode(m); }
    ~ExecModeGuard() { set_exec_mode(prev_); }

private:
    ExecMode prev_;
};

template <typename F>
inline void parallel_for(i64 n, F&& body) {
#ifdef _OPENMP
    if (exec_mode() == ExecMode::parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (i64 i = 0; i < n; ++i) body(i);
}

struct Conv2dDims {
    i64 n, c_in, h, w;      // input
    i64 c_out, kh, kw;      // kernel
    i64 stride, pad;
    i64 h_out, w_out;
};

// out = cross-correlation(in, ker); out is overwritten.
void conv2d_forward(const double* in, const double* ker, double* out, const Conv2dDims& d);
// din += ker ⋆ dout (gradient w.r.t. the input); accumulates.
void conv2d_backward_input(const double* ker, const double* dout, double* din, const Conv2dDims& d);
// dker += in ⋆ dout (gradient w.r.t. the kernel); accumulates.
void conv2d_backward_kernel(const double* in, const double* dout, double* dker, const Conv2dDims& d);

// c (+)= op(a) * op(b), row-major. a is m×k (or k×m when ta), b is k×n (or n×k when tb).
void gemm(bool ta, bool tb, i64 m, i64 n, i64 k, const double* a, const double* b, double* c,
          bool accumulate);

// Run diagnostics: how often the ε guard engaged in divisions / normalizations.
std::atomic<long>& div_guard_hits();
std::atomic<long>& norm_guard_hits();
void reset_guard_counters();
long total_guard_hits();

}  // namespace bira::kernels
