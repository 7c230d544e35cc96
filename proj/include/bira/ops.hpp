#pragma once

#include <vector>

#include "bira/tape.hpp"

namespace bira::ops {

// ε guard for elementwise division and L2 normalization. The guard engages
// only when the denominator magnitude is below kDivEps; it then adds kDivEps
// to that magnitude, preserving sign, and bumps the run diagnostics counter.
inline constexpr double kDivEps = 1e-8;

enum class Ew { add, sub, mul, div };

Var elementwise(Tape& t, Ew kind, const Var& a, const Var& b, double div_eps = kDivEps);
Var add(Tape& t, const Var& a, const Var& b);
Var sub(Tape& t, const Var& a, const Var& b);
Var mul(Tape& t, const Var& a, const Var& b);
// div with eps == 0 performs unguarded division and throws DomainError on an
// exact-zero divisor.
Var div(Tape& t, const Var& a, const Var& b, double eps = kDivEps);

Var add_scalar(Tape& t, const Var& x, double c);
Var scale(Tape& t, const Var& x, double c);

Var matmul(Tape& t, const Var& a, const Var& b);  // [m,k] x [k,n] -> [m,n]

// input [N,C,H,W], kernel [O,C,kh,kw], cross-correlation convention.
Var conv2d(Tape& t, const Var& input, const Var& kernel, i64 stride, i64 pad);
Var bias_add_channel(Tape& t, const Var& x, const Var& bias);  // x [N,C,H,W], bias [C]
Var bias_add_row(Tape& t, const Var& x, const Var& bias);      // x [N,D], bias [D]

Var relu(Tape& t, const Var& x);
Var sigmoid(Tape& t, const Var& x);

Var global_avg_pool(Tape& t, const Var& x);  // [N,C,H,W] -> [N,C]

// z [C] -> [C,C]; z [N,C] -> [N,C*C], rows flattened row-major over (i,j).
Var outer_product(Tape& t, const Var& z);

Var signed_sqrt(Tape& t, const Var& x);

// Rowwise x / ||x||2 with the ε guard; accepts [D] or [N,D].
Var l2_normalize(Tape& t, const Var& x, double eps = kDivEps);

// Rowwise, max-subtraction stabilized; accepts [C] or [N,C].
Var log_softmax(Tape& t, const Var& x);

Var reshape(Tape& t, const Var& x, Shape new_shape);
Var sum_all(Tape& t, const Var& x);   // -> [1]
Var mean_all(Tape& t, const Var& x);  // -> [1]

// Training mode normalizes with batch statistics and updates the running
// buffers in place (population variance, momentum as new = (1-m)*old + m*batch).
// Eval mode is an affine map through the running statistics.
Var batch_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum, double eps);

// loss = reduce_n(-weights[n] * logp[n, labels[n]]); weights are constants.
Var weighted_nll(Tape& t, const Var& logp, const std::vector<int>& labels,
                 const std::vector<double>& weights, bool mean_reduction);

}  // namespace bira::ops
