#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bira/tape.hpp"

namespace bira {

// A differentiable scalar function for checking. The callable builds the
// graph from the given point values; with_grad selects whether the inputs it
// creates require gradients. It returns the scalar output and, when
// with_grad, the input Vars in the same order as `point`.
struct GradFnResult {
    Var output;
    std::vector<Var> inputs;
};
using GradFn = std::function<GradFnResult(Tape&, const std::vector<Tensor>&, bool with_grad)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_input = 0;
    i64 worst_coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central finite differences: (f(x+εe) - f(x-εe)) / 2ε per coordinate,
// compared against reverse-mode gradients. Differences below abs_floor count
// as zero error.
GradCheckResult grad_check(const GradFn& fn, const std::vector<Tensor>& point, double step = 1e-5,
                           double abs_floor = 1e-7);

}  // namespace bira
