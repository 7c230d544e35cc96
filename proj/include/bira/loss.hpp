#pragma once

#include <vector>

#include "bira/ops.hpp"

namespace bira {

enum class LossKind { grading, cross_entropy };
enum class Reduction { mean, sum };

// Exact unreduced fraction (|argmax - y| + 1) / M.
struct GradingWeight {
    long num = 1;
    long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// M = sum_{i=0}^{C-1} (|y - i| + 1), in exact integer arithmetic.
long grading_normalizer(int y, int num_classes);

// Ties broken by lowest class index.
int argmax_lowest(const double* logits, i64 n);

GradingWeight grading_weight(const double* logits, i64 num_classes, int y);
GradingWeight grading_weight_for_argmax(int argmax, int y, int num_classes);

// Distance-weighted negative log softmax; the weight is a constant per
// example (argmax is piecewise constant, no gradient flows through it).
// Accepts logits [C] with one label or [N,C] with N labels.
Var grading_loss(Tape& t, const Var& logits, const std::vector<int>& labels,
                 Reduction reduction = Reduction::mean);

Var cross_entropy_loss(Tape& t, const Var& logits, const std::vector<int>& labels,
                       Reduction reduction = Reduction::mean);

Var make_loss(Tape& t, LossKind kind, const Var& logits, const std::vector<int>& labels,
              Reduction reduction = Reduction::mean);

}  // namespace bira
