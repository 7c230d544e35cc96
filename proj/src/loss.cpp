#include "bira/loss.hpp"

#include <cstdlib>

#include "bira/error.hpp"

namespace bira {

long grading_normalizer(int y, int num_classes) {
    if (y < 0 || y >= num_classes)
        throw DomainError("grading_normalizer: class " + std::to_string(y) + " out of range [0," +
                          std::to_string(num_classes) + ")");
    long m = 0;
    for (int i = 0; i < num_classes; ++i) m += std::labs(static_cast<long>(y) - i) + 1;
    return m;
}

int argmax_lowest(const double* logits, i64 n) {
    int best = 0;
    for (i64 i = 1; i < n; ++i) {
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    }
    return best;
}

GradingWeight grading_weight_for_argmax(int argmax, int y, int num_classes) {
    if (argmax < 0 || argmax >= num_classes)
        throw DomainError("grading_weight: argmax out of range");
    GradingWeight w;
    w.num = std::labs(static_cast<long>(argmax) - y) + 1;
    w.den = grading_normalizer(y, num_classes);
    return w;
}

GradingWeight grading_weight(const double* logits, i64 num_classes, int y) {
    return grading_weight_for_argmax(argmax_lowest(logits, num_classes), y,
                                     static_cast<int>(num_classes));
}

static std::pair<i64, i64> loss_dims(const Var& logits, const std::vector<int>& labels) {
    const Tensor& lv = logits->value;
    i64 rows, c;
    if (lv.ndim() == 1) {
        rows = 1;
        c = lv.shape[0];
    } else if (lv.ndim() == 2) {
        rows = lv.shape[0];
        c = lv.shape[1];
    } else {
        throw ShapeError("loss: expected logits [C] or [N,C], got " + shape_str(lv.shape));
    }
    if (static_cast<i64>(labels.size()) != rows)
        throw ShapeError("loss: got " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(rows));
    return {rows, c};
}

Var grading_loss(Tape& t, const Var& logits, const std::vector<int>& labels, Reduction reduction) {
    auto [rows, c] = loss_dims(logits, labels);
    std::vector<double> weights(static_cast<std::size_t>(rows));
    for (i64 r = 0; r < rows; ++r) {
        weights[static_cast<std::size_t>(r)] =
            grading_weight(logits->value.data.data() + r * c, c, labels[static_cast<std::size_t>(r)])
                .value();
    }
    Var logp = ops::log_softmax(t, logits);
    return ops::weighted_nll(t, logp, labels, weights, reduction == Reduction::mean);
}

Var cross_entropy_loss(Tape& t, const Var& logits, const std::vector<int>& labels,
                       Reduction reduction) {
    auto [rows, c] = loss_dims(logits, labels);
    (void)c;
    std::vector<double> weights(static_cast<std::size_t>(rows), 1.0);
    Var logp = ops::log_softmax(t, logits);
    return ops::weighted_nll(t, logp, labels, weights, reduction == Reduction::mean);
}

Var make_loss(Tape& t, LossKind kind, const Var& logits, const std::vector<int>& labels,
              Reduction reduction) {
    return kind == LossKind::grading ? grading_loss(t, logits, labels, reduction)
                                     : cross_entropy_loss(t, logits, labels, reduction);
}

}  // namespace bira
