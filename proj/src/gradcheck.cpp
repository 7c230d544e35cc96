#include "bira/gradcheck.hpp"

#include <cmath>

namespace bira {

static double eval_scalar(const GradFn& fn, const std::vector<Tensor>& point) {
    Tape tape;
    GradFnResult r = fn(tape, point, false);
    if (r.output->value.numel() != 1) throw ShapeError("grad_check: function must be scalar");
    return r.output->value.data[0];
}

GradCheckResult grad_check(const GradFn& fn, const std::vector<Tensor>& point, double step,
                           double abs_floor) {
    if (step <= 0.0) throw DomainError("grad_check: step must be positive");

    // analytic pass
    std::vector<Tensor> analytic;
    {
        Tape tape;
        GradFnResult r = fn(tape, point, true);
        if (r.output->value.numel() != 1) throw ShapeError("grad_check: function must be scalar");
        if (r.inputs.size() != point.size())
            throw ShapeError("grad_check: function returned wrong input count");
        tape.backward(r.output);
        for (auto& v : r.inputs) {
            Tensor g = Tensor::zeros(v->value.shape);
            if (v->has_grad()) g.data = v->grad;
            analytic.push_back(std::move(g));
        }
    }

    GradCheckResult res;
    double worst_diff = -1.0;
    std::vector<Tensor> work = point;
    for (std::size_t p = 0; p < point.size(); ++p) {
        for (i64 i = 0; i < point[p].numel(); ++i) {
            const double orig = work[p].data[static_cast<std::size_t>(i)];
            work[p].data[static_cast<std::size_t>(i)] = orig + step;
            const double fp = eval_scalar(fn, work);
            work[p].data[static_cast<std::size_t>(i)] = orig - step;
            const double fm = eval_scalar(fn, work);
            work[p].data[static_cast<std::size_t>(i)] = orig;

            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[p].data[static_cast<std::size_t>(i)];
            const double diff = std::abs(a - numeric);
            double rel = 0.0;
            if (diff > abs_floor) {
                const double denom = std::max(std::abs(a), std::abs(numeric));
                rel = denom > 0.0 ? diff / denom : diff;
            }
            if (rel > res.max_rel_err || (res.max_rel_err == 0.0 && diff > worst_diff)) {
                res.max_rel_err = rel;
                res.worst_input = p;
                res.worst_coord = i;
                res.analytic = a;
                res.numeric = numeric;
                worst_diff = diff;
            }
        }
    }
    return res;
}

}  // namespace bira
