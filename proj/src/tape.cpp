#include "bira/tape.hpp"

namespace bira {

void Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.data.size(), 0.0);
}

void Node::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

void Node::accumulate(const double* g, i64 n) {
    if (!requires_grad) return;
    ensure_grad();
    for (i64 i = 0; i < n; ++i) grad[static_cast<std::size_t>(i)] += g[i];
}

void Node::accumulate_at(i64 idx, double v) {
    if (!requires_grad) return;
    ensure_grad();
    grad[static_cast<std::size_t>(idx)] += v;
}

Var make_constant(Tensor value, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    n->name = std::move(name);
    return n;
}

Var make_parameter(Tensor value, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

Var Tape::record(Tensor value, bool requires_grad, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) n->backward_fn = std::move(backward_fn);
    nodes_.push_back(n);
    return n;
}

void Tape::backward(const Var& output) {
    if (!output) throw ShapeError("backward: null output");
    if (output->value.numel() != 1) {
        throw ShapeError("backward requires a scalar output, got shape " +
                         shape_str(output->value.shape));
    }
    if (!output->requires_grad) return;  // nothing upstream wants a gradient
    output->ensure_grad();
    output->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.requires_grad && n.backward_fn && n.has_grad()) n.backward_fn(n);
    }
}

}  // namespace bira
