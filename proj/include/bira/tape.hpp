#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bira/tensor.hpp"

namespace bira {

struct Node;
using Var = std::shared_ptr<Node>;

// One recorded value in the computation graph. Leaves (constants, parameters)
// have no backward_fn; op outputs carry a closure that routes the node's
// gradient into its inputs. Gradients are allocated lazily on first
// accumulation, so a node that never receives a gradient stays empty.
struct Node {
    Tensor value;
    std::vector<double> grad;  // empty until a gradient is accumulated
    bool requires_grad = false;
    std::string name;
    std::function<void(Node&)> backward_fn;

    void ensure_grad();
    void zero_grad();
    bool has_grad() const { return !grad.empty(); }
    void accumulate(const double* g, i64 n);
    void accumulate_at(i64 idx, double v);
};

Var make_constant(Tensor value, std::string name = "");
Var make_parameter(Tensor value, std::string name = "");

// Per-forward-pass record of op outputs, in execution order (a topological
// order by construction). backward() walks it once, in reverse. The tape is
// meant to be built, consumed, and discarded by a single thread.
class Tape {
public:
    Var record(Tensor value, bool requires_grad, std::function<void(Node&)> backward_fn);
    void backward(const Var& output);
    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<Var> nodes_;
};

}  // namespace bira
