#include "bira/optimizer.hpp"

#include "bira/error.hpp"
#include "bira/kernels.hpp"

namespace bira {

SgdOptimizer::SgdOptimizer(ParamStore& params, SgdConfig cfg) : params_(params), cfg_(cfg) {
    if (cfg_.momentum < 0.0 || cfg_.momentum >= 1.0)
        throw ConfigError("sgd: momentum must be in [0,1)");
    for (const auto& e : params_.entries()) {
        if (e.trainable) velocity_.emplace_back(e.var->value.data.size(), 0.0);
    }
}

void SgdOptimizer::step() {
    std::size_t vi = 0;
    for (auto& e : params_.entries()) {
        if (!e.trainable) continue;
        Node& n = *e.var;
        if (!n.has_grad())
            throw DomainError("sgd: missing gradient for parameter `" + e.name + "`");
        auto& v = velocity_[vi++];
        double* w = n.value.data.data();
        const double* g = n.grad.data();
        const double mu = cfg_.momentum, lambda = cfg_.weight_decay, eta = cfg_.learning_rate;
        const i64 len = n.value.numel();
        double* vel = v.data();
        kernels::parallel_for(len, [&](i64 i) {
            vel[i] = mu * vel[i] + (g[i] + lambda * w[i]);
            w[i] -= eta * vel[i];
        });
    }
}

std::vector<Tensor> SgdOptimizer::velocities() const {
    std::vector<Tensor> out;
    std::size_t vi = 0;
    for (const auto& e : params_.entries()) {
        if (!e.trainable) continue;
        out.emplace_back(e.var->value.shape, velocity_[vi++]);
    }
    return out;
}

void SgdOptimizer::set_velocities(const std::vector<Tensor>& vs) {
    if (vs.size() != velocity_.size()) throw ConfigError("sgd: velocity count mismatch");
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (vs[i].data.size() != velocity_[i].size())
            throw ShapeError("sgd: velocity size mismatch at index " + std::to_string(i));
        velocity_[i] = vs[i].data;
    }
}

}  // namespace bira
