#pragma once

#include "bira/layers.hpp"

namespace bira {

// SGD with momentum and coupled L2 weight decay:
//   v <- mu*v + (g + lambda*w);  w <- w - eta*v
struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-7;
};

class SgdOptimizer {
public:
    SgdOptimizer(ParamStore& params, SgdConfig cfg);

    void step();

    const SgdConfig& config() const { return cfg_; }
    // velocity buffers, aligned with the store's trainable entries
    std::vector<Tensor> velocities() const;
    void set_velocities(const std::vector<Tensor>& v);

private:
    ParamStore& params_;
    SgdConfig cfg_;
    std::vector<std::vector<double>> velocity_;
};

}  // namespace bira
