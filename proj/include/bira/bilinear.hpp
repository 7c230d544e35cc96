#pragma once

#include "bira/layers.hpp"

namespace bira {

struct BilinearConfig {
    i64 channels = 20;   // backbone out_channels
    i64 num_classes = 5;
    i64 feature_h = 8, feature_w = 8;

    void validate() const;
    i64 pooled_dim() const { return channels * channels; }
};

// Net-B: a single convolution whose kernel spans the full feature extent
// (valid padding, so spatial collapses to 1x1), then ReLU, reshaped to [N,C].
struct NetB {
    BilinearConfig cfg;
    Conv2dLayer conv;

    static NetB make(ParamStore& ps, const std::string& name, Rng& rng, const BilinearConfig& cfg);
    Var forward(Tape& t, const Var& features) const;
};

// Z = (X ⊕ Y) ⊘ 2, the elementwise mean of the two streams.
Var m_operator(Tape& t, const Var& x, const Var& y);

// Per row: B = ZZᵀ flattened row-major, signed square root, L2 normalization.
Var bilinear_pool(Tape& t, const Var& z);

}  // namespace bira
