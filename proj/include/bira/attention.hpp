#pragma once

#include "bira/layers.hpp"

namespace bira {

struct AttentionConfig {
    i64 channels = 20;              // must equal backbone out_channels
    std::vector<i64> hidden = {};   // widths of the two interior 1x1 convs; empty = channel-preserving
    double epsilon = ops::kDivEps;
    bool inverted = false;          // compute GAP(A⊗F) ⊘ GAP(A) instead

    void validate() const;
};

// Net-A: three 1x1 convolutions (ReLU after the first two, sigmoid last),
// producing attention maps A aligned with the feature maps F, plus the pooled
// attention output
//     out[l] = GAP(A[l]) ⊘ (GAP(A[l] ⊗ F[l]))
// with the sign-preserving ε guard in the division.
struct AttentionNet {
    AttentionConfig cfg;
    Conv2dLayer c1, c2, c3;

    static AttentionNet make(ParamStore& ps, const std::string& name, Rng& rng,
                             const AttentionConfig& cfg);
    Var net_a(Tape& t, const Var& features) const;
    Var output(Tape& t, const Var& attention, const Var& features) const;
    Var forward(Tape& t, const Var& features) const;  // output(net_a(F), F)
};

}  // namespace bira
