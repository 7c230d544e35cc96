#pragma once

#include <optional>
#include <utility>

#include "bira/layers.hpp"

namespace bira {

struct BackboneConfig {
    i64 input_channels = 3;
    std::vector<i64> stage_widths = {16, 32, 64};
    std::vector<i64> blocks_per_stage = {1, 1, 1};
    i64 out_channels = 20;  // K maps per class
    i64 out_h = 8, out_w = 8;
    bool use_batchnorm = true;
    i64 num_classes = 5;

    void validate() const;
    // overall downsampling: the first block of every stage has stride 2
    i64 downsample_factor() const { return i64{1} << stage_widths.size(); }
};

// Basic residual block: conv3x3(stride)-BN-ReLU-conv3x3-BN plus a projection
// shortcut (1x1 conv) whenever stride or width changes; ReLU after the sum.
struct ResidualBlock {
    Conv2dLayer conv1, conv2;
    std::optional<BatchNorm2dLayer> bn1, bn2;
    std::optional<Conv2dLayer> proj;
    std::optional<BatchNorm2dLayer> proj_bn;
    i64 stride = 1;

    static ResidualBlock make(ParamStore& ps, const std::string& name, Rng& rng, i64 c_in,
                              i64 c_out, i64 stride, bool use_batchnorm);
    Var forward(Tape& t, const Var& x, bool training) const;
};

// Scratch residual feature extractor: stem conv, stride-2 stages, and an
// explicit trailing 1x1 convolution + ReLU mapping the last stage width to
// out_channels.
struct Backbone {
    BackboneConfig cfg;
    Conv2dLayer stem;
    std::optional<BatchNorm2dLayer> stem_bn;
    std::vector<ResidualBlock> blocks;
    Conv2dLayer reduce;

    static Backbone make(ParamStore& ps, const std::string& name, Rng& rng,
                         const BackboneConfig& cfg);
    Var forward(Tape& t, const Var& images, bool training) const;
};

}  // namespace bira
