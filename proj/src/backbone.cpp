#include "bira/backbone.hpp"

#include <sstream>

#include "bira/error.hpp"

namespace bira {

void BackboneConfig::validate() const {
    if (stage_widths.empty() || stage_widths.size() != blocks_per_stage.size())
        throw ConfigError("backbone: stage_widths and blocks_per_stage must have equal length >= 1");
    for (i64 b : blocks_per_stage)
        if (b < 1) throw ConfigError("backbone: blocks_per_stage entries must be >= 1");
    if (num_classes < 2) throw ConfigError("backbone: num_classes must be >= 2");
    if (out_channels % num_classes != 0)
        throw ConfigError("backbone: out_channels " + std::to_string(out_channels) +
                          " must be divisible by num_classes " + std::to_string(num_classes));
    if (out_h < 1 || out_w < 1) throw ConfigError("backbone: out_spatial must be >= 1x1");
}

ResidualBlock ResidualBlock::make(ParamStore& ps, const std::string& name, Rng& rng, i64 c_in,
                                  i64 c_out, i64 stride, bool use_batchnorm) {
    ResidualBlock b;
    b.stride = stride;
    // strided convs use even kernels so (H + 2p - k) stays divisible by the
    // stride on even inputs and the block halves the spatial size exactly
    const i64 k1 = stride == 2 ? 4 : 3;
    b.conv1 = Conv2dLayer::make(ps, name + ".conv1", rng, c_in, c_out, k1, k1, stride, 1);
    b.conv2 = Conv2dLayer::make(ps, name + ".conv2", rng, c_out, c_out, 3, 3, 1, 1);
    if (use_batchnorm) {
        b.bn1 = BatchNorm2dLayer::make(ps, name + ".bn1", c_out);
        b.bn2 = BatchNorm2dLayer::make(ps, name + ".bn2", c_out);
    }
    if (stride != 1 || c_in != c_out) {
        const i64 kp = stride == 2 ? 2 : 1;
        b.proj = Conv2dLayer::make(ps, name + ".proj", rng, c_in, c_out, kp, kp, stride, 0);
        if (use_batchnorm) b.proj_bn = BatchNorm2dLayer::make(ps, name + ".proj_bn", c_out);
    }
    return b;
}

Var ResidualBlock::forward(Tape& t, const Var& x, bool training) const {
    Var main = conv1.forward(t, x);
    if (bn1) main = bn1->forward(t, main, training);
    main = ops::relu(t, main);
    main = conv2.forward(t, main);
    if (bn2) main = bn2->forward(t, main, training);

    Var shortcut = x;
    if (proj) {
        shortcut = proj->forward(t, x);
        if (proj_bn) shortcut = proj_bn->forward(t, shortcut, training);
    }
    if (!main->value.same_shape(shortcut->value)) {
        throw ShapeError("residual block: main branch " + shape_str(main->value.shape) +
                         " does not match shortcut " + shape_str(shortcut->value.shape));
    }
    return ops::relu(t, ops::add(t, main, shortcut));
}

Backbone Backbone::make(ParamStore& ps, const std::string& name, Rng& rng,
                        const BackboneConfig& cfg) {
    cfg.validate();
    Backbone bb;
    bb.cfg = cfg;
    bb.stem = Conv2dLayer::make(ps, name + ".stem.conv", rng, cfg.input_channels,
                                cfg.stage_widths[0], 3, 3, 1, 1);
    if (cfg.use_batchnorm)
        bb.stem_bn = BatchNorm2dLayer::make(ps, name + ".stem.bn", cfg.stage_widths[0]);
    i64 c_prev = cfg.stage_widths[0];
    for (std::size_t s = 0; s < cfg.stage_widths.size(); ++s) {
        const i64 width = cfg.stage_widths[s];
        for (i64 b = 0; b < cfg.blocks_per_stage[s]; ++b) {
            const i64 stride = b == 0 ? 2 : 1;  // first block of each stage downsamples
            bb.blocks.push_back(ResidualBlock::make(
                ps, name + ".stage" + std::to_string(s) + ".block" + std::to_string(b), rng,
                c_prev, width, stride, cfg.use_batchnorm));
            c_prev = width;
        }
    }
    bb.reduce = Conv2dLayer::make(ps, name + ".reduce.conv", rng, c_prev, cfg.out_channels, 1, 1,
                                  1, 0);
    return bb;
}

Var Backbone::forward(Tape& t, const Var& images, bool training) const {
    const Tensor& in = images->value;
    if (in.ndim() != 4 || in.shape[1] != cfg.input_channels) {
        throw ShapeError("backbone: expected [N," + std::to_string(cfg.input_channels) +
                         ",H,W] input, got " + shape_str(in.shape));
    }
    // geometry check with a stage-by-stage trace
    {
        i64 h = in.shape[2], w = in.shape[3];
        std::ostringstream trace;
        trace << h << "x" << w;
        for (std::size_t s = 0; s < cfg.stage_widths.size(); ++s) {
            if (h % 2 != 0 || w % 2 != 0) {
                throw ShapeError("backbone: stage " + std::to_string(s) +
                                 " cannot halve odd spatial size; trace " + trace.str());
            }
            h /= 2;
            w /= 2;
            trace << " -> " << h << "x" << w;
        }
        if (h != cfg.out_h || w != cfg.out_w) {
            throw ShapeError("backbone: input " + shape_str(in.shape) + " reaches " +
                             std::to_string(h) + "x" + std::to_string(w) + " (trace " +
                             trace.str() + "), expected out_spatial " + std::to_string(cfg.out_h) +
                             "x" + std::to_string(cfg.out_w));
        }
    }
    Var x = stem.forward(t, images);
    if (stem_bn) x = stem_bn->forward(t, x, training);
    x = ops::relu(t, x);
    for (const auto& b : blocks) x = b.forward(t, x, training);
    x = reduce.forward(t, x);
    return ops::relu(t, x);
}

}  // namespace bira
