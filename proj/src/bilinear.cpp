#include "bira/bilinear.hpp"

#include "bira/error.hpp"

namespace bira {

void BilinearConfig::validate() const {
    if (channels < 1) throw ConfigError("bilinear: channels must be >= 1");
    if (num_classes < 2) throw ConfigError("bilinear: num_classes must be >= 2");
    if (feature_h < 1 || feature_w < 1) throw ConfigError("bilinear: feature spatial must be >= 1");
}

NetB NetB::make(ParamStore& ps, const std::string& name, Rng& rng, const BilinearConfig& cfg) {
    cfg.validate();
    NetB net;
    net.cfg = cfg;
    net.conv = Conv2dLayer::make(ps, name + ".conv", rng, cfg.channels, cfg.channels,
                                 cfg.feature_h, cfg.feature_w, 1, 0);
    return net;
}

Var NetB::forward(Tape& t, const Var& features) const {
    const Tensor& f = features->value;
    if (f.ndim() != 4 || f.shape[2] != cfg.feature_h || f.shape[3] != cfg.feature_w) {
        throw ShapeError("net_b: expected [N,C," + std::to_string(cfg.feature_h) + "," +
                         std::to_string(cfg.feature_w) + "], got " + shape_str(f.shape));
    }
    Var x = ops::relu(t, conv.forward(t, features));  // [N,C,1,1]
    return ops::reshape(t, x, {f.shape[0], cfg.channels});
}

Var m_operator(Tape& t, const Var& x, const Var& y) {
    if (!x->value.same_shape(y->value)) {
        throw ShapeError("m_operator: shape mismatch " + shape_str(x->value.shape) + " vs " +
                         shape_str(y->value.shape));
    }
    return ops::scale(t, ops::add(t, x, y), 0.5);
}

Var bilinear_pool(Tape& t, const Var& z) {
    const Tensor& zv = z->value;
    Var b = ops::outer_product(t, z);
    if (zv.ndim() == 1) {  // [C] -> flat [C*C] descriptor
        b = ops::reshape(t, b, {zv.shape[0] * zv.shape[0]});
    }
    return ops::l2_normalize(t, ops::signed_sqrt(t, b));
}

}  // namespace bira
