#include "bira/attention.hpp"

#include "bira/error.hpp"

namespace bira {

void AttentionConfig::validate() const {
    if (channels < 1) throw ConfigError("attention: channels must be >= 1");
    if (!hidden.empty() && hidden.size() != 2)
        throw ConfigError("attention: hidden must name exactly the two interior conv widths");
    if (epsilon <= 0.0) throw ConfigError("attention: epsilon must be positive");
}

AttentionNet AttentionNet::make(ParamStore& ps, const std::string& name, Rng& rng,
                                const AttentionConfig& cfg) {
    cfg.validate();
    AttentionNet net;
    net.cfg = cfg;
    const i64 c = cfg.channels;
    const i64 h1 = cfg.hidden.empty() ? c : cfg.hidden[0];
    const i64 h2 = cfg.hidden.empty() ? c : cfg.hidden[1];
    net.c1 = Conv2dLayer::make(ps, name + ".c1", rng, c, h1, 1, 1, 1, 0);
    net.c2 = Conv2dLayer::make(ps, name + ".c2", rng, h1, h2, 1, 1, 1, 0);
    net.c3 = Conv2dLayer::make(ps, name + ".c3", rng, h2, c, 1, 1, 1, 0);
    return net;
}

Var AttentionNet::net_a(Tape& t, const Var& features) const {
    const Tensor& f = features->value;
    if (f.ndim() != 4 || f.shape[1] != cfg.channels) {
        throw ShapeError("net_a: expected [N," + std::to_string(cfg.channels) + ",H,W], got " +
                         shape_str(f.shape));
    }
    Var x = ops::relu(t, c1.forward(t, features));
    x = ops::relu(t, c2.forward(t, x));
    return ops::sigmoid(t, c3.forward(t, x));
}

Var AttentionNet::output(Tape& t, const Var& attention, const Var& features) const {
    if (!attention->value.same_shape(features->value)) {
        throw ShapeError("attention_output: A " + shape_str(attention->value.shape) +
                         " vs F " + shape_str(features->value.shape));
    }
    Var gap_a = ops::global_avg_pool(t, attention);
    Var gap_af = ops::global_avg_pool(t, ops::mul(t, attention, features));
    if (cfg.inverted) return ops::div(t, gap_af, gap_a, cfg.epsilon);
    return ops::div(t, gap_a, gap_af, cfg.epsilon);
}

Var AttentionNet::forward(Tape& t, const Var& features) const {
    return output(t, net_a(t, features), features);
}

}  // namespace bira
