#include "bira/layers.hpp"

#include <cmath>
#include <unordered_map>

#include "bira/error.hpp"

namespace bira {

Var ParamStore::add(const std::string& name, Tensor value, bool trainable) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
    }
    Var v = trainable ? make_parameter(std::move(value), name) : make_constant(std::move(value), name);
    entries_.push_back({name, v, trainable});
    return v;
}

Var ParamStore::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.var;
    }
    throw ConfigError("unknown parameter: " + name);
}

std::size_t ParamStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) ++n;
    return n;
}

i64 ParamStore::trainable_numel() const {
    i64 n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.var->value.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_)
        if (e.trainable) e.var->zero_grad();
}

NamedTensors ParamStore::to_named_tensors() const {
    NamedTensors out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.emplace_back(e.name, e.var->value);
    return out;
}

void ParamStore::load_named_tensors(const NamedTensors& tensors) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : tensors) by_name[name] = &t;
    for (auto& e : entries_) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) throw IoError("checkpoint missing tensor: " + e.name);
        if (it->second->shape != e.var->value.shape) {
            throw ShapeError("checkpoint tensor " + e.name + " has shape " +
                             shape_str(it->second->shape) + ", expected " +
                             shape_str(e.var->value.shape));
        }
        e.var->value = *it->second;
    }
}

std::vector<Tensor> ParamStore::trainable_values() const {
    std::vector<Tensor> out;
    for (const auto& e : entries_)
        if (e.trainable) out.push_back(e.var->value);
    return out;
}

void ParamStore::set_trainable_values(const std::vector<Tensor>& values) {
    std::size_t i = 0;
    for (auto& e : entries_) {
        if (!e.trainable) continue;
        if (i >= values.size()) throw ConfigError("set_trainable_values: too few tensors");
        if (values[i].shape != e.var->value.shape)
            throw ShapeError("set_trainable_values: shape mismatch for " + e.name);
        e.var->value = values[i++];
    }
    if (i != values.size()) throw ConfigError("set_trainable_values: too many tensors");
}

Tensor kaiming_conv(Rng& rng, i64 c_out, i64 c_in, i64 kh, i64 kw) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(c_in * kh * kw));
    Tensor t = Tensor::zeros({c_out, c_in, kh, kw});
    for (auto& v : t.data) v = stddev * rng.normal();
    return t;
}

Tensor kaiming_linear(Rng& rng, i64 in_dim, i64 out_dim) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
    Tensor t = Tensor::zeros({in_dim, out_dim});
    for (auto& v : t.data) v = stddev * rng.normal();
    return t;
}

Conv2dLayer Conv2dLayer::make(ParamStore& ps, const std::string& name, Rng& rng, i64 c_in,
                              i64 c_out, i64 kh, i64 kw, i64 stride, i64 pad) {
    Conv2dLayer l;
    l.weight = ps.add(name + ".weight", kaiming_conv(rng, c_out, c_in, kh, kw));
    l.bias = ps.add(name + ".bias", Tensor::zeros({c_out}));
    l.stride = stride;
    l.pad = pad;
    return l;
}

Conv2dLayer Conv2dLayer::make_zero(ParamStore& ps, const std::string& name, i64 c_in, i64 c_out,
                                   i64 kh, i64 kw, i64 stride, i64 pad) {
    Conv2dLayer l;
    l.weight = ps.add(name + ".weight", Tensor::zeros({c_out, c_in, kh, kw}));
    l.bias = ps.add(name + ".bias", Tensor::zeros({c_out}));
    l.stride = stride;
    l.pad = pad;
    return l;
}

Var Conv2dLayer::forward(Tape& t, const Var& x) const {
    return ops::bias_add_channel(t, ops::conv2d(t, x, weight, stride, pad), bias);
}

BatchNorm2dLayer BatchNorm2dLayer::make(ParamStore& ps, const std::string& name, i64 channels) {
    BatchNorm2dLayer l;
    l.gamma = ps.add(name + ".gamma", Tensor::full({channels}, 1.0));
    l.beta = ps.add(name + ".beta", Tensor::zeros({channels}));
    l.running_mean = ps.add(name + ".running_mean", Tensor::zeros({channels}), false);
    l.running_var = ps.add(name + ".running_var", Tensor::full({channels}, 1.0), false);
    return l;
}

Var BatchNorm2dLayer::forward(Tape& t, const Var& x, bool training) const {
    return ops::batch_norm(t, x, gamma, beta, running_mean->value, running_var->value, training,
                           momentum, eps);
}

LinearLayer LinearLayer::make(ParamStore& ps, const std::string& name, Rng& rng, i64 in_dim,
                              i64 out_dim) {
    LinearLayer l;
    l.weight = ps.add(name + ".weight", kaiming_linear(rng, in_dim, out_dim));
    l.bias = ps.add(name + ".bias", Tensor::zeros({out_dim}));
    return l;
}

Var LinearLayer::forward(Tape& t, const Var& x) const {
    return ops::bias_add_row(t, ops::matmul(t, x, weight), bias);
}

}  // namespace bira
