#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bira/ops.hpp"
#include "bira/rng.hpp"
#include "bira/tape.hpp"
#include "bira/tensor_io.hpp"

namespace bira {

// Flat registry of named parameters and buffers. Entries are appended in
// deterministic construction order; buffers (batchnorm running statistics)
// are serialized but skipped by the optimizer.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Var var;
        bool trainable = true;
    };

    Var add(const std::string& name, Tensor value, bool trainable = true);
    Var find(const std::string& name) const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t trainable_count() const;
    i64 trainable_numel() const;

    void zero_grad();
    NamedTensors to_named_tensors() const;
    void load_named_tensors(const NamedTensors& tensors);
    std::vector<Tensor> trainable_values() const;
    void set_trainable_values(const std::vector<Tensor>& values);

private:
    std::vector<Entry> entries_;
};

// Kaiming fan-in initialization for conv and linear weights.
Tensor kaiming_conv(Rng& rng, i64 c_out, i64 c_in, i64 kh, i64 kw);
Tensor kaiming_linear(Rng& rng, i64 in_dim, i64 out_dim);

struct Conv2dLayer {
    Var weight;  // [O,C,kh,kw]
    Var bias;    // [O]
    i64 stride = 1;
    i64 pad = 0;

    static Conv2dLayer make(ParamStore& ps, const std::string& name, Rng& rng, i64 c_in, i64 c_out,
                            i64 kh, i64 kw, i64 stride, i64 pad);
    static Conv2dLayer make_zero(ParamStore& ps, const std::string& name, i64 c_in, i64 c_out,
                                 i64 kh, i64 kw, i64 stride, i64 pad);
    Var forward(Tape& t, const Var& x) const;
};

struct BatchNorm2dLayer {
    Var gamma;  // [C]
    Var beta;   // [C]
    Var running_mean;  // buffer
    Var running_var;   // buffer
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNorm2dLayer make(ParamStore& ps, const std::string& name, i64 channels);
    Var forward(Tape& t, const Var& x, bool training) const;
};

struct LinearLayer {
    Var weight;  // [in,out]
    Var bias;    // [out]

    static LinearLayer make(ParamStore& ps, const std::string& name, Rng& rng, i64 in_dim,
                            i64 out_dim);
    Var forward(Tape& t, const Var& x) const;
};

}  // namespace bira
