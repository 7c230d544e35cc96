#include "bira/gradsuite.hpp"

#include <cmath>

#include "bira/attention.hpp"
#include "bira/bilinear.hpp"
#include "bira/loss.hpp"
#include "bira/model.hpp"
#include "bira/rng.hpp"

namespace bira {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// keep values away from a non-smooth point at 0
Tensor random_away_from_zero(Rng& rng, Shape shape, double margin = 0.1) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) {
        const double mag = rng.uniform(margin, 1.0);
        v = rng.bernoulli(0.5) ? mag : -mag;
    }
    return t;
}

// random weighting constant so the scalarized objective exercises every output
Var weighted_sum(Tape& t, const Var& x, const Tensor& w) {
    return ops::sum_all(t, ops::mul(t, x, make_constant(w)));
}

struct Check {
    std::string name;
    GradFn fn;
    std::vector<Tensor> point;
};

double run_check(const Check& c) { return grad_check(c.fn, c.point).max_rel_err; }

std::vector<Var> make_inputs(Tape&, const std::vector<Tensor>& values, bool with_grad) {
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const auto& v : values)
        vars.push_back(with_grad ? make_parameter(v) : make_constant(v));
    return vars;
}

std::vector<Check> ops_checks(Rng& rng) {
    std::vector<Check> checks;
    const Shape s{2, 3};

    auto binary = [&](const std::string& name, ops::Ew kind, Tensor a, Tensor b) {
        Tensor w = random_tensor(rng, a.shape);
        checks.push_back(
            {name,
             [kind, w](Tape& t, const std::vector<Tensor>& p, bool g) {
                 auto in = make_inputs(t, p, g);
                 Var y = ops::elementwise(t, kind, in[0], in[1]);
                 return GradFnResult{weighted_sum(t, y, w), in};
             },
             {std::move(a), std::move(b)}});
    };
    binary("elementwise_add", ops::Ew::add, random_tensor(rng, s), random_tensor(rng, s));
    binary("elementwise_sub", ops::Ew::sub, random_tensor(rng, s), random_tensor(rng, s));
    binary("elementwise_mul", ops::Ew::mul, random_tensor(rng, s), random_tensor(rng, s));
    binary("elementwise_div", ops::Ew::div, random_tensor(rng, s),
           random_away_from_zero(rng, s, 0.5));

    {
        Tensor w = random_tensor(rng, {2, 4});
        checks.push_back({"matmul",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::matmul(t, in[0], in[1]), w),
                                                  in};
                          },
                          {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 4})}});
    }
    {
        // random 1x2x4x4 input, 3x2x3x3 kernel, stride 1, pad 1
        Tensor w = random_tensor(rng, {1, 3, 4, 4});
        checks.push_back({"conv2d",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              Var y = ops::conv2d(t, in[0], in[1], 1, 1);
                              return GradFnResult{weighted_sum(t, y, w), in};
                          },
                          {random_tensor(rng, {1, 2, 4, 4}), random_tensor(rng, {3, 2, 3, 3})}});
    }
    {
        Tensor w = random_tensor(rng, {2, 3, 2, 2});
        checks.push_back({"conv2d_strided",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              Var y = ops::conv2d(t, in[0], in[1], 2, 0);
                              return GradFnResult{weighted_sum(t, y, w), in};
                          },
                          {random_tensor(rng, {2, 2, 4, 4}), random_tensor(rng, {3, 2, 2, 2})}});
    }
    {
        Tensor w = random_tensor(rng, s);
        checks.push_back({"relu",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::relu(t, in[0]), w), in};
                          },
                          {random_away_from_zero(rng, s)}});
    }
    {
        Tensor w = random_tensor(rng, s);
        checks.push_back({"sigmoid",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::sigmoid(t, in[0]), w), in};
                          },
                          {random_tensor(rng, s, -3.0, 3.0)}});
    }
    {
        Tensor w = random_tensor(rng, {2, 3});
        checks.push_back({"global_avg_pool",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{
                                  weighted_sum(t, ops::global_avg_pool(t, in[0]), w), in};
                          },
                          {random_tensor(rng, {2, 3, 3, 2})}});
    }
    {
        Tensor w = random_tensor(rng, {2, 16});
        checks.push_back({"outer_product",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{
                                  weighted_sum(t, ops::outer_product(t, in[0]), w), in};
                          },
                          {random_tensor(rng, {2, 4})}});
    }
    {
        Tensor w = random_tensor(rng, s);
        checks.push_back({"signed_sqrt",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::signed_sqrt(t, in[0]), w),
                                                  in};
                          },
                          {random_away_from_zero(rng, s, 0.2)}});
    }
    {
        Tensor w = random_tensor(rng, {2, 5});
        checks.push_back({"l2_normalize",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::l2_normalize(t, in[0]), w),
                                                  in};
                          },
                          {random_away_from_zero(rng, {2, 5}, 0.3)}});
    }
    {
        Tensor w = random_tensor(rng, {2, 5});
        checks.push_back({"log_softmax",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, ops::log_softmax(t, in[0]), w),
                                                  in};
                          },
                          {random_tensor(rng, {2, 5}, -2.0, 2.0)}});
    }
    {
        Tensor w = random_tensor(rng, {2, 3, 2, 2});
        checks.push_back({"bias_add_channel",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              Var y = ops::bias_add_channel(t, in[0], in[1]);
                              return GradFnResult{weighted_sum(t, y, w), in};
                          },
                          {random_tensor(rng, {2, 3, 2, 2}), random_tensor(rng, {3})}});
    }
    {
        Tensor w = random_tensor(rng, {3, 4});
        checks.push_back({"bias_add_row",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              Var y = ops::bias_add_row(t, in[0], in[1]);
                              return GradFnResult{weighted_sum(t, y, w), in};
                          },
                          {random_tensor(rng, {3, 4}), random_tensor(rng, {4})}});
    }
    {
        Tensor w = random_tensor(rng, {2, 3, 2, 2});
        checks.push_back(
            {"batch_norm",
             [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                 auto in = make_inputs(t, p, g);
                 Tensor rm = Tensor::zeros({3});   // fresh buffers per evaluation
                 Tensor rv = Tensor::full({3}, 1.0);
                 Var y = ops::batch_norm(t, in[0], in[1], in[2], rm, rv, true, 0.1, 1e-5);
                 return GradFnResult{weighted_sum(t, y, w), in};
             },
             {random_tensor(rng, {2, 3, 2, 2}), random_tensor(rng, {3}, 0.5, 1.5),
              random_tensor(rng, {3})}});
    }
    {
        // gradient accumulation across fan-out: f = sum(x*x * w) uses x twice
        Tensor w = random_tensor(rng, s);
        checks.push_back({"fanout_reuse",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              Var y = ops::mul(t, in[0], in[0]);
                              return GradFnResult{weighted_sum(t, y, w), in};
                          },
                          {random_tensor(rng, s)}});
    }
    return checks;
}

std::vector<Check> attention_checks(Rng& rng) {
    std::vector<Check> checks;
    AttentionConfig acfg;
    acfg.channels = 4;
    {
        Tensor w = random_tensor(rng, {2, 4});
        // F strictly positive keeps denominators away from the ε guard
        Tensor f = random_tensor(rng, {2, 4, 3, 3}, 0.5, 1.5);
        ParamStore probe;
        Rng prng(rng.next_u64());
        AttentionNet net = AttentionNet::make(probe, "attn", prng, acfg);
        // jitter every coordinate (biases init to zero, which can park dead
        // units exactly on the relu kink -- a non-smooth point to avoid)
        std::vector<Tensor> point;
        for (const auto& e : probe.entries()) {
            Tensor v = e.var->value;
            for (auto& x : v.data) x += rng.uniform(0.02, 0.15) * (rng.bernoulli(0.5) ? 1 : -1);
            point.push_back(std::move(v));
        }
        checks.push_back(
            {"net_a_params",
             [w, f, acfg](Tape& t, const std::vector<Tensor>& p, bool g) {
                 ParamStore ps;
                 Rng dummy(0);
                 AttentionNet net = AttentionNet::make(ps, "attn", dummy, acfg);
                 std::vector<Var> vars;
                 std::size_t i = 0;
                 for (auto& e : ps.entries()) {
                     e.var->value = p[i++];
                     e.var->requires_grad = g;
                     vars.push_back(e.var);
                 }
                 Var out = net.forward(t, make_constant(f));
                 return GradFnResult{weighted_sum(t, out, w), vars};
             },
             std::move(point)});
    }
    {
        // gradient through both A and F in Output = GAP(A) ⊘ GAP(A⊗F)
        Tensor w = random_tensor(rng, {1, 2});
        checks.push_back(
            {"attention_output_af",
             [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                 auto in = make_inputs(t, p, g);
                 AttentionConfig cfg;
                 cfg.channels = 2;
                 ParamStore ps;
                 Rng dummy(0);
                 AttentionNet net = AttentionNet::make(ps, "attn", dummy, cfg);
                 Var out = net.output(t, in[0], in[1]);
                 return GradFnResult{weighted_sum(t, out, w), in};
             },
             {random_tensor(rng, {1, 2, 2, 2}, 0.2, 0.9),
              random_tensor(rng, {1, 2, 2, 2}, 0.5, 1.5)}});
    }
    return checks;
}

std::vector<Check> bilinear_checks(Rng& rng) {
    std::vector<Check> checks;
    {
        Tensor w = random_tensor(rng, {2, 16});
        checks.push_back({"bilinear_pool",
                          [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{weighted_sum(t, bilinear_pool(t, in[0]), w), in};
                          },
                          {random_away_from_zero(rng, {2, 4}, 0.3)}});
    }
    {
        // classify ∘ bilinear_pool ∘ m_operator
        Tensor w = random_tensor(rng, {2, 3});
        checks.push_back(
            {"head_composed",
             [w](Tape& t, const std::vector<Tensor>& p, bool g) {
                 auto in = make_inputs(t, p, g);
                 Var z = m_operator(t, in[0], in[1]);
                 Var pooled = bilinear_pool(t, z);
                 Var logits = ops::bias_add_row(t, ops::matmul(t, pooled, in[2]), in[3]);
                 return GradFnResult{weighted_sum(t, logits, w), in};
             },
             {random_away_from_zero(rng, {2, 4}, 0.3), random_away_from_zero(rng, {2, 4}, 0.3),
              random_tensor(rng, {16, 3}), random_tensor(rng, {3})}});
    }
    {
        // net_b conv parameters through the full-extent convolution
        Tensor w = random_tensor(rng, {1, 4});
        Tensor f = random_tensor(rng, {1, 4, 3, 3});
        checks.push_back(
            {"net_b_params",
             [w, f](Tape& t, const std::vector<Tensor>& p, bool g) {
                 auto in = make_inputs(t, p, g);
                 Var y = ops::bias_add_channel(t, ops::conv2d(t, make_constant(f), in[0], 1, 0),
                                               in[1]);
                 Var flat = ops::reshape(t, ops::relu(t, y), {1, 4});
                 return GradFnResult{weighted_sum(t, flat, w), in};
             },
             {random_tensor(rng, {4, 4, 3, 3}), random_tensor(rng, {4}, 0.05, 0.3)}});
    }
    return checks;
}

std::vector<Check> loss_checks(Rng& rng) {
    std::vector<Check> checks;
    auto tie_free_logits = [&rng](i64 n, i64 c) {
        Tensor t = Tensor::zeros({n, c});
        for (i64 r = 0; r < n; ++r) {
            for (i64 j = 0; j < c; ++j) t.data[static_cast<std::size_t>(r * c + j)] = rng.uniform(-1.0, 1.0);
            // give the argmax a clear margin so ±ε probes cannot flip it
            const i64 top = rng.uniform_int(c);
            t.data[static_cast<std::size_t>(r * c + top)] += 1.5;
        }
        return t;
    };
    {
        std::vector<int> labels = {static_cast<int>(rng.uniform_int(5)),
                                   static_cast<int>(rng.uniform_int(5))};
        checks.push_back({"grading_loss",
                          [labels](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{grading_loss(t, in[0], labels), in};
                          },
                          {tie_free_logits(2, 5)}});
    }
    {
        std::vector<int> labels = {static_cast<int>(rng.uniform_int(5)),
                                   static_cast<int>(rng.uniform_int(5))};
        checks.push_back({"cross_entropy",
                          [labels](Tape& t, const std::vector<Tensor>& p, bool g) {
                              auto in = make_inputs(t, p, g);
                              return GradFnResult{cross_entropy_loss(t, in[0], labels), in};
                          },
                          {tie_free_logits(2, 5)}});
    }
    return checks;
}

std::vector<Check> full_checks(Rng& rng) {
    // all trainable parameters of a tiny bira_net, through the grading loss
    ModelSpec spec;
    spec.variant = VariantKind::bira_net;
    spec.backbone.stage_widths = {4, 6};
    spec.backbone.blocks_per_stage = {1, 1};
    spec.backbone.out_channels = 10;  // K=2 maps per class
    spec.backbone.out_h = 2;
    spec.backbone.out_w = 2;
    spec.backbone.use_batchnorm = true;
    spec.image_size = 8;
    spec.seed = rng.next_u64();

    Tensor images = random_tensor(rng, {2, 3, 8, 8}, 0.0, 1.0);
    std::vector<int> labels = {static_cast<int>(rng.uniform_int(5)),
                               static_cast<int>(rng.uniform_int(5))};

    Model probe = build_model(spec);
    std::vector<Tensor> point = probe.params.trainable_values();
    for (auto& t : point) {  // keep preactivations off exact relu kinks
        for (auto& x : t.data) x += rng.uniform(0.01, 0.05) * (rng.bernoulli(0.5) ? 1 : -1);
    }

    std::vector<Check> checks;
    checks.push_back(
        {"bira_net_full_pipeline",
         [spec, images, labels](Tape& t, const std::vector<Tensor>& p, bool g) {
             Model m = build_model(spec);  // fresh batchnorm buffers per evaluation
             m.params.set_trainable_values(p);
             std::vector<Var> vars;
             for (auto& e : m.params.entries()) {
                 if (!e.trainable) continue;
                 e.var->requires_grad = g;
                 vars.push_back(e.var);
             }
             Var logits = m.forward(t, make_constant(images), /*training=*/true);
             return GradFnResult{grading_loss(t, logits, labels), vars};
         },
         std::move(point)});
    return checks;
}

}  // namespace

std::vector<std::string> grad_suite_scopes() {
    return {"ops", "attention", "bilinear", "loss", "full"};
}

std::vector<GradSuiteEntry> grad_suite(const std::string& scope, std::uint64_t seed,
                                       int seeds_per_check) {
    std::vector<GradSuiteEntry> out;
    // `full` re-derives the whole parameter set per seed; keep it to a few
    const int reps = scope == "full" ? std::min(seeds_per_check, 3) : seeds_per_check;
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng(child_seed(seed, scope, static_cast<std::uint64_t>(rep)));
        std::vector<Check> checks;
        if (scope == "ops") checks = ops_checks(rng);
        else if (scope == "attention") checks = attention_checks(rng);
        else if (scope == "bilinear") checks = bilinear_checks(rng);
        else if (scope == "loss") checks = loss_checks(rng);
        else if (scope == "full") checks = full_checks(rng);
        else throw ConfigError("unknown gradcheck scope `" + scope + "`");

        for (const auto& c : checks) {
            const double err = run_check(c);
            bool found = false;
            for (auto& e : out) {
                if (e.name == c.name) {
                    e.worst_rel_err = std::max(e.worst_rel_err, err);
                    found = true;
                    break;
                }
            }
            if (!found) out.push_back({c.name, err, 1e-4});
        }
    }
    return out;
}

}  // namespace bira
