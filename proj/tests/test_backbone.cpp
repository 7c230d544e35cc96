#include <cstring>

#include "doctest.h"

#include "bira/backbone.hpp"
#include "bira/gradcheck.hpp"
#include "bira/rng.hpp"

using namespace bira;

namespace {
Tensor rand_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}
}  // namespace

TEST_CASE("residual block: zero main path reduces to relu(x)") {
    ParamStore ps;
    Rng rng(1);
    // zeroed main path convs, identity shortcut (stride 1, equal channels)
    ResidualBlock b;
    b.stride = 1;
    b.conv1 = Conv2dLayer::make_zero(ps, "b.conv1", 3, 3, 3, 3, 1, 1);
    b.conv2 = Conv2dLayer::make_zero(ps, "b.conv2", 3, 3, 3, 3, 1, 1);
    b.bn1 = BatchNorm2dLayer::make(ps, "b.bn1", 3);
    b.bn2 = BatchNorm2dLayer::make(ps, "b.bn2", 3);

    Tape t;
    Tensor x = rand_tensor(rng, {2, 3, 4, 4}, -1.0, 1.0);
    Var out = b.forward(t, make_constant(x), true);
    for (i64 i = 0; i < x.numel(); ++i) {
        const double expect = std::max(0.0, x.data[static_cast<std::size_t>(i)]);
        CHECK(out->value.data[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("residual block: stride-2 halves spatial dims") {
    ParamStore ps;
    Rng rng(2);
    ResidualBlock b = ResidualBlock::make(ps, "b", rng, 4, 8, 2, true);
    Tape t;
    Var out = b.forward(t, make_constant(rand_tensor(rng, {1, 4, 8, 8})), true);
    CHECK(out->value.shape == Shape{1, 8, 4, 4});
}

TEST_CASE("residual block: gradients through both branches match finite differences") {
    Rng seed_rng(3);
    Tensor x = rand_tensor(seed_rng, {1, 2, 4, 4}, 0.2, 1.0);
    ParamStore probe;
    Rng prng(4);
    ResidualBlock probe_block = ResidualBlock::make(probe, "b", prng, 2, 3, 2, true);
    std::vector<Tensor> point = probe.trainable_values();
    point.push_back(x);
    Tensor w = rand_tensor(seed_rng, {1, 3, 2, 2});

    GradFn fn = [w](Tape& t, const std::vector<Tensor>& p, bool g) {
        ParamStore ps;
        Rng dummy(0);
        ResidualBlock b = ResidualBlock::make(ps, "b", dummy, 2, 3, 2, true);
        std::vector<Var> vars;
        std::size_t i = 0;
        for (auto& e : ps.entries()) {
            if (!e.trainable) continue;
            e.var->value = p[i++];
            e.var->requires_grad = g;
            vars.push_back(e.var);
        }
        Var input = g ? make_parameter(p[i]) : make_constant(p[i]);
        vars.push_back(input);
        Var out = b.forward(t, input, true);
        return GradFnResult{ops::sum_all(t, ops::mul(t, out, make_constant(w))), vars};
    };
    auto res = grad_check(fn, point);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backbone: shape contract on the desk config") {
    BackboneConfig cfg;
    cfg.stage_widths = {16, 32};
    cfg.blocks_per_stage = {1, 1};
    cfg.out_channels = 20;
    cfg.out_h = 8;
    cfg.out_w = 8;
    ParamStore ps;
    Rng rng(5);
    Backbone bb = Backbone::make(ps, "backbone", rng, cfg);
    Tape t;
    Var out = bb.forward(t, make_constant(rand_tensor(rng, {2, 3, 32, 32}, 0.0, 1.0)), true);
    CHECK(out->value.shape == Shape{2, 20, 8, 8});
}

TEST_CASE("backbone: geometry error carries the stage-by-stage trace") {
    BackboneConfig cfg;
    cfg.stage_widths = {8, 8};
    cfg.blocks_per_stage = {1, 1};
    cfg.out_channels = 10;
    cfg.out_h = 8;
    cfg.out_w = 8;
    ParamStore ps;
    Rng rng(6);
    Backbone bb = Backbone::make(ps, "backbone", rng, cfg);
    Tape t;
    try {
        bb.forward(t, make_constant(Tensor::zeros({1, 3, 16, 16})), true);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("16x16 -> 8x8 -> 4x4") != std::string::npos);
    }
}

TEST_CASE("backbone: invalid configs rejected") {
    BackboneConfig cfg;
    cfg.out_channels = 21;  // not divisible by 5 classes
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.out_channels = 20;
    cfg.blocks_per_stage = {1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("backbone: batch of identical images gives identical feature rows") {
    BackboneConfig cfg;
    cfg.stage_widths = {4, 8};
    cfg.blocks_per_stage = {1, 1};
    cfg.out_channels = 10;
    cfg.out_h = 4;
    cfg.out_w = 4;
    ParamStore ps;
    Rng rng(7);
    Backbone bb = Backbone::make(ps, "backbone", rng, cfg);
    Rng irng(8);
    Tensor one = rand_tensor(irng, {1, 3, 16, 16}, 0.0, 1.0);
    Tensor two = Tensor::zeros({2, 3, 16, 16});
    std::copy(one.data.begin(), one.data.end(), two.data.begin());
    std::copy(one.data.begin(), one.data.end(), two.data.begin() + one.numel());
    Tape t;
    Var out = bb.forward(t, make_constant(two), /*training=*/false);
    const i64 half = out->value.numel() / 2;
    CHECK(std::memcmp(out->value.data.data(), out->value.data.data() + half,
                      static_cast<std::size_t>(half) * 8) == 0);
}

TEST_CASE("backbone: determinism and output shape over random valid configs") {
    Rng rng(9);
    for (int rep = 0; rep < 5; ++rep) {
        BackboneConfig cfg;
        const int stages = 1 + static_cast<int>(rng.uniform_int(2));
        cfg.stage_widths.clear();
        cfg.blocks_per_stage.clear();
        for (int s = 0; s < stages; ++s) {
            cfg.stage_widths.push_back(2 + rng.uniform_int(6));
            cfg.blocks_per_stage.push_back(1 + rng.uniform_int(2));
        }
        cfg.out_channels = 5 * (1 + rng.uniform_int(3));
        cfg.out_h = cfg.out_w = 2 + rng.uniform_int(3);
        const i64 input = cfg.out_h * cfg.downsample_factor();

        const std::uint64_t seed = rng.next_u64();
        auto build = [&]() {
            ParamStore ps;
            Rng r(seed);
            return Backbone::make(ps, "bb", r, cfg);
        };
        Backbone b1 = build();
        Backbone b2 = build();
        Tensor x = rand_tensor(rng, {1, 3, input, input}, 0.0, 1.0);
        Tape t1, t2;
        Var o1 = b1.forward(t1, make_constant(x), true);
        Var o2 = b2.forward(t2, make_constant(x), true);
        CHECK(o1->value.shape == Shape{1, cfg.out_channels, cfg.out_h, cfg.out_w});
        CHECK(std::memcmp(o1->value.data.data(), o2->value.data.data(),
                          o1->value.data.size() * 8) == 0);
    }
}

TEST_CASE("backbone: full-pipeline gradient check on the tiny config") {
    BackboneConfig cfg;
    cfg.stage_widths = {4, 8};
    cfg.blocks_per_stage = {1, 1};
    cfg.out_channels = 10;
    cfg.out_h = 2;
    cfg.out_w = 2;
    ParamStore probe;
    Rng prng(10);
    Backbone probe_bb = Backbone::make(probe, "bb", prng, cfg);
    std::vector<Tensor> point = probe.trainable_values();
    Rng irng(11);
    Tensor x = rand_tensor(irng, {1, 3, 8, 8}, 0.0, 1.0);
    Tensor w = rand_tensor(irng, {1, 10, 2, 2});

    GradFn fn = [cfg, x, w](Tape& t, const std::vector<Tensor>& p, bool g) {
        ParamStore ps;
        Rng dummy(0);
        Backbone bb = Backbone::make(ps, "bb", dummy, cfg);
        std::vector<Var> vars;
        std::size_t i = 0;
        for (auto& e : ps.entries()) {
            if (!e.trainable) continue;
            e.var->value = p[i++];
            e.var->requires_grad = g;
            vars.push_back(e.var);
        }
        Var out = bb.forward(t, make_constant(x), true);
        return GradFnResult{ops::sum_all(t, ops::mul(t, out, make_constant(w))), vars};
    };
    auto res = grad_check(fn, point);
    CHECK(res.max_rel_err < 1e-4);
}
