// Serial reference vs OpenMP parallel path: outputs must be bitwise equal
// because both run the same per-output bodies in the same per-element order.

#include <cstring>

#include "doctest.h"

#include "bira/kernels.hpp"
#include "bira/loss.hpp"
#include "bira/model.hpp"
#include "bira/rng.hpp"

using namespace bira;

namespace {

std::vector<double> rand_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * 8) == 0;
}

}  // namespace

TEST_CASE("gemm serial and parallel modes agree bitwise for all transposes") {
    Rng rng(101);
    const i64 m = 17, n = 13, k = 9;
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            auto a = rand_vec(rng, static_cast<std::size_t>(m * k));
            auto b = rand_vec(rng, static_cast<std::size_t>(k * n));
            std::vector<double> cs(static_cast<std::size_t>(m * n)), cp(cs.size());
            {
                kernels::ExecModeGuard g(kernels::ExecMode::serial);
                kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), cs.data(), false);
            }
            {
                kernels::ExecModeGuard g(kernels::ExecMode::parallel);
                kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), cp.data(), false);
            }
            CHECK(bitwise_equal(cs, cp));
        }
    }
}

TEST_CASE("conv2d kernels agree bitwise across exec modes") {
    Rng rng(202);
    kernels::Conv2dDims d;
    d.n = 3;
    d.c_in = 4;
    d.h = 9;
    d.w = 7;
    d.c_out = 5;
    d.kh = 3;
    d.kw = 3;
    d.stride = 2;
    d.pad = 1;
    d.h_out = (d.h + 2 * d.pad - d.kh) / d.stride + 1;
    d.w_out = (d.w + 2 * d.pad - d.kw) / d.stride + 1;

    auto in = rand_vec(rng, static_cast<std::size_t>(d.n * d.c_in * d.h * d.w));
    auto ker = rand_vec(rng, static_cast<std::size_t>(d.c_out * d.c_in * d.kh * d.kw));
    auto dout = rand_vec(rng, static_cast<std::size_t>(d.n * d.c_out * d.h_out * d.w_out));

    std::vector<double> out_s(dout.size()), out_p(dout.size());
    std::vector<double> din_s(in.size(), 0.0), din_p(in.size(), 0.0);
    std::vector<double> dker_s(ker.size(), 0.0), dker_p(ker.size(), 0.0);
    {
        kernels::ExecModeGuard g(kernels::ExecMode::serial);
        kernels::conv2d_forward(in.data(), ker.data(), out_s.data(), d);
        kernels::conv2d_backward_input(ker.data(), dout.data(), din_s.data(), d);
        kernels::conv2d_backward_kernel(in.data(), dout.data(), dker_s.data(), d);
    }
    {
        kernels::ExecModeGuard g(kernels::ExecMode::parallel);
        kernels::conv2d_forward(in.data(), ker.data(), out_p.data(), d);
        kernels::conv2d_backward_input(ker.data(), dout.data(), din_p.data(), d);
        kernels::conv2d_backward_kernel(in.data(), dout.data(), dker_p.data(), d);
    }
    CHECK(bitwise_equal(out_s, out_p));
    CHECK(bitwise_equal(din_s, din_p));
    CHECK(bitwise_equal(dker_s, dker_p));
}

TEST_CASE("full model forward+backward is bitwise identical across exec modes") {
    ModelSpec spec;
    spec.variant = VariantKind::bira_net;
    spec.backbone.stage_widths = {4, 6};
    spec.backbone.blocks_per_stage = {1, 1};
    spec.backbone.out_channels = 10;
    spec.backbone.out_h = 2;
    spec.backbone.out_w = 2;
    spec.image_size = 8;
    spec.seed = 77;

    Rng rng(303);
    Tensor images = Tensor::zeros({2, 3, 8, 8});
    for (auto& v : images.data) v = rng.uniform(0.0, 1.0);
    std::vector<int> labels = {1, 4};

    auto run = [&](kernels::ExecMode mode) {
        kernels::ExecModeGuard g(mode);
        Model m = build_model(spec);
        Tape tape;
        Var logits = m.forward(tape, make_constant(images), true);
        Var loss = grading_loss(tape, logits, labels);
        m.params.zero_grad();
        tape.backward(loss);
        std::vector<double> flat;
        flat.push_back(loss->value.data[0]);
        for (const auto& e : m.params.entries()) {
            if (!e.trainable) continue;
            flat.insert(flat.end(), e.var->grad.begin(), e.var->grad.end());
        }
        return flat;
    };
    CHECK(bitwise_equal(run(kernels::ExecMode::serial), run(kernels::ExecMode::parallel)));
}
