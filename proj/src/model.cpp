#include "bira/model.hpp"

#include "bira/error.hpp"

#include "json.hpp"

namespace bira {

std::string to_string(VariantKind k) {
    switch (k) {
        case VariantKind::resnet_only: return "resnet_only";
        case VariantKind::bi_resnet: return "bi_resnet";
        case VariantKind::ra_net: return "ra_net";
        case VariantKind::bira_net: return "bira_net";
    }
    return "bira_net";
}

VariantKind variant_from_string(const std::string& s) {
    if (s == "resnet_only") return VariantKind::resnet_only;
    if (s == "bi_resnet") return VariantKind::bi_resnet;
    if (s == "ra_net") return VariantKind::ra_net;
    if (s == "bira_net") return VariantKind::bira_net;
    throw ConfigError("unknown model variant `" + s +
                      "` (expected resnet_only|bi_resnet|ra_net|bira_net)");
}

std::string to_string(LossKind k) {
    return k == LossKind::grading ? "grading" : "cross_entropy";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "grading") return LossKind::grading;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    throw ConfigError("unknown loss `" + s + "` (expected grading|cross_entropy)");
}

void ModelSpec::validate() const {
    backbone.validate();
    if (image_size < backbone.downsample_factor())
        throw ConfigError("model: image_size too small for the stage count");
    if ((attention_hidden1 == 0) != (attention_hidden2 == 0))
        throw ConfigError("model: attention hidden widths must both be set or both be zero");
}

std::string ModelSpec::to_json() const {
    nlohmann::json j;
    j["variant"] = to_string(variant);
    j["loss"] = bira::to_string(loss);
    j["image_size"] = image_size;
    j["seed"] = seed;
    j["attention_inverted"] = attention_inverted;
    j["attention_hidden"] = {attention_hidden1, attention_hidden2};
    nlohmann::json b;
    b["input_channels"] = backbone.input_channels;
    b["stage_widths"] = backbone.stage_widths;
    b["blocks_per_stage"] = backbone.blocks_per_stage;
    b["out_channels"] = backbone.out_channels;
    b["out_spatial"] = {backbone.out_h, backbone.out_w};
    b["use_batchnorm"] = backbone.use_batchnorm;
    b["num_classes"] = backbone.num_classes;
    j["backbone"] = b;
    return j.dump(2);
}

ModelSpec ModelSpec::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ModelSpec s;
    s.variant = variant_from_string(j.at("variant").get<std::string>());
    s.loss = loss_from_string(j.at("loss").get<std::string>());
    s.image_size = j.at("image_size").get<i64>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.attention_inverted = j.at("attention_inverted").get<bool>();
    s.attention_hidden1 = j.at("attention_hidden").at(0).get<i64>();
    s.attention_hidden2 = j.at("attention_hidden").at(1).get<i64>();
    const auto& b = j.at("backbone");
    s.backbone.input_channels = b.at("input_channels").get<i64>();
    s.backbone.stage_widths = b.at("stage_widths").get<std::vector<i64>>();
    s.backbone.blocks_per_stage = b.at("blocks_per_stage").get<std::vector<i64>>();
    s.backbone.out_channels = b.at("out_channels").get<i64>();
    s.backbone.out_h = b.at("out_spatial").at(0).get<i64>();
    s.backbone.out_w = b.at("out_spatial").at(1).get<i64>();
    s.backbone.use_batchnorm = b.at("use_batchnorm").get<bool>();
    s.backbone.num_classes = b.at("num_classes").get<i64>();
    s.validate();
    return s;
}

std::string ModelSpec::config_hash() const {
    const std::string canon = to_json();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : canon) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

Model build_model(const ModelSpec& spec) {
    spec.validate();
    Model m;
    m.spec = spec;
    Rng rng(child_seed(spec.seed, "init"));

    m.backbone = Backbone::make(m.params, "backbone", rng, spec.backbone);
    const i64 c = spec.backbone.out_channels;

    const bool wants_attention =
        spec.variant == VariantKind::ra_net || spec.variant == VariantKind::bira_net;
    const bool wants_bilinear =
        spec.variant == VariantKind::bi_resnet || spec.variant == VariantKind::bira_net;

    if (wants_attention) {
        AttentionConfig ac;
        ac.channels = c;
        if (spec.attention_hidden1 > 0) ac.hidden = {spec.attention_hidden1, spec.attention_hidden2};
        ac.inverted = spec.attention_inverted;
        m.attention = AttentionNet::make(m.params, "attention", rng, ac);
    }
    if (wants_bilinear) {
        BilinearConfig bc;
        bc.channels = c;
        bc.num_classes = spec.backbone.num_classes;
        bc.feature_h = spec.backbone.out_h;
        bc.feature_w = spec.backbone.out_w;
        m.net_b = NetB::make(m.params, "netb", rng, bc);
    }

    const i64 classifier_in = wants_bilinear ? c * c : c;
    m.classifier =
        LinearLayer::make(m.params, "classifier", rng, classifier_in, spec.backbone.num_classes);
    return m;
}

Var Model::forward(Tape& t, const Var& images, bool training) const {
    Var f = backbone.forward(t, images, training);
    switch (spec.variant) {
        case VariantKind::resnet_only: {
            Var pooled = ops::global_avg_pool(t, f);
            return classifier.forward(t, pooled);
        }
        case VariantKind::bi_resnet: {
            Var z = net_b->forward(t, f);
            return classifier.forward(t, bilinear_pool(t, z));
        }
        case VariantKind::ra_net: {
            Var x = attention->forward(t, f);
            return classifier.forward(t, x);
        }
        case VariantKind::bira_net: {
            Var x = attention->forward(t, f);
            Var y = net_b->forward(t, f);
            Var z = m_operator(t, x, y);
            return classifier.forward(t, bilinear_pool(t, z));
        }
    }
    throw ConfigError("model: unhandled variant");
}

}  // namespace bira
