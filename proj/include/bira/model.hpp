#pragma once

#include <string>

#include "bira/attention.hpp"
#include "bira/backbone.hpp"
#include "bira/bilinear.hpp"
#include "bira/loss.hpp"

namespace bira {

enum class VariantKind { resnet_only, bi_resnet, ra_net, bira_net };

std::string to_string(VariantKind k);
VariantKind variant_from_string(const std::string& s);
std::string to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

// Everything needed to rebuild a model byte-for-byte: the ablation variant,
// all width/spatial hyperparameters, the loss, and the init seed. Serialized
// into the checkpoint sidecar; its FNV-1a hash guards eval against mismatched
// flags.
struct ModelSpec {
    VariantKind variant = VariantKind::bira_net;
    BackboneConfig backbone;
    i64 attention_hidden1 = 0, attention_hidden2 = 0;  // 0 = channel-preserving
    bool attention_inverted = false;
    LossKind loss = LossKind::grading;
    i64 image_size = 64;
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& json_text);
    std::string config_hash() const;  // hex FNV-1a of the canonical JSON
};

struct Model {
    ModelSpec spec;
    ParamStore params;
    Backbone backbone;
    std::optional<AttentionNet> attention;
    std::optional<NetB> net_b;
    LinearLayer classifier;

    // images [N,3,S,S] -> logits [N,num_classes]
    Var forward(Tape& t, const Var& images, bool training) const;
    i64 num_classes() const { return spec.backbone.num_classes; }
};

Model build_model(const ModelSpec& spec);

}  // namespace bira
