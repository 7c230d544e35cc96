#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bira/model.hpp"
#include "bira/optimizer.hpp"

namespace bira {

// A checkpoint is <base>.btns (model parameters, buffers, and optimizer
// velocities as `opt.<name>.v`) plus a <base>.json sidecar carrying the epoch
// counter, RNG stream states, and the model spec with its hash.
struct CheckpointMeta {
    int epoch = 0;
    std::string sampler_rng_state;
    std::string augment_rng_state;
    ModelSpec spec;
    std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& base, const Model& model,
                     const SgdOptimizer* opt, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
    std::vector<Tensor> velocities;  // empty when the checkpoint has none
};

// force: skip the config-hash integrity check on the sidecar.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& base, bool force = false);

}  // namespace bira
