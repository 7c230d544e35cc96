#include "bira/checkpoint.hpp"

#include <fstream>

#include "bira/error.hpp"

#include "json.hpp"

namespace bira {

void save_checkpoint(const std::filesystem::path& base, const Model& model,
                     const SgdOptimizer* opt, const CheckpointMeta& meta) {
    NamedTensors tensors = model.params.to_named_tensors();
    if (opt) {
        auto vels = opt->velocities();
        std::size_t vi = 0;
        for (const auto& e : model.params.entries()) {
            if (!e.trainable) continue;
            tensors.emplace_back("opt." + e.name + ".v", vels[vi++]);
        }
    }
    write_named_tensors(base.string() + ".btns", tensors);

    nlohmann::json j;
    j["epoch"] = meta.epoch;
    j["rng"] = {{"sampler", meta.sampler_rng_state}, {"augment", meta.augment_rng_state}};
    j["config"] = nlohmann::json::parse(meta.spec.to_json());
    j["config_hash"] = meta.spec.config_hash();
    std::ofstream out(base.string() + ".json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint sidecar: " + base.string() + ".json");
    out << j.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& base, bool force) {
    std::ifstream in(base.string() + ".json");
    if (!in) throw IoError("cannot open checkpoint sidecar: " + base.string() + ".json");
    nlohmann::json j;
    in >> j;

    LoadedCheckpoint lc{build_model(ModelSpec::from_json(j.at("config").dump())), {}, {}};
    lc.meta.epoch = j.at("epoch").get<int>();
    lc.meta.sampler_rng_state = j.at("rng").at("sampler").get<std::string>();
    lc.meta.augment_rng_state = j.at("rng").at("augment").get<std::string>();
    lc.meta.spec = lc.model.spec;
    lc.meta.config_hash = j.at("config_hash").get<std::string>();
    if (!force && lc.meta.config_hash != lc.meta.spec.config_hash()) {
        throw ConfigError("checkpoint config hash mismatch for " + base.string() +
                          " (use --force to override)");
    }

    NamedTensors tensors = read_named_tensors(base.string() + ".btns");
    NamedTensors params;
    NamedTensors vels;
    for (auto& [name, t] : tensors) {
        if (name.rfind("opt.", 0) == 0) {
            vels.emplace_back(name, std::move(t));
        } else {
            params.emplace_back(name, std::move(t));
        }
    }
    lc.model.params.load_named_tensors(params);
    for (const auto& e : lc.model.params.entries()) {
        if (!e.trainable) continue;
        const std::string key = "opt." + e.name + ".v";
        for (auto& [name, t] : vels) {
            if (name == key) {
                lc.velocities.push_back(t);
                break;
            }
        }
    }
    if (!lc.velocities.empty() && lc.velocities.size() != lc.model.params.trainable_count())
        throw IoError("checkpoint has incomplete optimizer state: " + base.string());
    return lc;
}

}  // namespace bira
