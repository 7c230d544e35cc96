#pragma once

#include <filesystem>
#include <optional>

#include "bira/checkpoint.hpp"
#include "bira/dataset.hpp"
#include "bira/metrics.hpp"
#include "bira/model.hpp"

namespace bira {

struct TrainConfig {
    int epochs = 10;
    i64 batch_size = 16;
    SgdConfig sgd;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;       // epochs; 0 = final only
    double early_stop_aca = 0.0;    // 0 = disabled
    std::optional<std::filesystem::path> out_dir;  // run artifacts, when set
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_aca = 0.0;
    double val_macro_f1 = 0.0;
    double val_micro_f1 = 0.0;
    long guard_hits = 0;  // ε-guard activations during the epoch (diagnostics)
};

struct EvalResult {
    ConfusionMatrix cm;
    MetricsResult metrics;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    EvalResult final_eval;
    int epochs_run = 0;
    bool early_stopped = false;
};

EvalResult evaluate(const Model& model, const LoadedDataset& val, i64 batch_size = 16);

// SGD training per the run config. Deterministic given the seed: the sampler
// and augmentation streams restart from their derived seeds at every epoch,
// so an lr=0 run logs an exactly constant train loss. When out_dir is set,
// writes train_log.csv, diagnostics.csv, checkpoints, metrics.json and the
// confusion CSVs there.
TrainResult train(Model& model, const LoadedDataset& train_ds, const LoadedDataset& val_ds,
                  const TrainConfig& cfg);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);
std::vector<EpochRecord> read_train_log(const std::filesystem::path& path);

struct CompareArm {
    LossKind loss;
    std::vector<EpochRecord> log;
    int epochs_to_threshold = -1;  // -1 = never reached
    bool smoothed_loss_monotone = false;
};

struct CompareResult {
    double aca_threshold = 0.6;
    CompareArm grading;
    CompareArm cross_entropy;
    std::string finding;
};

// Two runs identical except for the loss, from identical initial parameters.
CompareResult convergence_compare(const ModelSpec& spec, const LoadedDataset& train_ds,
                                  const LoadedDataset& val_ds, const TrainConfig& cfg,
                                  double aca_threshold);

void write_compare_report(const std::filesystem::path& dir, const CompareResult& res);

}  // namespace bira
