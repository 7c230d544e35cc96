// bira: synthetic-data generation, training, evaluation, gradient checking
// and the grading-vs-cross-entropy convergence comparison.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "bira/checkpoint.hpp"
#include "bira/gradsuite.hpp"
#include "bira/kernels.hpp"
#include "bira/synth.hpp"
#include "bira/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flat key/value run configuration; JSON config file first, flags override.
struct RunConfig {
    std::string data_dir;
    std::string out_dir;
    std::string checkpoint;
    std::uint64_t seed = 1;
    std::string variant = "bira_net";
    std::string loss = "grading";
    int image_size = 64;
    int gen_size = 64;
    int per_class = 50;
    int per_class_val = 10;
    int epochs = 10;
    int batch_size = 16;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-7;
    bool attention_inverted = false;
    std::vector<int> stage_widths = {16, 32, 64};
    std::vector<int> blocks_per_stage = {1, 1, 1};
    int k_maps = 4;  // attention maps per class; out_channels = k_maps * 5
    bool no_batchnorm = false;
    int checkpoint_every = 0;
    double early_stop_aca = 0.0;
    double aca_threshold = 0.6;
    std::string scope = "ops";
    int threads = 0;
    bool force = false;
};

const std::set<std::string> kConfigKeys = {
    "data_dir", "out_dir", "checkpoint", "seed", "variant", "loss", "image_size",
    "gen_size", "per_class", "per_class_val", "epochs", "batch_size", "lr", "momentum",
    "weight_decay", "attention_inverted", "stage_widths", "blocks_per_stage", "k_maps",
    "no_batchnorm", "checkpoint_every", "early_stop_aca", "aca_threshold", "scope", "threads"};

void apply_config_file(const fs::path& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw bira::IoError("cannot open config file: " + path.string());
    json j;
    in >> j;
    for (const auto& [key, value] : j.items()) {
        if (!kConfigKeys.count(key))
            throw bira::ConfigError("unknown config key `" + key + "` in " + path.string());
        if (key == "data_dir") cfg.data_dir = value.get<std::string>();
        else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
        else if (key == "checkpoint") cfg.checkpoint = value.get<std::string>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "variant") cfg.variant = value.get<std::string>();
        else if (key == "loss") cfg.loss = value.get<std::string>();
        else if (key == "image_size") cfg.image_size = value.get<int>();
        else if (key == "gen_size") cfg.gen_size = value.get<int>();
        else if (key == "per_class") cfg.per_class = value.get<int>();
        else if (key == "per_class_val") cfg.per_class_val = value.get<int>();
        else if (key == "epochs") cfg.epochs = value.get<int>();
        else if (key == "batch_size") cfg.batch_size = value.get<int>();
        else if (key == "lr") cfg.lr = value.get<double>();
        else if (key == "momentum") cfg.momentum = value.get<double>();
        else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
        else if (key == "attention_inverted") cfg.attention_inverted = value.get<bool>();
        else if (key == "stage_widths") cfg.stage_widths = value.get<std::vector<int>>();
        else if (key == "blocks_per_stage") cfg.blocks_per_stage = value.get<std::vector<int>>();
        else if (key == "k_maps") cfg.k_maps = value.get<int>();
        else if (key == "no_batchnorm") cfg.no_batchnorm = value.get<bool>();
        else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<int>();
        else if (key == "early_stop_aca") cfg.early_stop_aca = value.get<double>();
        else if (key == "aca_threshold") cfg.aca_threshold = value.get<double>();
        else if (key == "scope") cfg.scope = value.get<std::string>();
        else if (key == "threads") cfg.threads = value.get<int>();
    }
}

json config_to_json(const RunConfig& cfg, const std::string& command) {
    json j;
    j["command"] = command;
    j["data_dir"] = cfg.data_dir;
    j["out_dir"] = cfg.out_dir;
    j["checkpoint"] = cfg.checkpoint;
    j["seed"] = cfg.seed;
    j["variant"] = cfg.variant;
    j["loss"] = cfg.loss;
    j["image_size"] = cfg.image_size;
    j["gen_size"] = cfg.gen_size;
    j["per_class"] = cfg.per_class;
    j["per_class_val"] = cfg.per_class_val;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["momentum"] = cfg.momentum;
    j["weight_decay"] = cfg.weight_decay;
    j["attention_inverted"] = cfg.attention_inverted;
    j["stage_widths"] = cfg.stage_widths;
    j["blocks_per_stage"] = cfg.blocks_per_stage;
    j["k_maps"] = cfg.k_maps;
    j["no_batchnorm"] = cfg.no_batchnorm;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["early_stop_aca"] = cfg.early_stop_aca;
    j["aca_threshold"] = cfg.aca_threshold;
    return j;
}

void echo_config(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
    fs::create_directories(dir);
    std::ofstream out(dir / "effective_config.json", std::ios::binary | std::ios::trunc);
    if (!out) throw bira::IoError("cannot write effective_config.json in " + dir.string());
    out << config_to_json(cfg, command).dump(2) << "\n";
}

bira::ModelSpec model_spec_from(const RunConfig& cfg) {
    bira::ModelSpec spec;
    spec.variant = bira::variant_from_string(cfg.variant);
    spec.loss = bira::loss_from_string(cfg.loss);
    spec.image_size = cfg.image_size;
    spec.seed = cfg.seed;
    spec.attention_inverted = cfg.attention_inverted;
    spec.backbone.stage_widths.assign(cfg.stage_widths.begin(), cfg.stage_widths.end());
    spec.backbone.blocks_per_stage.assign(cfg.blocks_per_stage.begin(),
                                          cfg.blocks_per_stage.end());
    spec.backbone.out_channels = static_cast<bira::i64>(cfg.k_maps) * 5;
    spec.backbone.num_classes = 5;
    spec.backbone.use_batchnorm = !cfg.no_batchnorm;
    const bira::i64 factor = spec.backbone.downsample_factor();
    if (cfg.image_size % factor != 0)
        throw bira::ConfigError("image_size " + std::to_string(cfg.image_size) +
                                " is not divisible by the backbone downsample factor " +
                                std::to_string(factor));
    spec.backbone.out_h = cfg.image_size / factor;
    spec.backbone.out_w = cfg.image_size / factor;
    spec.validate();
    return spec;
}

int cmd_gen_data(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw bira::ConfigError("gen-data requires --out");
    if (cfg.per_class < 1) throw bira::ConfigError("gen-data: --per-class must be >= 1");
    bira::GenConfig gen;
    gen.seed = cfg.seed;
    gen.per_class_train = cfg.per_class;
    gen.per_class_val = cfg.per_class_val;
    gen.image_size = cfg.gen_size;
    bira::GenSummary s = bira::generate_dataset(gen, cfg.out_dir);
    echo_config(cfg.out_dir, cfg, "gen-data");
    std::printf("wrote %d train + %d val images per class at %dx%d to %s\n", cfg.per_class,
                cfg.per_class_val, cfg.gen_size, cfg.gen_size, cfg.out_dir.c_str());
    std::printf("pixel_mean=%.6f pixel_std=%.6f\n", s.pixel_mean, s.pixel_std);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.data_dir.empty() || cfg.out_dir.empty())
        throw bira::ConfigError("train requires --data and --out");
    bira::ModelSpec spec = model_spec_from(cfg);
    bira::LoadedDataset train_ds = bira::load_dataset(cfg.data_dir, "train", cfg.image_size);
    bira::LoadedDataset val_ds = bira::load_dataset(cfg.data_dir, "val", cfg.image_size);

    bira::Model model = bira::build_model(spec);
    bira::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.sgd = {cfg.lr, cfg.momentum, cfg.weight_decay};
    tc.seed = cfg.seed;
    tc.checkpoint_every = cfg.checkpoint_every;
    tc.early_stop_aca = cfg.early_stop_aca;
    tc.out_dir = fs::path(cfg.out_dir);
    echo_config(cfg.out_dir, cfg, "train");

    bira::TrainResult res = bira::train(model, train_ds, val_ds, tc);
    for (const auto& r : res.log) {
        std::printf("epoch %d: train_loss=%.6f val_aca=%.4f val_macro_f1=%.4f val_micro_f1=%.4f "
                    "eps_guard_hits=%ld\n",
                    r.epoch, r.train_loss, r.val_aca, r.val_macro_f1, r.val_micro_f1,
                    r.guard_hits);
    }
    std::printf("final metrics: %s\n", bira::metrics_to_json(res.final_eval.metrics).c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty() || cfg.data_dir.empty())
        throw bira::ConfigError("eval requires --checkpoint and --data");
    bira::LoadedCheckpoint lc = bira::load_checkpoint(cfg.checkpoint, cfg.force);
    bira::LoadedDataset val_ds =
        bira::load_dataset(cfg.data_dir, "val", static_cast<int>(lc.model.spec.image_size));
    bira::EvalResult res = bira::evaluate(lc.model, val_ds, cfg.batch_size);
    const std::string metrics = bira::metrics_to_json(res.metrics);
    std::printf("%s\n", metrics.c_str());
    const fs::path out = cfg.out_dir.empty() ? fs::path(cfg.checkpoint).parent_path()
                                             : fs::path(cfg.out_dir);
    fs::create_directories(out);
    bira::write_metrics_json(out / "eval_metrics.json", res.metrics);
    bira::write_confusion_csv(out / "eval_confusion_counts.csv",
                              out / "eval_confusion_normalized.csv", res.cm);
    return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
    std::vector<std::string> scopes;
    if (cfg.scope == "all") scopes = bira::grad_suite_scopes();
    else scopes = {cfg.scope};
    bool ok = true;
    std::printf("%-28s %14s %10s  %s\n", "check", "worst_rel_err", "tolerance", "status");
    for (const auto& scope : scopes) {
        for (const auto& e : bira::grad_suite(scope, cfg.seed)) {
            std::printf("%-28s %14.3e %10.0e  %s\n", e.name.c_str(), e.worst_rel_err, e.tolerance,
                        e.passed() ? "ok" : "FAIL");
            ok = ok && e.passed();
        }
    }
    return ok ? 0 : 2;
}

int cmd_compare_loss(const RunConfig& cfg) {
    if (cfg.data_dir.empty() || cfg.out_dir.empty())
        throw bira::ConfigError("compare-loss requires --data and --out");
    bira::ModelSpec spec = model_spec_from(cfg);
    bira::LoadedDataset train_ds = bira::load_dataset(cfg.data_dir, "train", cfg.image_size);
    bira::LoadedDataset val_ds = bira::load_dataset(cfg.data_dir, "val", cfg.image_size);
    bira::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.sgd = {cfg.lr, cfg.momentum, cfg.weight_decay};
    tc.seed = cfg.seed;
    echo_config(cfg.out_dir, cfg, "compare-loss");
    bira::CompareResult res =
        bira::convergence_compare(spec, train_ds, val_ds, tc, cfg.aca_threshold);
    bira::write_compare_report(cfg.out_dir, res);
    std::printf("%s\n", res.finding.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    // config file first (two-pass), CLI flags override
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(argv[i + 1], cfg);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return 1;
            }
        }
    }

    CLI::App app{"BiRA-Net style attention + bilinear DR grading at desk scale"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override its keys)");

    auto add_common = [&cfg](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "master RNG seed");
        sub->add_option("--threads", cfg.threads, "OpenMP thread count (0 = default)");
        sub->add_option("--config", [](const std::vector<std::string>&) { return true; },
                        "JSON config file (applied before flags)");
    };
    auto add_model_flags = [&cfg](CLI::App* sub) {
        sub->add_option("--variant", cfg.variant, "resnet_only|bi_resnet|ra_net|bira_net");
        sub->add_option("--loss", cfg.loss, "grading|cross_entropy");
        sub->add_option("--image-size", cfg.image_size, "model input size");
        sub->add_option("--batch", cfg.batch_size, "batch size");
        sub->add_option("--lr", cfg.lr, "learning rate");
        sub->add_option("--momentum", cfg.momentum, "SGD momentum");
        sub->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay factor");
        sub->add_flag("--attention-inverted", cfg.attention_inverted,
                      "compute GAP(A*F)/GAP(A) instead of the printed equation");
        sub->add_option("--stage-widths", cfg.stage_widths, "backbone stage widths");
        sub->add_option("--blocks-per-stage", cfg.blocks_per_stage, "residual blocks per stage");
        sub->add_option("--k-maps", cfg.k_maps, "attention maps per class");
        sub->add_flag("--no-batchnorm", cfg.no_batchnorm, "disable batch normalization");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic ordinal dataset");
    gen->add_option("--out", cfg.out_dir, "output dataset directory")->required();
    gen->add_option("--per-class", cfg.per_class, "training images per class");
    gen->add_option("--per-class-val", cfg.per_class_val, "validation images per class");
    gen->add_option("--size", cfg.gen_size, "generated image size");
    add_common(gen);

    CLI::App* train = app.add_subcommand("train", "train a model variant");
    train->add_option("--data", cfg.data_dir, "dataset directory")->required();
    train->add_option("--out", cfg.out_dir, "run output directory")->required();
    train->add_option("--epochs", cfg.epochs, "epoch budget");
    train->add_option("--checkpoint-every", cfg.checkpoint_every,
                      "checkpoint cadence in epochs (0 = final only)");
    train->add_option("--early-stop-aca", cfg.early_stop_aca,
                      "stop when validation ACA reaches this (0 = off)");
    add_model_flags(train);
    add_common(train);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", cfg.checkpoint, "checkpoint base path (no extension)")
        ->required();
    eval->add_option("--data", cfg.data_dir, "dataset directory")->required();
    eval->add_option("--out", cfg.out_dir, "output directory (default: checkpoint directory)");
    eval->add_option("--batch", cfg.batch_size, "batch size");
    eval->add_flag("--force", cfg.force, "skip the config-hash check");
    add_common(eval);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient report");
    gradcheck->add_option("--scope", cfg.scope, "ops|attention|bilinear|loss|full|all");
    add_common(gradcheck);

    CLI::App* compare = app.add_subcommand("compare-loss",
                                           "grading vs cross-entropy convergence comparison");
    compare->add_option("--data", cfg.data_dir, "dataset directory")->required();
    compare->add_option("--out", cfg.out_dir, "report output directory")->required();
    compare->add_option("--epochs", cfg.epochs, "epoch budget per arm");
    compare->add_option("--aca-threshold", cfg.aca_threshold, "target validation ACA");
    add_model_flags(compare);
    add_common(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        bira::kernels::set_num_threads(cfg.threads);
        if (gen->parsed()) return cmd_gen_data(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (eval->parsed()) return cmd_eval(cfg);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg);
        if (compare->parsed()) return cmd_compare_loss(cfg);
    } catch (const bira::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
