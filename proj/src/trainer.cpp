#include "bira/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bira/error.hpp"
#include "bira/kernels.hpp"

#include "json.hpp"

namespace bira {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<int> predict_batch(const Model& model, const Tensor& images) {
    Tape tape;
    Var logits = model.forward(tape, make_constant(images), /*training=*/false);
    const i64 n = logits->value.shape[0];
    const i64 c = logits->value.shape[1];
    std::vector<int> preds(static_cast<std::size_t>(n));
    for (i64 i = 0; i < n; ++i) {
        preds[static_cast<std::size_t>(i)] =
            argmax_lowest(logits->value.data.data() + i * c, c);
    }
    return preds;
}

}  // namespace

EvalResult evaluate(const Model& model, const LoadedDataset& val, i64 batch_size) {
    if (val.size() == 0) throw DomainError("evaluate: empty validation manifest");
    EvalResult res;
    res.cm = ConfusionMatrix(static_cast<int>(model.num_classes()));
    const i64 n = static_cast<i64>(val.size());
    for (i64 start = 0; start < n; start += batch_size) {
        const i64 count = std::min(batch_size, n - start);
        std::vector<i64> idx(static_cast<std::size_t>(count));
        for (i64 i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = start + i;
        Tensor batch = make_batch(val, idx);
        std::vector<int> preds = predict_batch(model, batch);
        for (i64 i = 0; i < count; ++i) {
            res.cm.update(val.labels[static_cast<std::size_t>(start + i)],
                          preds[static_cast<std::size_t>(i)]);
        }
    }
    res.metrics = compute_metrics(res.cm);
    return res;
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write train log: " + path.string());
    out << "epoch,train_loss,val_aca,val_macro_f1,val_micro_f1\n";
    for (const auto& r : log) {
        out << r.epoch << "," << fmt_double(r.train_loss) << "," << fmt_double(r.val_aca) << ","
            << fmt_double(r.val_macro_f1) << "," << fmt_double(r.val_micro_f1) << "\n";
    }
}

std::vector<EpochRecord> read_train_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open train log: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "epoch,train_loss,val_aca,val_macro_f1,val_micro_f1")
        throw IoError("bad train log header in " + path.string());
    std::vector<EpochRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochRecord r;
        std::istringstream is(line);
        char comma;
        is >> r.epoch >> comma >> r.train_loss >> comma >> r.val_aca >> comma >> r.val_macro_f1 >>
            comma >> r.val_micro_f1;
        out.push_back(r);
    }
    return out;
}

TrainResult train(Model& model, const LoadedDataset& train_ds, const LoadedDataset& val_ds,
                  const TrainConfig& cfg) {
    if (train_ds.size() == 0) throw DomainError("train: empty training manifest");
    SgdOptimizer opt(model.params, cfg.sgd);
    WeightedSampler sampler(train_ds.manifest);

    const i64 n_train = static_cast<i64>(train_ds.size());
    const i64 steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;

    std::ofstream diag;
    if (cfg.out_dir) {
        std::filesystem::create_directories(*cfg.out_dir);
        diag.open(*cfg.out_dir / "diagnostics.csv", std::ios::binary | std::ios::trunc);
        diag << "epoch,div_guard_hits,norm_guard_hits\n";
    }

    TrainResult result;
    Rng sampler_rng(0), augment_rng(0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // streams restart each epoch: identical batch/augment sequences per
        // epoch, which makes the lr=0 control exactly flat
        sampler_rng = Rng(child_seed(cfg.seed, "sampler"));
        augment_rng = Rng(child_seed(cfg.seed, "augment"));
        const long guard_before = kernels::total_guard_hits();
        const long div_before = kernels::div_guard_hits().load();
        const long norm_before = kernels::norm_guard_hits().load();

        double loss_acc = 0.0;
        for (i64 step = 0; step < steps_per_epoch; ++step) {
            std::vector<i64> idx(static_cast<std::size_t>(cfg.batch_size));
            for (i64 b = 0; b < cfg.batch_size; ++b)
                idx[static_cast<std::size_t>(b)] = sampler.next(sampler_rng);

            // draw augmentations sequentially, apply them in parallel
            std::vector<AugmentDraw> draws(static_cast<std::size_t>(cfg.batch_size));
            for (auto& d : draws) d = draw_augment(augment_rng);
            std::vector<Image> augmented(static_cast<std::size_t>(cfg.batch_size));
            kernels::parallel_for(cfg.batch_size, [&](i64 b) {
                augmented[static_cast<std::size_t>(b)] =
                    augment(train_ds.images[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])],
                            draws[static_cast<std::size_t>(b)], train_ds.standardized_black);
            });
            Tensor batch = make_batch(train_ds, idx, &augmented);
            std::vector<int> labels(static_cast<std::size_t>(cfg.batch_size));
            for (i64 b = 0; b < cfg.batch_size; ++b)
                labels[static_cast<std::size_t>(b)] =
                    train_ds.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];

            Tape tape;
            Var logits = model.forward(tape, make_constant(batch), /*training=*/true);
            Var loss = make_loss(tape, model.spec.loss, logits, labels, Reduction::mean);
            const double loss_value = loss->value.data[0];
            if (!std::isfinite(loss_value)) {
                throw DomainError("train: non-finite loss " + std::to_string(loss_value) +
                                  " at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(step));
            }
            loss_acc += loss_value;
            model.params.zero_grad();
            tape.backward(loss);
            opt.step();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_acc / static_cast<double>(steps_per_epoch);
        EvalResult ev = evaluate(model, val_ds, cfg.batch_size);
        rec.val_aca = ev.metrics.aca;
        rec.val_macro_f1 = ev.metrics.macro_f1;
        rec.val_micro_f1 = ev.metrics.micro_f1;
        rec.guard_hits = kernels::total_guard_hits() - guard_before;
        result.log.push_back(rec);
        result.final_eval = std::move(ev);
        result.epochs_run = epoch;

        if (diag.is_open()) {
            diag << epoch << "," << (kernels::div_guard_hits().load() - div_before) << ","
                 << (kernels::norm_guard_hits().load() - norm_before) << "\n";
        }
        if (cfg.out_dir && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
            epoch != cfg.epochs) {
            CheckpointMeta meta{epoch, sampler_rng.state_string(), augment_rng.state_string(),
                                model.spec, model.spec.config_hash()};
            save_checkpoint(*cfg.out_dir / ("checkpoint_epoch" + std::to_string(epoch)), model,
                            &opt, meta);
        }
        if (cfg.early_stop_aca > 0.0 && rec.val_aca >= cfg.early_stop_aca) {
            result.early_stopped = true;
            break;
        }
    }

    if (cfg.out_dir) {
        write_train_log(*cfg.out_dir / "train_log.csv", result.log);
        CheckpointMeta meta{result.epochs_run, sampler_rng.state_string(),
                            augment_rng.state_string(), model.spec, model.spec.config_hash()};
        save_checkpoint(*cfg.out_dir / "checkpoint_final", model, &opt, meta);
        write_metrics_json(*cfg.out_dir / "metrics.json", result.final_eval.metrics);
        write_confusion_csv(*cfg.out_dir / "confusion_counts.csv",
                            *cfg.out_dir / "confusion_normalized.csv", result.final_eval.cm);
    }
    return result;
}

CompareResult convergence_compare(const ModelSpec& spec, const LoadedDataset& train_ds,
                                  const LoadedDataset& val_ds, const TrainConfig& cfg,
                                  double aca_threshold) {
    CompareResult res;
    res.aca_threshold = aca_threshold;
    for (LossKind kind : {LossKind::grading, LossKind::cross_entropy}) {
        ModelSpec arm_spec = spec;
        arm_spec.loss = kind;  // identical seed => identical initial parameters
        Model model = build_model(arm_spec);
        TrainConfig arm_cfg = cfg;
        arm_cfg.out_dir.reset();
        arm_cfg.early_stop_aca = 0.0;  // equal epoch counts in both arms
        TrainResult tr = train(model, train_ds, val_ds, arm_cfg);

        CompareArm arm;
        arm.loss = kind;
        arm.log = tr.log;
        for (const auto& r : tr.log) {
            if (r.val_aca >= aca_threshold) {
                arm.epochs_to_threshold = r.epoch;
                break;
            }
        }
        std::vector<double> losses;
        for (const auto& r : tr.log) losses.push_back(r.train_loss);
        std::vector<double> sm = smooth_window3(losses);
        arm.smoothed_loss_monotone = true;
        for (std::size_t i = 1; i < sm.size(); ++i) {
            if (sm[i] > sm[i - 1]) arm.smoothed_loss_monotone = false;
        }
        (kind == LossKind::grading ? res.grading : res.cross_entropy) = std::move(arm);
    }

    std::ostringstream finding;
    auto describe = [&](const CompareArm& a) {
        return a.epochs_to_threshold > 0 ? "epoch " + std::to_string(a.epochs_to_threshold)
                                         : std::string("not reached");
    };
    finding << "grading loss reached ACA " << aca_threshold << " at "
            << describe(res.grading) << "; cross-entropy at " << describe(res.cross_entropy);
    if (res.grading.epochs_to_threshold > 0 &&
        (res.cross_entropy.epochs_to_threshold < 0 ||
         res.grading.epochs_to_threshold < res.cross_entropy.epochs_to_threshold)) {
        finding << " (grading converged earlier)";
    } else if (res.grading.epochs_to_threshold == res.cross_entropy.epochs_to_threshold) {
        finding << " (no difference at this granularity)";
    } else {
        finding << " (cross-entropy converged earlier)";
    }
    res.finding = finding.str();
    return res;
}

void write_compare_report(const std::filesystem::path& dir, const CompareResult& res) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "compare_loss.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write compare_loss.csv in " + dir.string());
        out << "arm,epoch,train_loss,val_aca,val_macro_f1,val_micro_f1\n";
        for (const CompareArm* arm : {&res.grading, &res.cross_entropy}) {
            const std::string name = to_string(arm->loss);
            for (const auto& r : arm->log) {
                out << name << "," << r.epoch << "," << fmt_double(r.train_loss) << ","
                    << fmt_double(r.val_aca) << "," << fmt_double(r.val_macro_f1) << ","
                    << fmt_double(r.val_micro_f1) << "\n";
            }
        }
    }
    nlohmann::json j;
    j["aca_threshold"] = res.aca_threshold;
    for (const CompareArm* arm : {&res.grading, &res.cross_entropy}) {
        nlohmann::json a;
        a["epochs_to_threshold"] = arm->epochs_to_threshold;
        a["reached"] = arm->epochs_to_threshold > 0;
        a["epochs"] = arm->log.size();
        a["smoothed_loss_monotone_nonincreasing"] = arm->smoothed_loss_monotone;
        j["arms"][to_string(arm->loss)] = a;
    }
    j["finding"] = res.finding;
    std::ofstream out(dir / "compare_loss.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write compare_loss.json in " + dir.string());
    out << j.dump(2) << "\n";
}

}  // namespace bira
