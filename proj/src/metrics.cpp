#include "bira/metrics.hpp"

#include <fstream>

#include "bira/error.hpp"

#include "json.hpp"

namespace bira {

void ConfusionMatrix::update(int truth, int predicted) {
    if (truth < 0 || truth >= num_classes || predicted < 0 || predicted >= num_classes) {
        throw DomainError("confusion update out of range: truth " + std::to_string(truth) +
                          ", predicted " + std::to_string(predicted) + ", classes " +
                          std::to_string(num_classes));
    }
    ++counts[static_cast<std::size_t>(truth) * num_classes + predicted];
}

long ConfusionMatrix::total() const {
    long t = 0;
    for (long v : counts) t += v;
    return t;
}

long ConfusionMatrix::trace() const {
    long t = 0;
    for (int c = 0; c < num_classes; ++c) t += at(c, c);
    return t;
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes)
        throw ShapeError("confusion merge: class count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
}

MetricsResult compute_metrics(const ConfusionMatrix& cm, bool strict) {
    const int c = cm.num_classes;
    MetricsResult res;
    res.per_class_f1.assign(static_cast<std::size_t>(c), 0.0);

    std::vector<long> row_sum(static_cast<std::size_t>(c), 0), col_sum(static_cast<std::size_t>(c), 0);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
            row_sum[static_cast<std::size_t>(i)] += cm.at(i, j);
            col_sum[static_cast<std::size_t>(j)] += cm.at(i, j);
        }

    // ACA: mean of the diagonal of the row-normalized matrix
    double diag_acc = 0.0;
    int used_rows = 0;
    for (int i = 0; i < c; ++i) {
        if (row_sum[static_cast<std::size_t>(i)] == 0) {
            if (strict) throw DomainError("aca: class " + std::to_string(i) + " has no samples");
            res.empty_truth_rows.push_back(i);
            continue;
        }
        diag_acc += static_cast<double>(cm.at(i, i)) /
                    static_cast<double>(row_sum[static_cast<std::size_t>(i)]);
        ++used_rows;
    }
    res.aca = used_rows > 0 ? diag_acc / used_rows : 0.0;

    // per-class F1 with the 0-convention for degenerate precision/recall
    double f1_acc = 0.0;
    for (int i = 0; i < c; ++i) {
        const long tp = cm.at(i, i);
        const long rs = row_sum[static_cast<std::size_t>(i)];
        const long cs = col_sum[static_cast<std::size_t>(i)];
        double f1 = 0.0;
        if (rs == 0 && cs == 0) {
            res.degenerate_f1_classes.push_back(i);
        } else {
            const double precision = cs > 0 ? static_cast<double>(tp) / cs : 0.0;
            const double recall = rs > 0 ? static_cast<double>(tp) / rs : 0.0;
            if (precision + recall > 0.0) {
                f1 = 2.0 * precision * recall / (precision + recall);
            } else {
                res.degenerate_f1_classes.push_back(i);
            }
        }
        res.per_class_f1[static_cast<std::size_t>(i)] = f1;
        f1_acc += f1;
    }
    res.macro_f1 = f1_acc / c;

    const long total = cm.total();
    if (total == 0) throw DomainError("metrics: empty confusion matrix");
    // single-label multi-class: micro precision = micro recall = trace/total
    res.micro_f1 = static_cast<double>(cm.trace()) / static_cast<double>(total);
    return res;
}

double aca(const ConfusionMatrix& cm, bool strict) { return compute_metrics(cm, strict).aca; }
double macro_f1(const ConfusionMatrix& cm) { return compute_metrics(cm).macro_f1; }
double micro_f1(const ConfusionMatrix& cm) { return compute_metrics(cm).micro_f1; }

std::string metrics_to_json(const MetricsResult& m) {
    nlohmann::json j;
    j["aca"] = m.aca;
    j["macro_f1"] = m.macro_f1;
    j["micro_f1"] = m.micro_f1;
    j["per_class_f1"] = m.per_class_f1;
    return j.dump(2);
}

void write_metrics_json(const std::filesystem::path& path, const MetricsResult& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write metrics: " + path.string());
    out << metrics_to_json(m) << "\n";
}

void write_confusion_csv(const std::filesystem::path& counts_path,
                         const std::filesystem::path& normalized_path, const ConfusionMatrix& cm) {
    {
        std::ofstream out(counts_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write confusion counts: " + counts_path.string());
        for (int i = 0; i < cm.num_classes; ++i) {
            for (int j = 0; j < cm.num_classes; ++j) {
                if (j) out << ",";
                out << cm.at(i, j);
            }
            out << "\n";
        }
    }
    {
        std::ofstream out(normalized_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write normalized confusion: " + normalized_path.string());
        char buf[64];
        for (int i = 0; i < cm.num_classes; ++i) {
            long rs = 0;
            for (int j = 0; j < cm.num_classes; ++j) rs += cm.at(i, j);
            for (int j = 0; j < cm.num_classes; ++j) {
                if (j) out << ",";
                const double v = rs > 0 ? static_cast<double>(cm.at(i, j)) / rs : 0.0;
                std::snprintf(buf, sizeof(buf), "%.6f", v);
                out << buf;
            }
            out << "\n";
        }
    }
}

std::vector<double> smooth_window3(const std::vector<double>& xs) {
    std::vector<double> out(xs.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double acc = xs[i];
        int n = 1;
        if (i > 0) {
            acc += xs[i - 1];
            ++n;
        }
        if (i + 1 < xs.size()) {
            acc += xs[i + 1];
            ++n;
        }
        out[i] = acc / n;
    }
    return out;
}

}  // namespace bira
