#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bira/tensor.hpp"

namespace bira {

// C x C count grid; rows are ground truth, columns are predictions.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long> counts;  // row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    void update(int truth, int predicted);
    long at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
    }
    long total() const;
    long trace() const;
    ConfusionMatrix& merge(const ConfusionMatrix& other);  // elementwise add
    bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsResult {
    double aca = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<double> per_class_f1;
    std::vector<int> empty_truth_rows;      // classes excluded from ACA
    std::vector<int> degenerate_f1_classes; // classes where the 0-convention fired
};

// strict: throw DomainError on an empty truth row instead of excluding it.
MetricsResult compute_metrics(const ConfusionMatrix& cm, bool strict = false);

double aca(const ConfusionMatrix& cm, bool strict = false);
double macro_f1(const ConfusionMatrix& cm);
double micro_f1(const ConfusionMatrix& cm);

std::string metrics_to_json(const MetricsResult& m);
void write_metrics_json(const std::filesystem::path& path, const MetricsResult& m);
void write_confusion_csv(const std::filesystem::path& counts_path,
                         const std::filesystem::path& normalized_path, const ConfusionMatrix& cm);

// Centered window-3 moving average with shrunk edge windows.
std::vector<double> smooth_window3(const std::vector<double>& xs);

}  // namespace bira
