#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bira/image.hpp"
#include "bira/rng.hpp"
#include "bira/tensor.hpp"

namespace bira {

struct ManifestRecord {
    std::string path;  // relative to the dataset directory
    int label = 0;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::vector<long> class_counts;  // derived from records
    int image_size = 0;
    std::string split;

    void recount(int num_classes = 5);
};

// CSV with a `path,label` header, UTF-8, LF line endings.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path, const std::string& split);

void write_stats(const std::filesystem::path& path, const PreprocessStats& stats);
PreprocessStats read_stats(const std::filesystem::path& path);

// Sampling-with-replacement where every class has equal expected frequency
// (per-record weight proportional to 1/class_count). Deterministic given the
// Rng passed to next().
class WeightedSampler {
public:
    explicit WeightedSampler(const DatasetManifest& manifest);
    i64 next(Rng& rng) const;

private:
    std::vector<double> cumulative_;
};

// A split loaded into memory with the full preprocessing chain applied:
// crop -> resize(target) -> equalize -> standardize.
struct LoadedDataset {
    DatasetManifest manifest;
    PreprocessStats stats;
    int target_size = 0;
    std::vector<Image> images;  // standardized, HWC
    std::vector<int> labels;
    double standardized_black = 0.0;  // fill value for augmentation

    std::size_t size() const { return images.size(); }
};

LoadedDataset load_dataset(const std::filesystem::path& dir, const std::string& split,
                           int target_size);

// Assemble images [first, first+count) (by dataset order or explicit indices)
// into an [N,3,H,W] batch tensor.
Tensor make_batch(const LoadedDataset& ds, const std::vector<i64>& indices,
                  const std::vector<Image>* override_images = nullptr);

}  // namespace bira
