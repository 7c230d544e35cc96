#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "bira/image.hpp"

namespace bira {

inline constexpr int kNumClasses = 5;

struct BlobRange {
    int lo = 0;
    int hi = 0;
};

// Synthetic retina-like images: a bright disc on a black background, with a
// per-grade number of small dark "lesion" blobs. Blob-count ranges are
// disjoint and strictly increasing with the grade so the label is recoverable
// by counting blobs.
struct GenConfig {
    std::uint64_t seed = 0;
    int per_class_train = 50;
    int per_class_val = 10;
    int image_size = 64;
    std::array<BlobRange, kNumClasses> blob_ranges = {
        BlobRange{0, 0}, BlobRange{2, 3}, BlobRange{5, 7}, BlobRange{9, 11}, BlobRange{13, 16}};
};

struct SynthImage {
    Image image;     // un-quantized, in [0,1]
    int blob_count = 0;
    double cx = 0.0, cy = 0.0, radius = 0.0;  // disc geometry, pixel units
};

// Deterministic given (seed, split, grade, index).
SynthImage synth_image(std::uint64_t dataset_seed, const char* split, int grade, int index,
                       const GenConfig& cfg);

// Lesion-count oracle used by the label-recoverability check: connected dark
// components with luminance in (background, disc) bands.
int count_lesion_blobs(const Image& img);
int grade_from_blob_count(int count, const GenConfig& cfg);

struct GenSummary {
    std::filesystem::path dir;
    std::array<long, kNumClasses> train_counts{};
    std::array<long, kNumClasses> val_counts{};
    double pixel_mean = 0.0;
    double pixel_std = 0.0;
};

// Writes images/ (PPM), manifest_train.csv, manifest_val.csv, stats.json and
// gen_config.json under out_dir.
GenSummary generate_dataset(const GenConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace bira
