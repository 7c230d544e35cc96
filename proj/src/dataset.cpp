#include "bira/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "bira/error.hpp"
#include "bira/kernels.hpp"

#include "json.hpp"

namespace bira {

void DatasetManifest::recount(int num_classes) {
    class_counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (const auto& r : records) {
        if (r.label < 0 || r.label >= num_classes)
            throw DomainError("manifest label " + std::to_string(r.label) + " out of range for " +
                              std::to_string(num_classes) + " classes");
        ++class_counts[static_cast<std::size_t>(r.label)];
    }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);  // binary: pin LF endings
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << "path,label\n";
    for (const auto& r : m.records) out << r.path << "," << r.label << "\n";
    if (!out) throw IoError("manifest write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path, const std::string& split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    DatasetManifest m;
    m.split = split;
    std::string line;
    if (!std::getline(in, line) || line != "path,label")
        throw IoError("manifest missing `path,label` header: " + path.string());
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw IoError("malformed manifest row `" + line + "` in " + path.string());
        ManifestRecord r;
        r.path = line.substr(0, comma);
        r.label = std::stoi(line.substr(comma + 1));
        if (!seen.insert(r.path).second)
            throw IoError("duplicate manifest path `" + r.path + "` in " + path.string());
        m.records.push_back(std::move(r));
    }
    m.recount();
    return m;
}

void write_stats(const std::filesystem::path& path, const PreprocessStats& stats) {
    nlohmann::json j;
    j["pixel_mean"] = stats.pixel_mean;
    j["pixel_std"] = stats.pixel_std;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write stats: " + path.string());
    out << j.dump(2) << "\n";
}

PreprocessStats read_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stats: " + path.string());
    nlohmann::json j;
    in >> j;
    PreprocessStats s;
    s.pixel_mean = j.at("pixel_mean").get<double>();
    s.pixel_std = j.at("pixel_std").get<double>();
    if (s.pixel_std <= 0.0) throw DomainError("stats pixel_std must be positive: " + path.string());
    return s;
}

WeightedSampler::WeightedSampler(const DatasetManifest& manifest) {
    if (manifest.records.empty()) throw DomainError("weighted sampler: empty manifest");
    for (std::size_t c = 0; c < manifest.class_counts.size(); ++c) {
        if (manifest.class_counts[c] == 0)
            throw DomainError("weighted sampler: class " + std::to_string(c) + " has no samples");
    }
    cumulative_.reserve(manifest.records.size());
    double acc = 0.0;
    for (const auto& r : manifest.records) {
        acc += 1.0 / static_cast<double>(manifest.class_counts[static_cast<std::size_t>(r.label)]);
        cumulative_.push_back(acc);
    }
    for (double& v : cumulative_) v /= acc;
}

i64 WeightedSampler::next(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<i64>(it - cumulative_.begin());
}

LoadedDataset load_dataset(const std::filesystem::path& dir, const std::string& split,
                           int target_size) {
    LoadedDataset ds;
    ds.manifest = read_manifest(dir / ("manifest_" + split + ".csv"), split);
    ds.stats = read_stats(dir / "stats.json");
    ds.target_size = target_size;
    ds.standardized_black = (0.0 - ds.stats.pixel_mean) / ds.stats.pixel_std;
    const std::size_t n = ds.manifest.records.size();
    ds.images.resize(n);
    ds.labels.resize(n);
    kernels::parallel_for(static_cast<i64>(n), [&](i64 i) {
        const auto& rec = ds.manifest.records[static_cast<std::size_t>(i)];
        Image raw = read_ppm(dir / rec.path);
        Image pre = standardize(
            histogram_equalization(
                resize_bilinear(crop_black_border(raw), target_size, target_size)),
            ds.stats);
        ds.images[static_cast<std::size_t>(i)] = std::move(pre);
        ds.labels[static_cast<std::size_t>(i)] = rec.label;
    });
    if (!ds.manifest.records.empty()) {
        ds.manifest.image_size = target_size;
    }
    return ds;
}

Tensor make_batch(const LoadedDataset& ds, const std::vector<i64>& indices,
                  const std::vector<Image>* override_images) {
    const i64 n = static_cast<i64>(indices.size());
    const i64 hw = static_cast<i64>(ds.target_size);
    Tensor batch = Tensor::zeros({n, 3, hw, hw});
    kernels::parallel_for(n, [&](i64 b) {
        const Image& img = override_images ? (*override_images)[static_cast<std::size_t>(b)]
                                           : ds.images[static_cast<std::size_t>(indices[static_cast<std::size_t>(b)])];
        for (i64 c = 0; c < 3; ++c) {
            double* dst = batch.data.data() + ((b * 3 + c) * hw) * hw;
            for (i64 y = 0; y < hw; ++y)
                for (i64 x = 0; x < hw; ++x)
                    dst[y * hw + x] = img.at(static_cast<int>(y), static_cast<int>(x),
                                             static_cast<int>(c));
        }
    });
    return batch;
}

}  // namespace bira
