#include "bira/synth.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "bira/dataset.hpp"
#include "bira/error.hpp"
#include "bira/kernels.hpp"

#include "json.hpp"

namespace bira {

namespace {

constexpr double kBgNoise = 0.015;  // stays below the crop threshold of 10/255

struct Blob {
    double y, x, r;
};

}  // namespace

SynthImage synth_image(std::uint64_t dataset_seed, const char* split, int grade, int index,
                       const GenConfig& cfg) {
    if (grade < 0 || grade >= kNumClasses) throw DomainError("synth_image: grade out of range");
    Rng rng(combine_seed(child_seed(dataset_seed, split),
                         static_cast<std::uint64_t>(grade) * 1000003ull +
                             static_cast<std::uint64_t>(index)));
    const int s = cfg.image_size;
    SynthImage out;
    out.image = Image(s, s);
    Image& img = out.image;

    const double r = rng.uniform(0.33, 0.42) * s;
    const double cy = s / 2.0 + rng.uniform(-0.04, 0.04) * s;
    const double cx = s / 2.0 + rng.uniform(-0.04, 0.04) * s;
    const double brightness = rng.uniform(0.9, 1.1);
    out.cx = cx;
    out.cy = cy;
    out.radius = r;

    const BlobRange range = cfg.blob_ranges[static_cast<std::size_t>(grade)];
    const int count = range.lo + static_cast<int>(rng.uniform_int(range.hi - range.lo + 1));
    out.blob_count = count;

    // Lesions sit on a jittered hexagonal lattice inside 0.8r so any count up
    // to the lattice capacity is placeable; lattice spacing keeps blob edges
    // >= 1.6 px apart, which the connected-component counter needs.
    const double blob_r = 1.2;
    const double jitter = 0.35;
    const double spacing = 2.0 * blob_r + 1.6 + 2.0 * jitter * 1.4143;
    const double place_r = 0.8 * r - blob_r;
    std::vector<Blob> blobs;
    if (count > 0) {
        std::vector<std::pair<double, double>> lattice;
        const double row_h = spacing * 0.8660254037844386;
        const int max_row = static_cast<int>(place_r / row_h) + 1;
        for (int row = -max_row; row <= max_row; ++row) {
            const double y = row * row_h;
            const double x_off = (row & 1) ? spacing / 2.0 : 0.0;
            const int max_col = static_cast<int>((place_r + spacing) / spacing) + 1;
            for (int col = -max_col; col <= max_col; ++col) {
                const double x = col * spacing + x_off;
                if (x * x + y * y <= place_r * place_r) lattice.emplace_back(cy + y, cx + x);
            }
        }
        if (static_cast<int>(lattice.size()) < count) {
            throw ConfigError("synth_image: image_size " + std::to_string(s) +
                              " too small to place " + std::to_string(count) +
                              " lesions (capacity " + std::to_string(lattice.size()) + ")");
        }
        // Fisher-Yates, then take the first `count` slots
        for (std::size_t i = lattice.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<i64>(i + 1)));
            std::swap(lattice[i], lattice[j]);
        }
        for (int i = 0; i < count; ++i) {
            blobs.push_back({lattice[static_cast<std::size_t>(i)].first + rng.uniform(-jitter, jitter),
                             lattice[static_cast<std::size_t>(i)].second + rng.uniform(-jitter, jitter),
                             blob_r});
        }
    }

    const double base_rgb[3] = {0.82, 0.46, 0.24};
    const double lesion_rgb[3] = {0.30, 0.06, 0.04};
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            const double dy = y - cy, dx = x - cx;
            const double dist = std::sqrt(dy * dy + dx * dx);
            double rgb[3] = {0.0, 0.0, 0.0};
            if (dist <= r) {
                const double shade = (1.0 - 0.35 * (dist / r) * (dist / r)) * brightness;
                bool in_lesion = false;
                for (const Blob& b : blobs) {
                    const double ly = y - b.y, lx = x - b.x;
                    if (ly * ly + lx * lx <= b.r * b.r) {
                        in_lesion = true;
                        break;
                    }
                }
                const double* base = in_lesion ? lesion_rgb : base_rgb;
                for (int c = 0; c < 3; ++c) rgb[c] = base[c] * shade;
            }
            for (int c = 0; c < 3; ++c) {
                const double noisy = rgb[c] + rng.uniform(-kBgNoise, kBgNoise);
                img.at(y, x, c) = std::clamp(noisy, 0.0, 1.0);
            }
        }
    }
    return out;
}

int count_lesion_blobs(const Image& img) {
    // lesion band: well above background noise, well below the lit disc
    const double lo = 0.02, hi = 0.25;
    const int h = img.h, w = img.w;
    std::vector<char> mark(static_cast<std::size_t>(h) * w, 0);
    auto dark = [&](int y, int x) {
        const double l = img.luminance(y, x);
        return l > lo && l < hi;
    };
    int count = 0;
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int id = y * w + x;
            if (mark[static_cast<std::size_t>(id)] || !dark(y, x)) continue;
            ++count;
            stack.push_back(id);
            mark[static_cast<std::size_t>(id)] = 1;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int yy = cur / w, xx = cur % w;
                const int ns[4][2] = {{yy - 1, xx}, {yy + 1, xx}, {yy, xx - 1}, {yy, xx + 1}};
                for (auto& nb : ns) {
                    if (nb[0] < 0 || nb[0] >= h || nb[1] < 0 || nb[1] >= w) continue;
                    const int nid = nb[0] * w + nb[1];
                    if (!mark[static_cast<std::size_t>(nid)] && dark(nb[0], nb[1])) {
                        mark[static_cast<std::size_t>(nid)] = 1;
                        stack.push_back(nid);
                    }
                }
            }
        }
    }
    return count;
}

int grade_from_blob_count(int count, const GenConfig& cfg) {
    int best = 0;
    int best_dist = std::numeric_limits<int>::max();
    for (int g = 0; g < kNumClasses; ++g) {
        const BlobRange br = cfg.blob_ranges[static_cast<std::size_t>(g)];
        int d = 0;
        if (count < br.lo) d = br.lo - count;
        else if (count > br.hi) d = count - br.hi;
        if (d < best_dist) {
            best_dist = d;
            best = g;
        }
    }
    return best;
}

GenSummary generate_dataset(const GenConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.per_class_train < 1) throw ConfigError("generate_dataset: per_class_train must be >= 1");
    if (cfg.per_class_val < 0) throw ConfigError("generate_dataset: per_class_val must be >= 0");
    if (cfg.image_size < 16) throw ConfigError("generate_dataset: image_size must be >= 16");
    for (int g = 0; g + 1 < kNumClasses; ++g) {
        if (cfg.blob_ranges[static_cast<std::size_t>(g)].hi >=
            cfg.blob_ranges[static_cast<std::size_t>(g + 1)].lo)
            throw ConfigError("generate_dataset: blob ranges must be disjoint and increasing");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

    GenSummary summary;
    summary.dir = out_dir;

    // generation is deterministic per (split, grade, index); parallel across images
    struct Job {
        const char* split;
        int grade;
        int index;
        std::string rel_path;
    };
    std::vector<Job> jobs;
    for (int g = 0; g < kNumClasses; ++g) {
        for (int i = 0; i < cfg.per_class_train; ++i) {
            jobs.push_back({"train", g, i,
                            "images/train_g" + std::to_string(g) + "_" + std::to_string(i) + ".ppm"});
        }
    }
    for (int g = 0; g < kNumClasses; ++g) {
        for (int i = 0; i < cfg.per_class_val; ++i) {
            jobs.push_back({"val", g, i,
                            "images/val_g" + std::to_string(g) + "_" + std::to_string(i) + ".ppm"});
        }
    }
    std::vector<Image> quantized(jobs.size());
    kernels::parallel_for(static_cast<i64>(jobs.size()), [&](i64 j) {
        const Job& job = jobs[static_cast<std::size_t>(j)];
        SynthImage si = synth_image(cfg.seed, job.split, job.grade, job.index, cfg);
        quantized[static_cast<std::size_t>(j)] = quantize_u8(si.image);
        write_ppm(out_dir / job.rel_path, quantized[static_cast<std::size_t>(j)]);
    });

    DatasetManifest train_man, val_man;
    train_man.split = "train";
    val_man.split = "val";
    train_man.image_size = cfg.image_size;
    val_man.image_size = cfg.image_size;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job& job = jobs[j];
        DatasetManifest& m = job.split[0] == 't' ? train_man : val_man;
        m.records.push_back({job.rel_path, job.grade});
        if (job.split[0] == 't')
            ++summary.train_counts[static_cast<std::size_t>(job.grade)];
        else
            ++summary.val_counts[static_cast<std::size_t>(job.grade)];
    }
    train_man.recount();
    val_man.recount();
    write_manifest(out_dir / "manifest_train.csv", train_man);
    write_manifest(out_dir / "manifest_val.csv", val_man);

    // stats over the preprocessed (crop -> resize -> equalize) train split,
    // computed on the quantized pixels so they match what training will load
    double sum = 0.0, sumsq = 0.0;
    long npix = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].split[0] != 't') continue;
        Image pre = histogram_equalization(
            resize_bilinear(crop_black_border(quantized[j]), cfg.image_size, cfg.image_size));
        for (double v : pre.data) {
            sum += v;
            sumsq += v * v;
        }
        npix += static_cast<long>(pre.data.size());
    }
    const double mean = sum / static_cast<double>(npix);
    double var = sumsq / static_cast<double>(npix) - mean * mean;
    if (var < 1e-12) var = 1e-12;
    summary.pixel_mean = mean;
    summary.pixel_std = std::sqrt(var);
    write_stats(out_dir / "stats.json", PreprocessStats{summary.pixel_mean, summary.pixel_std});

    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["per_class_train"] = cfg.per_class_train;
    j["per_class_val"] = cfg.per_class_val;
    j["image_size"] = cfg.image_size;
    auto ranges = nlohmann::json::array();
    for (const auto& r : cfg.blob_ranges) ranges.push_back({r.lo, r.hi});
    j["blob_ranges"] = ranges;
    std::ofstream cf(out_dir / "gen_config.json", std::ios::trunc);
    if (!cf) throw IoError("cannot write " + (out_dir / "gen_config.json").string());
    cf << j.dump(2) << "\n";
    return summary;
}

}  // namespace bira
