#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "bira/dataset.hpp"
#include "bira/synth.hpp"

using namespace bira;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("bira_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("synth: determinism, counts, zero lesions at grade 0") {
    GenConfig cfg;
    cfg.seed = 7;
    cfg.image_size = 64;
    SynthImage a = synth_image(cfg.seed, "train", 0, 3, cfg);
    SynthImage b = synth_image(cfg.seed, "train", 0, 3, cfg);
    CHECK(a.image.data == b.image.data);
    CHECK(a.blob_count == 0);

    SynthImage g4 = synth_image(cfg.seed, "train", 4, 0, cfg);
    CHECK(g4.blob_count >= cfg.blob_ranges[4].lo);
    CHECK(g4.blob_count <= cfg.blob_ranges[4].hi);
}

TEST_CASE("synth: blob-count classifier recovers every label (raw images)") {
    GenConfig cfg;
    cfg.seed = 11;
    cfg.image_size = 64;
    for (int g = 0; g < kNumClasses; ++g) {
        for (int i = 0; i < 6; ++i) {
            SynthImage si = synth_image(cfg.seed, "train", g, i, cfg);
            const int counted = count_lesion_blobs(quantize_u8(si.image));
            CHECK(counted == si.blob_count);
            CHECK(grade_from_blob_count(counted, cfg) == g);
        }
    }
}

TEST_CASE("crop_black_border: disc bbox, no-border identity, all-black flag") {
    GenConfig cfg;
    cfg.seed = 13;
    cfg.image_size = 64;
    SynthImage si = synth_image(cfg.seed, "val", 2, 0, cfg);
    BBox box = luminance_bbox(si.image);
    // generator-as-oracle: bbox matches the disc bounds within 1 pixel
    CHECK(std::abs(box.x0 - (si.cx - si.radius)) <= 1.5);
    CHECK(std::abs(box.x1 - (si.cx + si.radius)) <= 1.5);
    CHECK(std::abs(box.y0 - (si.cy - si.radius)) <= 1.5);
    CHECK(std::abs(box.y1 - (si.cy + si.radius)) <= 1.5);
    Image cropped = crop_black_border(si.image);
    CHECK(cropped.h == cropped.w);
    CHECK(std::abs(cropped.w - 2.0 * si.radius) <= 2.0);

    // square image with no black border: unchanged
    Image bright(6, 6);
    for (auto& v : bright.data) v = 0.8;
    Image same = crop_black_border(bright);
    CHECK(same.h == 6);
    CHECK(same.w == 6);
    CHECK(same.data == bright.data);

    // non-square bright content is centered on a square canvas
    Image wide(5, 7);
    for (auto& v : wide.data) v = 0.8;
    Image squared = crop_black_border(wide);
    CHECK(squared.h == 7);
    CHECK(squared.w == 7);

    Image black(4, 4);
    bool flagged = false;
    Image out = crop_black_border(black, &flagged);
    CHECK(flagged);
    CHECK(out.h == 4);
}

TEST_CASE("resize_bilinear: identity, constants, checkerboard center") {
    Image img(2, 2);
    img.at(0, 1, 0) = img.at(0, 1, 1) = img.at(0, 1, 2) = 1.0;
    img.at(1, 0, 0) = img.at(1, 0, 1) = img.at(1, 0, 2) = 1.0;

    Image same = resize_bilinear(img, 2, 2);
    CHECK(same.data == img.data);

    Image constant(3, 5);
    for (auto& v : constant.data) v = 0.37;
    Image big = resize_bilinear(constant, 9, 4);
    for (double v : big.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

    Image up = resize_bilinear(img, 3, 3);
    CHECK(up.at(1, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("histogram_equalization: degenerate, two-level, flatter histogram") {
    Image constant(4, 4);
    for (auto& v : constant.data) v = 0.42;
    Image eq = histogram_equalization(constant);
    for (double v : eq.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    // 50/50 two-level channel at {0.2, 0.8} maps to {0.5, 1.0}
    Image two(2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c) two.at(y, x, c) = (y == 0) ? 0.2 : 0.8;
    Image eq2 = histogram_equalization(two);
    CHECK(eq2.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(eq2.at(1, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // flatter output: variance of coarse (32-bin) counts does not increase.
    // A low-contrast gradient concentrates in a few coarse bins; equalization
    // spreads it across the full range.
    Image low(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) low.at(y, x, c) = 0.45 + 0.1 * (16 * y + x) / 255.0;
    auto coarse_variance = [](const Image& im) {
        std::vector<long> hist(32, 0);
        for (int y = 0; y < im.h; ++y)
            for (int x = 0; x < im.w; ++x) {
                int b = static_cast<int>(std::clamp(im.at(y, x, 0), 0.0, 1.0) * 32.0);
                if (b > 31) b = 31;
                ++hist[static_cast<std::size_t>(b)];
            }
        const double mean = static_cast<double>(im.h) * im.w / 32.0;
        double var = 0;
        for (long h : hist) var += (h - mean) * (h - mean);
        return var / 32.0;
    };
    Image eq3 = histogram_equalization(low);
    CHECK(coarse_variance(eq3) <= coarse_variance(low) + 1e-9);
    CHECK(coarse_variance(eq3) < 0.5 * coarse_variance(low));
}

TEST_CASE("standardize: zero at the mean, affine identity, corpus stats") {
    PreprocessStats stats{0.4, 0.2};
    Image img(2, 2);
    for (auto& v : img.data) v = 0.4;
    Image out = standardize(img, stats);
    for (double v : out.data) CHECK(v == doctest::Approx(0.0));

    // standardize(a*x+b) relates linearly given matching stats
    Image x(2, 2);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = 0.1 * static_cast<double>(i);
    const double a = 2.0, b = 0.05;
    Image ax = x;
    for (auto& v : ax.data) v = a * v + b;
    PreprocessStats sx{0.3, 0.1};
    PreprocessStats sax{a * 0.3 + b, a * 0.1};
    Image s1 = standardize(x, sx), s2 = standardize(ax, sax);
    for (std::size_t i = 0; i < s1.data.size(); ++i)
        CHECK(s2.data[i] == doctest::Approx(s1.data[i]).epsilon(1e-12));
}

TEST_CASE("weighted_sampler: uniform on balanced data, paper counts rebalanced, determinism") {
    {
        DatasetManifest m;
        for (int g = 0; g < 5; ++g)
            for (int i = 0; i < 4; ++i) m.records.push_back({"p" + std::to_string(g * 4 + i), g});
        m.recount();
        WeightedSampler s(m);
        Rng r1(5), r2(5);
        for (int i = 0; i < 100; ++i) CHECK(s.next(r1) == s.next(r2));
    }
    {
        // EyePACS class counts: expected class frequencies all 0.2 over 100k draws
        const long counts[5] = {25810, 2443, 5292, 873, 708};
        DatasetManifest m;
        for (int g = 0; g < 5; ++g)
            for (long i = 0; i < counts[g]; ++i)
                m.records.push_back({"c" + std::to_string(g) + "_" + std::to_string(i), g});
        m.recount();
        WeightedSampler s(m);
        Rng rng(99);
        std::vector<long> freq(5, 0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i)
            ++freq[static_cast<std::size_t>(m.records[static_cast<std::size_t>(s.next(rng))].label)];
        for (int g = 0; g < 5; ++g)
            CHECK(std::abs(freq[static_cast<std::size_t>(g)] / static_cast<double>(draws) - 0.2) <
                  0.01);
    }
    {
        DatasetManifest empty_class;
        empty_class.records.push_back({"a", 0});
        empty_class.recount();  // classes 1..4 empty
        CHECK_THROWS_AS(WeightedSampler{empty_class}, DomainError);
    }
}

TEST_CASE("augment: identity draw, flip involution, rotation round trip") {
    GenConfig cfg;
    cfg.seed = 23;
    SynthImage si = synth_image(cfg.seed, "train", 1, 0, cfg);
    const Image& img = si.image;

    Image same = augment(img, AugmentDraw{0.0, false, false});
    CHECK(same.data == img.data);

    Image flipped = flip_horizontal(flip_horizontal(img));
    CHECK(flipped.data == img.data);

    // +10 then -10 degrees is close to the original on smooth images
    Image rot = augment(augment(img, AugmentDraw{10.0, false, false}),
                        AugmentDraw{-10.0, false, false});
    double mad = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) mad += std::abs(rot.data[i] - img.data[i]);
    mad /= static_cast<double>(img.data.size());
    CHECK(mad < 0.05);
}

TEST_CASE("generate_dataset: files, manifests, stats, bitwise rerun determinism") {
    GenConfig cfg;
    cfg.seed = 7;
    cfg.per_class_train = 3;
    cfg.per_class_val = 1;
    cfg.image_size = 48;

    fs::path d1 = temp_dir("gen1");
    fs::path d2 = temp_dir("gen2");
    GenSummary s1 = generate_dataset(cfg, d1);
    GenSummary s2 = generate_dataset(cfg, d2);
    for (int g = 0; g < 5; ++g) {
        CHECK(s1.train_counts[static_cast<std::size_t>(g)] == 3);
        CHECK(s1.val_counts[static_cast<std::size_t>(g)] == 1);
    }
    CHECK(s1.pixel_mean == s2.pixel_mean);

    DatasetManifest m = read_manifest(d1 / "manifest_train.csv", "train");
    CHECK(m.records.size() == 15);
    CHECK(m.class_counts == std::vector<long>{3, 3, 3, 3, 3});
    for (const auto& rec : m.records) {
        CHECK(file_bytes(d1 / rec.path) == file_bytes(d2 / rec.path));
        CHECK(!file_bytes(d1 / rec.path).empty());
    }
    CHECK(file_bytes(d1 / "stats.json") == file_bytes(d2 / "stats.json"));

    PreprocessStats stats = read_stats(d1 / "stats.json");
    CHECK(stats.pixel_std > 0.0);

    // standardized training corpus has mean ~0, std ~1 under the written stats
    LoadedDataset ds = load_dataset(d1, "train", 48);
    double sum = 0, sumsq = 0;
    long n = 0;
    for (const auto& img : ds.images) {
        for (double v : img.data) {
            sum += v;
            sumsq += v * v;
        }
        n += static_cast<long>(img.data.size());
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);

    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("ppm round trip preserves quantized pixels") {
    GenConfig cfg;
    cfg.seed = 31;
    SynthImage si = synth_image(cfg.seed, "train", 2, 2, cfg);
    Image q = quantize_u8(si.image);
    fs::path dir = temp_dir("ppm");
    write_ppm(dir / "x.ppm", q);
    Image back = read_ppm(dir / "x.ppm");
    CHECK(back.h == q.h);
    CHECK(back.data == q.data);
    fs::remove_all(dir);
}

TEST_CASE("manifest io: header, uniqueness, label range") {
    fs::path dir = temp_dir("manifest");
    {
        std::ofstream out(dir / "manifest_train.csv", std::ios::binary);
        out << "path,label\nimgs/a.ppm,0\nimgs/a.ppm,1\n";
    }
    CHECK_THROWS_AS(read_manifest(dir / "manifest_train.csv", "train"), IoError);
    {
        std::ofstream out(dir / "manifest_train.csv", std::ios::binary);
        out << "path,label\nimgs/a.ppm,9\n";
    }
    CHECK_THROWS_AS(read_manifest(dir / "manifest_train.csv", "train"), DomainError);
    fs::remove_all(dir);
}
