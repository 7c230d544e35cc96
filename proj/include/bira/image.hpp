#pragma once

#include <filesystem>
#include <vector>

#include "bira/rng.hpp"
#include "bira/tensor.hpp"

namespace bira {

// H x W x 3 interleaved RGB, values nominally in [0,1] until standardized.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3, 0.0) {}

    double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }
    double luminance(int y, int x) const {
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        return (data[i] + data[i + 1] + data[i + 2]) / 3.0;
    }
};

// 8-bit binary PPM (P6). Values are quantized with round(v*255), clamped.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
// The quantize-then-load round trip used both by the generator (for stats)
// and the training loader, so in-memory and on-disk pixels agree exactly.
Image quantize_u8(const Image& img);

struct BBox {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // half-open [y0,y1) x [x0,x1)
    int height() const { return y1 - y0; }
    int width() const { return x1 - x0; }
};

inline constexpr double kCropLuminanceThreshold = 10.0 / 255.0;

// Tightest box containing pixels with luminance above tau; empty box when none.
BBox luminance_bbox(const Image& img, double tau = kCropLuminanceThreshold);

// Crop to the luminance bounding box expanded to a square (black padding when
// the box leaves the frame). An entirely-dark image is returned unchanged and
// `flagged`, when given, is set.
Image crop_black_border(const Image& img, bool* flagged = nullptr,
                        double tau = kCropLuminanceThreshold);

// Corner-aligned bilinear resize: source coordinate = i*(S-1)/(D-1) (center
// pixel when D == 1).
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Per-channel 256-bin histogram equalization on [0,1] via the plain CDF rule.
Image histogram_equalization(const Image& img);

struct PreprocessStats {
    double pixel_mean = 0.0;
    double pixel_std = 1.0;
};

Image standardize(const Image& img, const PreprocessStats& stats);

struct AugmentDraw {
    double angle_deg = 0.0;
    bool flip_v = false;
    bool flip_h = false;
};

// Draw order is pinned: angle, vertical flip, horizontal flip.
AugmentDraw draw_augment(Rng& rng, double max_angle_deg = 10.0);

// Rotate about the image center (bilinear, `fill` outside), then apply flips.
Image augment(const Image& img, const AugmentDraw& draw, double fill = 0.0);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

}  // namespace bira
