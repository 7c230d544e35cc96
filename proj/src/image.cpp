#include "bira/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "bira/error.hpp"

namespace bira {

void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IoError("not a binary PPM (P6): " + path.string());
    auto next_token = [&in, &path]() {
        // skip whitespace and '#' comments
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw IoError("truncated PPM header: " + path.string());
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255) throw IoError("unsupported PPM maxval in " + path.string());
    in.get();  // single whitespace after header
    Image img(h, w);
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError("truncated PPM data: " + path.string());
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

Image quantize_u8(const Image& img) {
    Image out(img.h, img.w);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        out.data[i] = static_cast<double>(std::lround(v * 255.0)) / 255.0;
    }
    return out;
}

BBox luminance_bbox(const Image& img, double tau) {
    BBox box{img.h, img.w, 0, 0};
    bool any = false;
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            if (img.luminance(y, x) > tau) {
                any = true;
                box.y0 = std::min(box.y0, y);
                box.x0 = std::min(box.x0, x);
                box.y1 = std::max(box.y1, y + 1);
                box.x1 = std::max(box.x1, x + 1);
            }
        }
    }
    if (!any) return BBox{};
    return box;
}

Image crop_black_border(const Image& img, bool* flagged, double tau) {
    if (flagged) *flagged = false;
    BBox box = luminance_bbox(img, tau);
    if (box.height() <= 0 || box.width() <= 0) {
        if (flagged) *flagged = true;
        return img;
    }
    const int side = std::max(box.height(), box.width());
    Image out(side, side);
    // center the box content on the square canvas
    const int oy = (side - box.height()) / 2;
    const int ox = (side - box.width()) / 2;
    for (int y = 0; y < box.height(); ++y) {
        for (int x = 0; x < box.width(); ++x) {
            for (int c = 0; c < 3; ++c) out.at(oy + y, ox + x, c) = img.at(box.y0 + y, box.x0 + x, c);
        }
    }
    return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw DomainError("resize_bilinear: target must be >= 1x1");
    Image out(out_h, out_w);
    const double sy = out_h > 1 ? static_cast<double>(img.h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(img.w - 1) / (out_w - 1) : 0.0;
    const double cy0 = out_h > 1 ? 0.0 : (img.h - 1) / 2.0;
    const double cx0 = out_w > 1 ? 0.0 : (img.w - 1) / 2.0;
    for (int y = 0; y < out_h; ++y) {
        const double fy = cy0 + sy * y;
        const int y0 = std::min(static_cast<int>(fy), img.h - 1);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = cx0 + sx * x;
            const int x0 = std::min(static_cast<int>(fx), img.w - 1);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Image histogram_equalization(const Image& img) {
    Image out(img.h, img.w);
    const std::size_t npix = static_cast<std::size_t>(img.h) * img.w;
    for (int c = 0; c < 3; ++c) {
        std::array<std::size_t, 256> hist{};
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                int bin = static_cast<int>(v * 256.0);
                if (bin > 255) bin = 255;
                ++hist[static_cast<std::size_t>(bin)];
            }
        std::array<double, 256> cdf{};
        std::size_t running = 0;
        for (int b = 0; b < 256; ++b) {
            running += hist[static_cast<std::size_t>(b)];
            cdf[static_cast<std::size_t>(b)] = static_cast<double>(running) / static_cast<double>(npix);
        }
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                int bin = static_cast<int>(v * 256.0);
                if (bin > 255) bin = 255;
                out.at(y, x, c) = cdf[static_cast<std::size_t>(bin)];
            }
    }
    return out;
}

Image standardize(const Image& img, const PreprocessStats& stats) {
    if (stats.pixel_std <= 0.0) throw DomainError("standardize: pixel_std must be positive");
    Image out(img.h, img.w);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = (img.data[i] - stats.pixel_mean) / stats.pixel_std;
    return out;
}

AugmentDraw draw_augment(Rng& rng, double max_angle_deg) {
    AugmentDraw d;
    d.angle_deg = rng.uniform(-max_angle_deg, max_angle_deg);
    d.flip_v = rng.bernoulli(0.5);
    d.flip_h = rng.bernoulli(0.5);
    return d;
}

static Image rotate_bilinear(const Image& img, double angle_deg, double fill) {
    if (angle_deg == 0.0) return img;
    Image out(img.h, img.w);
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            // inverse map: source = R(-angle) * (dst - center) + center
            const double dy = y - cy, dx = x - cx;
            const double syf = cy + (cs * dy - sn * dx);
            const double sxf = cx + (sn * dy + cs * dx);
            if (syf < 0.0 || sxf < 0.0 || syf > img.h - 1 || sxf > img.w - 1) {
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = fill;
                continue;
            }
            const int y0 = std::min(static_cast<int>(syf), img.h - 1);
            const int x0 = std::min(static_cast<int>(sxf), img.w - 1);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wy = syf - y0, wx = sxf - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    return out;
}

Image flip_vertical(const Image& img) {
    Image out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.h - 1 - y, x, c);
    return out;
}

Image augment(const Image& img, const AugmentDraw& draw, double fill) {
    Image out = rotate_bilinear(img, draw.angle_deg, fill);
    if (draw.flip_v) out = flip_vertical(out);
    if (draw.flip_h) out = flip_horizontal(out);
    return out;
}

}  // namespace bira
