#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/numeric_array.hpp"
#include "aerothreat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>

#include <fmt/format.h>

namespace aerothreat {

/// Bounds for random geometric augmentation. Out-of-frame samples use the nearest edge pixel.
struct AugmentationParams {
    double rotation_max = 20.0;  // degrees
    double shift_max = 0.1;      // fraction of width / height
    double shear_max = 10.0;     // degrees
    double zoom_min = 0.9;
    double zoom_max = 1.1;
    bool hflip_enabled = true;
    std::string fill_mode = "nearest";
    std::uint64_t seed = 0;

    /// All ranges collapsed; augment_image with these is the identity.
    static AugmentationParams identity() {
        AugmentationParams p;
        p.rotation_max = 0.0;
        p.shift_max = 0.0;
        p.shear_max = 0.0;
        p.zoom_min = 1.0;
        p.zoom_max = 1.0;
        p.hflip_enabled = false;
        return p;
    }

    void validate() const {
        if (!(rotation_max >= 0.0)) throw ValidationError("rotation_max must be >= 0");
        if (!(shift_max >= 0.0 && shift_max < 1.0)) throw ValidationError("shift_max must lie in [0, 1)");
        if (!(shear_max >= 0.0 && shear_max < 90.0)) throw ValidationError("shear_max must lie in [0, 90)");
        if (!(zoom_min > 0.0 && zoom_min <= 1.0 && 1.0 <= zoom_max)) {
            throw ValidationError("zoom range must satisfy 0 < min <= 1 <= max");
        }
        if (fill_mode != "nearest") throw ValidationError(fmt::format("unsupported fill_mode '{}'", fill_mode));
    }
};

/// One concrete set of transform parameters.
struct AugmentationDraw {
    double rotation_deg = 0.0;
    double shift_x = 0.0;  // fraction of width, positive moves content right
    double shift_y = 0.0;  // fraction of height, positive moves content down
    double shear_deg = 0.0;
    double zoom = 1.0;
    bool hflip = false;

    [[nodiscard]] bool geometric_identity() const noexcept {
        return rotation_deg == 0.0 && shift_x == 0.0 && shift_y == 0.0 && shear_deg == 0.0 && zoom == 1.0;
    }

    [[nodiscard]] std::string describe() const {
        return fmt::format("rotate={:.4f}deg shift=({:.4f},{:.4f}) shear={:.4f}deg zoom={:.4f} hflip={}", rotation_deg,
                           shift_x, shift_y, shear_deg, zoom, hflip ? 1 : 0);
    }
};

/// Draws each parameter uniformly within its bound from draw_seed.
inline AugmentationDraw draw_augmentation(const AugmentationParams &params, std::uint64_t draw_seed) {
    Rng rng(draw_seed);
    auto symmetric = [&](double bound) { return bound > 0.0 ? rng.uniform(-bound, bound) : 0.0; };
    AugmentationDraw d;
    d.rotation_deg = symmetric(params.rotation_max);
    d.shift_x = symmetric(params.shift_max);
    d.shift_y = symmetric(params.shift_max);
    d.shear_deg = symmetric(params.shear_max);
    d.zoom = params.zoom_min < params.zoom_max ? rng.uniform(params.zoom_min, params.zoom_max) : params.zoom_min;
    d.hflip = params.hflip_enabled && rng.coin();
    return d;
}

namespace detail {

inline double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace detail

/// Mirrors columns; exact index reversal.
inline NumericArray hflip(const NumericArray &img) {
    const std::size_t h = img.extent(0), w = img.extent(1), ch = img.extent(2);
    NumericArray out(img.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < ch; ++c) out.at(y, x, c) = img.at(y, w - 1 - x, c);
    return out;
}

/// Affine warp about the image centre, forward map dst = c + R·Sh·Z·(src − c) + t,
/// evaluated by inverse mapping with bilinear sampling and nearest-edge fill.
/// In (x right, y down) coordinates, positive rotation turns content clockwise on screen.
inline NumericArray warp_affine(const NumericArray &img, const AugmentationDraw &d) {
    const std::size_t h = img.extent(0), w = img.extent(1), ch = img.extent(2);
    const double deg = std::numbers::pi / 180.0;
    const double cr = std::cos(d.rotation_deg * deg), sr = std::sin(d.rotation_deg * deg);
    const double k = std::tan(d.shear_deg * deg);
    // M = R * Sh * Z with R = [[cr,-sr],[sr,cr]], Sh = [[1,k],[0,1]], Z = zoom * I
    const double m00 = d.zoom * cr, m01 = d.zoom * (cr * k - sr);
    const double m10 = d.zoom * sr, m11 = d.zoom * (sr * k + cr);
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
    const double cx = (static_cast<double>(w) - 1.0) / 2.0, cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double tx = d.shift_x * static_cast<double>(w), ty = d.shift_y * static_cast<double>(h);
    const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);

    NumericArray out(img.shape());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx - tx;
            const double dy = static_cast<double>(y) - cy - ty;
            const double sx = std::clamp(detail::snap(cx + i00 * dx + i01 * dy), 0.0, max_x);
            const double sy = std::clamp(detail::snap(cy + i10 * dx + i11 * dy), 0.0, max_y);
            const std::size_t x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
            const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
            for (std::size_t c = 0; c < ch; ++c) {
                const double top = img.at(y0, x0, c) + (img.at(y0, x1, c) - img.at(y0, x0, c)) * fx;
                const double bottom = img.at(y1, x0, c) + (img.at(y1, x1, c) - img.at(y1, x0, c)) * fx;
                out.at(y, x, c) = top + (bottom - top) * fy;
            }
        }
    }
    return out;
}

inline NumericArray apply_augmentation(const NumericArray &img, const AugmentationDraw &d) {
    if (img.rank() != 3) throw ValidationError(fmt::format("expected (h,w,c) image, got {}", shape_string(img.shape())));
    NumericArray out = d.geometric_identity() ? img : warp_affine(img, d);
    if (d.hflip) out = hflip(out);
    return out;
}

/// Random label-preserving transform of a (32,32,3) image; parameters drawn from draw_seed.
inline NumericArray augment_image(const NumericArray &img, const AugmentationParams &params,
                                  std::uint64_t draw_seed) {
    return apply_augmentation(img, draw_augmentation(params, draw_seed));
}

}  // namespace aerothreat
