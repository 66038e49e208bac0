#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/image_io.hpp"
#include "aerothreat/numeric_array.hpp"

#include <cstddef>
#include <filesystem>

#include <fmt/format.h>

namespace aerothreat {

inline constexpr std::size_t kInputSize = 32;
inline constexpr std::size_t kInputChannels = 3;

/// Bilinear sample position for corner-aligned resizing: output pixel i of n_out
/// maps to i * (n_in - 1) / (n_out - 1) in the source.
inline double corner_aligned_coord(std::size_t i, std::size_t n_in, std::size_t n_out) {
    if (n_out <= 1 || n_in <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
}

/// Converts a decoded image to an (out_h, out_w, 3) array in [0,1]: gray is
/// replicated to RGB, then bilinear (corner-aligned) resize, then /255.
inline NumericArray preprocess_image(const RawImage &image, std::size_t out_h = kInputSize,
                                     std::size_t out_w = kInputSize) {
    if (image.width < 1 || image.height < 1) throw DecodeError("image has no pixels");
    if (image.channels != 1 && image.channels != 3) {
        throw DecodeError(fmt::format("image has {} channels, expected 1 or 3", image.channels));
    }
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw DecodeError("pixel buffer size does not match image dimensions");
    }
    const std::size_t in_h = image.height;
    const std::size_t in_w = image.width;
    const int ch = image.channels;
    NumericArray out({out_h, out_w, kInputChannels});
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = corner_aligned_coord(y, in_h, out_h);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = corner_aligned_coord(x, in_w, out_w);
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < kInputChannels; ++c) {
                const int sc = ch == 1 ? 0 : static_cast<int>(c);
                const double a = image.at(static_cast<int>(y0), static_cast<int>(x0), sc);
                const double b = image.at(static_cast<int>(y0), static_cast<int>(x1), sc);
                const double d = image.at(static_cast<int>(y1), static_cast<int>(x0), sc);
                const double e = image.at(static_cast<int>(y1), static_cast<int>(x1), sc);
                // lerp form keeps constant fields exactly constant
                const double top = a + (b - a) * fx;
                const double bottom = d + (e - d) * fx;
                out.at(y, x, c) = (top + (bottom - top) * fy) / 255.0;
            }
        }
    }
    return out;
}

inline NumericArray load_preprocessed(const std::filesystem::path &path) { return preprocess_image(decode_image(path)); }

}  // namespace aerothreat
