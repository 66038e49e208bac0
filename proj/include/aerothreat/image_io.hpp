#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/numeric_array.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace aerothreat {

/// Decoded 8-bit image, interleaved, 1 (gray) or 3 (RGB) channels.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    [[nodiscard]] std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    friend bool operator==(const RawImage &, const RawImage &) = default;
};

inline bool has_image_extension(const std::filesystem::path &p) {
    std::string ext = p.extension().string();
    for (auto &c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

namespace detail {

inline RawImage raw_from_mat(const cv::Mat &decoded) {
    cv::Mat m = decoded;
    if (m.depth() == CV_16U) m.convertTo(m, CV_8U, 1.0 / 257.0);
    if (m.depth() != CV_8U) throw DecodeError("unsupported pixel depth");
    cv::Mat out;
    switch (m.channels()) {
        case 1: out = m; break;
        case 3: cv::cvtColor(m, out, cv::COLOR_BGR2RGB); break;
        case 4: cv::cvtColor(m, out, cv::COLOR_BGRA2RGB); break;
        default: throw DecodeError(fmt::format("unsupported channel count {}", m.channels()));
    }
    if (!out.isContinuous()) out = out.clone();
    RawImage img;
    img.width = out.cols;
    img.height = out.rows;
    img.channels = out.channels();
    img.pixels.assign(out.data, out.data + out.total() * out.elemSize());
    return img;
}

}  // namespace detail

/// Decodes a PNG or JPEG file to 8-bit gray or RGB.
inline RawImage decode_image(const std::filesystem::path &path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw DecodeError(fmt::format("cannot decode image '{}'", path.string()));
    try {
        return detail::raw_from_mat(m);
    } catch (const DecodeError &e) {
        throw DecodeError(fmt::format("'{}': {}", path.string(), e.what()));
    }
}

/// Gray images are replicated to three channels.
inline RawImage to_rgb(const RawImage &img) {
    if (img.channels == 3) return img;
    if (img.channels != 1) throw ValidationError(fmt::format("image has {} channels", img.channels));
    RawImage out{img.width, img.height, 3, std::vector<std::uint8_t>(img.pixels.size() * 3)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = img.pixels[i];
    }
    return out;
}

/// SHA-256 over "W x H" plus the RGB pixel bytes at native resolution, as lowercase hex.
inline std::string content_hash(const RawImage &img) {
    const RawImage rgb = to_rgb(img);
    const std::string prefix = fmt::format("{}x{}\n", rgb.width, rgb.height);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw Error("EVP_MD_CTX_new failed");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, prefix.data(), prefix.size()) == 1 &&
              EVP_DigestUpdate(ctx, rgb.pixels.data(), rgb.pixels.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

/// Quantizes an (h, w, 3) array in [0,1] to 8-bit RGB.
inline RawImage quantize(const NumericArray &img) {
    if (img.rank() != 3 || img.extent(2) != 3) {
        throw ValidationError(fmt::format("expected (h,w,3) image, got {}", shape_string(img.shape())));
    }
    RawImage out{static_cast<int>(img.extent(1)), static_cast<int>(img.extent(0)), 3,
                 std::vector<std::uint8_t>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = std::clamp(img[i], 0.0, 1.0);
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

inline void write_png(const RawImage &img, const std::filesystem::path &path) {
    const int type = img.channels == 1 ? CV_8UC1 : CV_8UC3;
    cv::Mat m(img.height, img.width, type, const_cast<std::uint8_t *>(img.pixels.data()));
    cv::Mat bgr;
    if (img.channels == 3) {
        cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    } else {
        bgr = m;
    }
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    // Fixed compression level keeps the encoded bytes reproducible.
    if (!cv::imwrite(path.string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw IoError(fmt::format("cannot write PNG '{}'", path.string()));
    }
}

inline void write_png(const NumericArray &img, const std::filesystem::path &path) { write_png(quantize(img), path); }

}  // namespace aerothreat
