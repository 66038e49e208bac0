#pragma once

// Deterministic synthetic airborne-object images: category <-> shape, threat <-> hue.

#include "aerothreat/error.hpp"
#include "aerothreat/image_io.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace aerothreat {

struct SynthConfig {
    LabelSpace label_space = aodta_label_space();
    std::size_t per_category = 100;
    int image_size = 32;
    std::uint64_t seed = 0;
};

struct SynthImage {
    std::size_t category = 0;
    ThreatLevel threat = ThreatLevel::Low;
    std::vector<std::string> attributes;
    RawImage image;
};

/// Descriptor that the default rules map back to `threat` for the given category.
/// Medium descriptors deliberately match no rule so the default level applies.
inline std::string synth_attribute(const std::string &category, ThreatLevel threat) {
    struct Row {
        const char *category, *low, *medium, *high;
    };
    static constexpr std::array<Row, 4> rows{{
        {"Airplane", "civilian", "transport", "fighter"},
        {"Drone", "hobby", "survey", "military"},
        {"Helicopter", "news", "utility", "attack"},
        {"Bird", "live", "unidentified", "military"},
    }};
    for (const auto &r : rows) {
        if (category == r.category) {
            return threat == ThreatLevel::Low ? r.low : threat == ThreatLevel::Medium ? r.medium : r.high;
        }
    }
    return threat == ThreatLevel::Low ? "civilian" : threat == ThreatLevel::Medium ? "unknown" : "military";
}

namespace detail {

inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h / 60.0)) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    return {r + m, g + m, b + m};
}

/// Shape membership in normalised coordinates (u, v in roughly [-1, 1]). Besides outline the
/// shapes differ clearly in covered area, which keeps them apart after global pooling.
inline bool inside_shape(std::size_t shape, double u, double v) {
    const double r = std::sqrt(u * u + v * v);
    switch (shape % 4) {
        case 0: return r < 0.4;                                     // small disc
        case 1: return std::abs(u) < 0.95 && std::abs(v) < 0.3;    // horizontal bar
        case 2: return r < 1.0 && r > 0.6;                          // ring
        default: return std::abs(u) < 0.9 && std::abs(v) < 0.9;    // large square
    }
}

}  // namespace detail

/// Hue centre per threat level: Low green, Medium blue, High red.
inline double synth_hue(ThreatLevel t) {
    switch (t) {
        case ThreatLevel::Low: return 120.0;
        case ThreatLevel::Medium: return 230.0;
        case ThreatLevel::High: return 0.0;
    }
    return 0.0;
}

inline RawImage render_synthetic(std::size_t shape, ThreatLevel threat, int size, Rng &rng) {
    RawImage img{size, size, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size * 3)};
    const double bg_level = rng.uniform(0.1, 0.2);
    const double bg_tilt = rng.uniform(-0.1, 0.1);
    const auto fg = detail::hsv_to_rgb(synth_hue(threat) + rng.uniform(-15.0, 15.0), rng.uniform(0.75, 1.0),
                                       rng.uniform(0.75, 1.0));
    const double half = size / 2.0;
    const double scale = half * rng.uniform(0.7, 0.8);
    const double cx = half + rng.uniform(-0.05, 0.05) * size;
    const double cy = half + rng.uniform(-0.05, 0.05) * size;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double u = (x + 0.25 + 0.5 * sx - cx) / scale;
                    const double v = (y + 0.25 + 0.5 * sy - cy) / scale;
                    hits += detail::inside_shape(shape, u, v) ? 1 : 0;
                }
            const double cover = hits / 4.0;
            const double bg = std::clamp(bg_level + bg_tilt * (y - half) / half + rng.uniform(-0.04, 0.04), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double val = cover * fg[c] + (1.0 - cover) * bg;
                img.pixels[(static_cast<std::size_t>(y) * size + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 1.0) * 255.0));
            }
        }
    }
    return img;
}

/// per_category images for each category; threats cycle Low, Medium, High within a category.
inline std::vector<SynthImage> generate_synthetic(const SynthConfig &config) {
    if (config.image_size < 8) throw ValidationError("synthetic image size must be at least 8");
    std::vector<SynthImage> out;
    out.reserve(config.label_space.size() * config.per_category);
    for (std::size_t c = 0; c < config.label_space.size(); ++c) {
        for (std::size_t i = 0; i < config.per_category; ++i) {
            Rng rng(derive_seed(config.seed, c * 1000003ULL + i));
            SynthImage s;
            s.category = c;
            s.threat = threat_from_index(i % kThreatLevelCount);
            s.attributes = {synth_attribute(config.label_space.members()[c], s.threat)};
            s.image = render_synthetic(c, s.threat, config.image_size, rng);
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Writes <dir>/<Category>/img_NNNNN.png plus an attributes.csv sidecar per category.
inline void write_synthetic_dataset(const SynthConfig &config, const std::filesystem::path &dir) {
    namespace fs = std::filesystem;
    const auto images = generate_synthetic(config);
    std::vector<std::ofstream> sidecars;
    for (const auto &cat : config.label_space.members()) {
        fs::create_directories(dir / cat);
        sidecars.emplace_back(dir / cat / "attributes.csv", std::ios::binary);
        if (!sidecars.back()) throw IoError(fmt::format("cannot write '{}'", (dir / cat).string()));
        sidecars.back() << "filename,attributes\n";
    }
    std::vector<std::size_t> counter(config.label_space.size(), 0);
    for (const auto &s : images) {
        const std::string file = fmt::format("img_{:05d}.png", counter[s.category]++);
        write_png(s.image, dir / config.label_space.members()[s.category] / file);
        sidecars[s.category] << file << ',' << s.attributes.front() << '\n';
    }
}

}  // namespace aerothreat
