#pragma once

#include "aerothreat/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace aerothreat {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

/// Threat levels in their fixed order Low < Medium < High.
enum class ThreatLevel : int { Low = 0, Medium = 1, High = 2 };

inline constexpr std::size_t kThreatLevelCount = 3;
inline constexpr std::array<ThreatLevel, kThreatLevelCount> kThreatLevels{ThreatLevel::Low, ThreatLevel::Medium,
                                                                           ThreatLevel::High};

inline constexpr std::size_t threat_index(ThreatLevel level) noexcept { return static_cast<std::size_t>(level); }

inline std::string to_string(ThreatLevel level) {
    switch (level) {
        case ThreatLevel::Low: return "Low";
        case ThreatLevel::Medium: return "Medium";
        case ThreatLevel::High: return "High";
    }
    return "?";
}

/// Case-insensitive parse of "low" / "medium" / "high".
inline ThreatLevel parse_threat_level(std::string_view text) {
    const std::string s = to_lower(text);
    if (s == "low") return ThreatLevel::Low;
    if (s == "medium") return ThreatLevel::Medium;
    if (s == "high") return ThreatLevel::High;
    throw ValidationError(fmt::format("unknown threat level '{}'", text));
}

inline ThreatLevel threat_from_index(std::size_t i) {
    if (i >= kThreatLevelCount) throw ValidationError(fmt::format("threat index {} out of range", i));
    return static_cast<ThreatLevel>(i);
}

inline std::vector<std::string> threat_label_names() {
    return {to_string(ThreatLevel::Low), to_string(ThreatLevel::Medium), to_string(ThreatLevel::High)};
}

/// A named, ordered, immutable set of category labels (e.g. AVD or AODTA).
class LabelSpace {
public:
    LabelSpace() = default;

    LabelSpace(std::string name, std::vector<std::string> members)
        : name_(std::move(name)), members_(std::move(members)) {
        if (members_.size() < 2) {
            throw ValidationError(fmt::format("label space '{}' needs at least 2 members, got {}", name_,
                                              members_.size()));
        }
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (members_[i].empty()) throw ValidationError(fmt::format("label space '{}' has an empty member", name_));
            for (std::size_t j = 0; j < i; ++j) {
                if (members_[i] == members_[j]) {
                    throw ValidationError(
                        fmt::format("label space '{}' has duplicate member '{}'", name_, members_[i]));
                }
            }
        }
    }

    [[nodiscard]] const std::string &name() const noexcept { return name_; }
    [[nodiscard]] const std::vector<std::string> &members() const noexcept { return members_; }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }

    [[nodiscard]] bool contains(std::string_view label) const {
        return std::find(members_.begin(), members_.end(), label) != members_.end();
    }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view label) const {
        auto it = std::find(members_.begin(), members_.end(), label);
        if (it == members_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - members_.begin());
    }

    [[nodiscard]] std::size_t index_of(std::string_view label) const {
        if (auto i = find(label)) return *i;
        throw ValidationError(fmt::format("'{}' is not a member of label space '{}'", label, name_));
    }

    friend bool operator==(const LabelSpace &, const LabelSpace &) = default;

private:
    std::string name_;
    std::vector<std::string> members_;
};

inline LabelSpace make_label_space(std::string name, std::vector<std::string> members) {
    return LabelSpace(std::move(name), std::move(members));
}

/// The two label spaces used by the reference datasets.
inline LabelSpace avd_label_space() { return LabelSpace("AVD", {"Airplane", "Drone", "Helicopter", "UAV"}); }
inline LabelSpace aodta_label_space() { return LabelSpace("AODTA", {"Airplane", "Drone", "Helicopter", "Bird"}); }

}  // namespace aerothreat
