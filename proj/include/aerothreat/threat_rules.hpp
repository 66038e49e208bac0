#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

inline constexpr const char *kAnyCategory = "*";

struct ThreatRule {
    std::string category;           // label name or "*"
    std::string attribute_pattern;  // case-insensitive substring; empty matches any record
    ThreatLevel level = ThreatLevel::Medium;
    int priority = 0;

    [[nodiscard]] bool matches(const ImageRecord &record) const {
        if (category != kAnyCategory && category != record.category) return false;
        if (attribute_pattern.empty()) return true;
        const std::string needle = to_lower(attribute_pattern);
        return std::any_of(record.attributes.begin(), record.attributes.end(), [&](const std::string &a) {
            return to_lower(a).find(needle) != std::string::npos;
        });
    }

    friend bool operator==(const ThreatRule &, const ThreatRule &) = default;
};

/// Rules evaluated by descending priority; the first match decides.
class RuleSet {
public:
    RuleSet() = default;

    explicit RuleSet(std::vector<ThreatRule> rules, std::optional<ThreatLevel> default_level = std::nullopt)
        : rules_(std::move(rules)), default_level_(default_level) {
        std::set<int> seen;
        for (const auto &r : rules_) {
            if (!seen.insert(r.priority).second) {
                throw ValidationError(fmt::format("duplicate rule priority {}", r.priority));
            }
        }
        std::sort(rules_.begin(), rules_.end(),
                  [](const ThreatRule &a, const ThreatRule &b) { return a.priority > b.priority; });
    }

    [[nodiscard]] const std::vector<ThreatRule> &rules() const noexcept { return rules_; }
    [[nodiscard]] const std::optional<ThreatLevel> &default_level() const noexcept { return default_level_; }

    [[nodiscard]] const ThreatRule *first_match(const ImageRecord &record) const {
        for (const auto &r : rules_) {
            if (r.matches(record)) return &r;
        }
        return nullptr;
    }

private:
    std::vector<ThreatRule> rules_;
    std::optional<ThreatLevel> default_level_;
};

/// The eight example annotation rows (High rules outrank Low ones) with a Medium default.
inline RuleSet default_ruleset() {
    return RuleSet(
        {
            {"Airplane", "fighter", ThreatLevel::High, 80},
            {"Bird", "military", ThreatLevel::High, 70},
            {"Drone", "military", ThreatLevel::High, 60},
            {"Helicopter", "attack", ThreatLevel::High, 50},
            {"Airplane", "civilian", ThreatLevel::Low, 40},
            {"Bird", "live", ThreatLevel::Low, 30},
            {"Drone", "hobby", ThreatLevel::Low, 20},
            {"Helicopter", "news", ThreatLevel::Low, 10},
        },
        ThreatLevel::Medium);
}

inline ThreatLevel annotate(const ImageRecord &record, const RuleSet &ruleset) {
    if (const ThreatRule *rule = ruleset.first_match(record)) return rule->level;
    if (ruleset.default_level()) return *ruleset.default_level();
    throw UnannotatableError(fmt::format("no threat rule matches record '{}' (category {}, attributes [{}])",
                                         record.id, record.category, fmt::join(record.attributes, ", ")));
}

/// Thrown by annotate_manifest; carries every record id that could not be annotated.
class UnannotatableRecords : public UnannotatableError {
public:
    explicit UnannotatableRecords(std::vector<std::string> ids)
        : UnannotatableError(fmt::format("{} record(s) matched no threat rule and no default level is set: {}",
                                         ids.size(), fmt::join(ids, ", "))),
          ids_(std::move(ids)) {}

    [[nodiscard]] const std::vector<std::string> &ids() const noexcept { return ids_; }

private:
    std::vector<std::string> ids_;
};

/// Annotates originals by rule; augmented records take their parent's level.
inline DatasetManifest annotate_manifest(const DatasetManifest &manifest, const RuleSet &ruleset) {
    DatasetManifest out = manifest;
    std::unordered_map<std::string, ThreatLevel> assigned;
    std::vector<std::string> failed;
    for (auto &r : out.records) {
        if (r.is_augmented()) continue;
        try {
            r.threat = annotate(r, ruleset);
            assigned.emplace(r.id, *r.threat);
        } catch (const UnannotatableError &) {
            failed.push_back(r.id);
        }
    }
    for (auto &r : out.records) {
        if (!r.is_augmented()) continue;
        auto it = assigned.find(*r.parent_id);
        if (it == assigned.end()) {
            failed.push_back(r.id);
            continue;
        }
        r.threat = it->second;
    }
    if (!failed.empty()) throw UnannotatableRecords(std::move(failed));
    return out;
}

// ---------------------------------------------------------------------------
// Rules file: either a JSON array of rules, or {"rules": [...], "default_level": "Medium"}.

inline RuleSet ruleset_from_json(const nlohmann::json &j) {
    try {
        const nlohmann::json *rules = &j;
        std::optional<ThreatLevel> def;
        if (j.is_object()) {
            rules = &j.at("rules");
            if (j.contains("default_level") && !j.at("default_level").is_null()) {
                def = parse_threat_level(j.at("default_level").get<std::string>());
            }
        }
        if (!rules->is_array()) throw ValidationError("rules must be a JSON array");
        std::vector<ThreatRule> out;
        for (const auto &r : *rules) {
            out.push_back({r.at("category").get<std::string>(), r.value("attribute_pattern", std::string{}),
                           parse_threat_level(r.at("level").get<std::string>()), r.at("priority").get<int>()});
        }
        return RuleSet(std::move(out), def);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("invalid rules file: {}", e.what()));
    }
}

inline nlohmann::json ruleset_to_json(const RuleSet &rs) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto &r : rs.rules()) {
        rules.push_back({{"category", r.category},
                         {"attribute_pattern", r.attribute_pattern},
                         {"level", to_string(r.level)},
                         {"priority", r.priority}});
    }
    nlohmann::json j{{"rules", rules}};
    j["default_level"] = rs.default_level() ? nlohmann::json(to_string(*rs.default_level())) : nlohmann::json(nullptr);
    return j;
}

inline RuleSet load_ruleset(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read rules file '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("rules file '{}': {}", path.string(), e.what()));
    }
    return ruleset_from_json(j);
}

}  // namespace aerothreat
