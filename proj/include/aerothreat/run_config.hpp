#pragma once

// One JSON document configures every pipeline command; each command reads the sections it needs.
//
//   {
//     "split":        {"train_fraction": 0.8, "seed": 0, "shuffle_train": true},
//     "augmentation": {"rotation_max": 20, ...},
//     "training":     {"learning_rate": 1e-4, "batch_size": 8, "epochs": 21, ...},
//     "network":      {"backbone": "standin", "frozen": false, "conv3x3_filters": 32, ...},
//     "rules":        "rules.json"
//   }

#include "aerothreat/curation.hpp"
#include "aerothreat/error.hpp"
#include "aerothreat/model.hpp"
#include "aerothreat/training.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

struct NetworkOptions {
    BackboneKind backbone = BackboneKind::SmallConvStandin;
    bool frozen = false;
    std::size_t upscale_factor = 2;
    std::size_t conv3x3_filters = 32;
    std::size_t conv1x1_filters = 64;

    [[nodiscard]] NetworkConfig network_config(const LabelSpace &categories) const {
        NetworkConfig c;
        c.backbone.kind = backbone;
        c.backbone.frozen = frozen;
        c.upscale_factor = upscale_factor;
        c.conv3x3_filters = conv3x3_filters;
        c.conv1x1_filters = conv1x1_filters;
        c.categories = categories;
        c.validate();
        return c;
    }
};

struct RunConfig {
    SplitConfig split;
    AugmentationParams augmentation;
    TrainConfig training;
    NetworkOptions network;
    std::optional<std::filesystem::path> rules;

    /// One seed for every stochastic stage.
    void set_seed(std::uint64_t seed) {
        split.seed = seed;
        augmentation.seed = seed;
        training.seed = seed;
        training.augmentation.seed = seed;
    }
};

inline nlohmann::ordered_json network_options_to_json(const NetworkOptions &n) {
    return {{"backbone", to_string(n.backbone)},
            {"frozen", n.frozen},
            {"upscale_factor", n.upscale_factor},
            {"conv3x3_filters", n.conv3x3_filters},
            {"conv1x1_filters", n.conv1x1_filters}};
}

inline nlohmann::ordered_json run_config_to_json(const RunConfig &c) {
    nlohmann::ordered_json j;
    j["split"] = {{"train_fraction", c.split.train_fraction},
                  {"seed", c.split.seed},
                  {"shuffle_train", c.split.shuffle_train}};
    j["augmentation"] = augmentation_to_json(c.augmentation);
    j["training"] = train_config_to_json(c.training);
    j["network"] = network_options_to_json(c.network);
    j["rules"] = c.rules ? nlohmann::ordered_json(c.rules->generic_string()) : nlohmann::ordered_json(nullptr);
    return j;
}

/// Relative rule paths resolve against `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::ordered_json &j, const std::filesystem::path &base_dir = {}) {
    detail::reject_unknown_keys(j, {"split", "augmentation", "training", "network", "rules"}, "run config");
    RunConfig c;
    try {
        if (j.contains("split")) {
            const auto &s = j.at("split");
            detail::reject_unknown_keys(s, {"train_fraction", "seed", "shuffle_train"}, "split");
            detail::read_if(s, "train_fraction", c.split.train_fraction);
            detail::read_if(s, "seed", c.split.seed);
            detail::read_if(s, "shuffle_train", c.split.shuffle_train);
        }
        if (j.contains("network")) {
            const auto &n = j.at("network");
            detail::reject_unknown_keys(n, {"backbone", "frozen", "upscale_factor", "conv3x3_filters",
                                            "conv1x1_filters"},
                                        "network");
            if (n.contains("backbone")) c.network.backbone = parse_backbone_kind(n.at("backbone").get<std::string>());
            detail::read_if(n, "frozen", c.network.frozen);
            detail::read_if(n, "upscale_factor", c.network.upscale_factor);
            detail::read_if(n, "conv3x3_filters", c.network.conv3x3_filters);
            detail::read_if(n, "conv1x1_filters", c.network.conv1x1_filters);
        }
        if (j.contains("rules") && !j.at("rules").is_null()) {
            std::filesystem::path p = j.at("rules").get<std::string>();
            c.rules = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("run config: {}", e.what()));
    }
    if (j.contains("augmentation")) c.augmentation = augmentation_from_json(j.at("augmentation"));
    if (j.contains("training")) c.training = train_config_from_json(j.at("training"));
    c.split.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return run_config_from_json(j, path.parent_path());
}

}  // namespace aerothreat
