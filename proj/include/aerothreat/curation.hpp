#pragma once

#include "aerothreat/augment.hpp"
#include "aerothreat/error.hpp"
#include "aerothreat/image_io.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/manifest.hpp"
#include "aerothreat/parallel.hpp"
#include "aerothreat/preprocess.hpp"
#include "aerothreat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

namespace aerothreat {

// ---------------------------------------------------------------------------
// Ingestion

/// Name of the optional per-directory sidecar listing "filename,attr1;attr2" lines.
inline constexpr const char *kAttributesFile = "attributes.csv";

struct IngestResult {
    DatasetManifest manifest;
    std::size_t added = 0;
    std::vector<std::string> unreadable;  // "path: reason"
};

namespace detail {

inline std::vector<std::string> split_list(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        auto b = item.find_first_not_of(" \t\r");
        auto e = item.find_last_not_of(" \t\r");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline std::map<std::string, std::vector<std::string>> read_attribute_sidecar(const std::filesystem::path &dir) {
    std::map<std::string, std::vector<std::string>> out;
    std::ifstream in(dir / kAttributesFile);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        std::string file = line.substr(0, comma);
        if (file == "filename") continue;
        out[file] = split_list(line.substr(comma + 1), ';');
    }
    return out;
}

inline std::string unique_id(const std::string &base, const std::unordered_set<std::string> &taken) {
    if (!taken.count(base)) return base;
    for (std::size_t n = 2;; ++n) {
        std::string candidate = fmt::format("{}#{}", base, n);
        if (!taken.count(candidate)) return candidate;
    }
}

}  // namespace detail

/// Adds one original record per decodable PNG/JPEG file in `directory` (non-recursive,
/// filename order). Undecodable files are reported in the result, not thrown.
inline IngestResult ingest_source(const std::filesystem::path &directory, const std::string &source_name,
                                  const std::string &category, DatasetManifest manifest,
                                  const std::vector<std::string> &extra_attributes = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw IoError(fmt::format("source directory '{}' does not exist", directory.string()));
    if (!manifest.label_space.contains(category)) {
        throw ValidationError(fmt::format("category '{}' is not in label space '{}'", category,
                                          manifest.label_space.name()));
    }
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const auto sidecar = detail::read_attribute_sidecar(directory);

    struct Slot {
        std::optional<ImageRecord> record;
        std::string error;
    };
    std::vector<Slot> slots(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        try {
            RawImage img = decode_image(files[i]);
            ImageRecord r;
            r.source_dataset = source_name;
            r.path = fs::absolute(files[i]).lexically_normal().string();
            r.width = img.width;
            r.height = img.height;
            r.category = category;
            r.content_hash = content_hash(img);
            slots[i].record = std::move(r);
        } catch (const Error &e) {
            slots[i].error = e.what();
        }
    });

    IngestResult result;
    std::unordered_set<std::string> taken;
    for (const auto &r : manifest.records) taken.insert(r.id);
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!slots[i].record) {
            result.unreadable.push_back(fmt::format("{}: {}", files[i].string(), slots[i].error));
            continue;
        }
        ImageRecord r = std::move(*slots[i].record);
        const std::string fname = files[i].filename().string();
        r.id = detail::unique_id(source_name + "/" + fname, taken);
        taken.insert(r.id);
        if (auto it = sidecar.find(fname); it != sidecar.end()) r.attributes = it->second;
        r.attributes.insert(r.attributes.end(), extra_attributes.begin(), extra_attributes.end());
        manifest.records.push_back(std::move(r));
        ++result.added;
    }
    if (result.added == 0) {
        throw ValidationError(fmt::format("no readable images in '{}' ({} candidate files)", directory.string(),
                                          files.size()));
    }
    manifest.split_assignments.reset();
    result.manifest = std::move(manifest);
    return result;
}

// ---------------------------------------------------------------------------
// Deduplication

struct DedupeResult {
    DatasetManifest manifest;
    std::size_t removed = 0;
};

/// Collapses original records sharing a content hash to the lexicographically smallest id.
/// Augmented children of a removed record are re-parented onto the survivor when it has the
/// same category, and dropped otherwise.
inline DedupeResult dedupe(const DatasetManifest &manifest) {
    std::unordered_map<std::string, std::string> survivor_by_hash;
    for (const auto &r : manifest.records) {
        if (r.is_augmented()) continue;
        if (r.content_hash.empty()) throw ValidationError(fmt::format("record '{}' has no content hash", r.id));
        auto [it, inserted] = survivor_by_hash.emplace(r.content_hash, r.id);
        if (!inserted && r.id < it->second) it->second = r.id;
    }
    std::unordered_map<std::string, std::string> replaced;  // removed id -> survivor id
    for (const auto &r : manifest.records) {
        if (r.is_augmented()) continue;
        const std::string &keep = survivor_by_hash.at(r.content_hash);
        if (keep != r.id) replaced.emplace(r.id, keep);
    }
    DedupeResult out;
    out.manifest = manifest;
    out.manifest.records.clear();
    std::unordered_map<std::string, const ImageRecord *> by_id;
    for (const auto &r : manifest.records) by_id.emplace(r.id, &r);
    std::unordered_set<std::string> dropped;
    for (const auto &r : manifest.records) {
        if (!r.is_augmented()) {
            if (replaced.count(r.id)) {
                dropped.insert(r.id);
                continue;
            }
            out.manifest.records.push_back(r);
            continue;
        }
        ImageRecord child = r;
        if (auto it = replaced.find(*r.parent_id); it != replaced.end()) {
            const ImageRecord &survivor = *by_id.at(it->second);
            if (survivor.category != child.category) {
                dropped.insert(r.id);
                continue;
            }
            child.parent_id = survivor.id;
            child.threat = survivor.threat;
        }
        out.manifest.records.push_back(std::move(child));
    }
    out.removed = dropped.size();
    if (out.manifest.split_assignments) {
        auto prune = [&](std::vector<std::string> &ids) {
            std::erase_if(ids, [&](const std::string &id) { return dropped.count(id) > 0; });
        };
        prune(out.manifest.split_assignments->train);
        prune(out.manifest.split_assignments->test);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stratified split

struct SplitConfig {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool shuffle_train = true;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw ValidationError(fmt::format("train_fraction {} must lie in (0, 1)", train_fraction));
        }
    }
};

/// Train count for a category: round-half-up of fraction * count.
inline std::size_t stratified_train_count(double train_fraction, std::size_t count) {
    return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(count) + 0.5));
}

/// Per-category random partition; returns a copy with split_assignments set.
inline DatasetManifest stratified_split(const DatasetManifest &manifest, const SplitConfig &config) {
    config.validate();
    const auto &space = manifest.label_space;
    std::vector<std::vector<std::size_t>> members(space.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        members[space.index_of(manifest.records[i].category)].push_back(i);
    }
    for (std::size_t c = 0; c < space.size(); ++c) {
        if (members[c].size() < 2) {
            throw ValidationError(fmt::format("category '{}' has {} records; splitting needs at least 2",
                                              space.members()[c], members[c].size()));
        }
    }
    std::vector<char> is_train(manifest.records.size(), 0);
    std::vector<std::size_t> train_order;
    for (std::size_t c = 0; c < space.size(); ++c) {
        std::vector<std::size_t> pick = members[c];
        Rng rng(derive_seed(config.seed, hash_text(space.members()[c])));
        rng.shuffle(pick);
        pick.resize(stratified_train_count(config.train_fraction, members[c].size()));
        for (auto i : pick) is_train[i] = 1;
    }
    SplitAssignments split;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (is_train[i]) {
            train_order.push_back(i);
        } else {
            split.test.push_back(manifest.records[i].id);
        }
    }
    if (config.shuffle_train) {
        Rng rng(derive_seed(config.seed, hash_text("train-order")));
        rng.shuffle(train_order);
    }
    for (auto i : train_order) split.train.push_back(manifest.records[i].id);

    DatasetManifest out = manifest;
    out.split_assignments = std::move(split);
    out.metadata["split"] = {{"train_fraction", config.train_fraction},
                             {"seed", config.seed},
                             {"shuffle_train", config.shuffle_train}};
    return out;
}

// ---------------------------------------------------------------------------
// Balancing

/// Image access used by balancing: load a parent as a preprocessed array, persist a
/// generated child and return the path to record.
struct BalanceIo {
    std::function<NumericArray(const ImageRecord &)> load;
    std::function<std::string(const ImageRecord &, const NumericArray &)> store;
};

/// Loads parents from their paths; writes children as PNG under out_dir/<category>/.
inline BalanceIo file_balance_io(const std::filesystem::path &out_dir) {
    namespace fs = std::filesystem;
    const fs::path root = fs::absolute(out_dir).lexically_normal();
    BalanceIo io;
    io.load = [](const ImageRecord &r) { return load_preprocessed(r.path); };
    io.store = [root](const ImageRecord &child, const NumericArray &img) {
        std::string stem = child.id;
        for (auto &ch : stem) {
            if (ch == '/' || ch == '\\' || ch == '#' || ch == ':' || ch == ' ') ch = '_';
        }
        const fs::path p = root / child.category / (stem + ".png");
        write_png(img, p);
        return p.string();
    };
    return io;
}

/// Raises every category to the largest category's count with augmented copies of its
/// original records. Parents are chosen round-robin in record order; each child's
/// transform is drawn from a seed derived from params.seed and the child id.
inline DatasetManifest balance_by_augmentation(const DatasetManifest &manifest, const AugmentationParams &params,
                                               const BalanceIo &io) {
    params.validate();
    if (manifest.split_assignments) {
        throw ValidationError("balance_by_augmentation expects an unsplit manifest (balancing precedes splitting)");
    }
    const auto &space = manifest.label_space;
    const auto counts = manifest_counts(manifest);
    std::vector<std::vector<std::size_t>> originals(space.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto &r = manifest.records[i];
        if (!r.is_augmented()) originals[space.index_of(r.category)].push_back(i);
    }
    for (std::size_t c = 0; c < space.size(); ++c) {
        if (counts.counts[c] == 0) {
            throw ValidationError(fmt::format("category '{}' is empty; cannot balance", space.members()[c]));
        }
    }
    const std::size_t target = counts.max();

    struct Job {
        std::size_t parent;
        std::size_t round;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < space.size(); ++c) {
        const std::size_t deficit = target - counts.counts[c];
        if (deficit == 0) continue;
        if (originals[c].empty()) {
            throw ValidationError(
                fmt::format("category '{}' has no original records to augment", space.members()[c]));
        }
        for (std::size_t k = 0; k < deficit; ++k) {
            jobs.push_back({originals[c][k % originals[c].size()], k / originals[c].size()});
        }
    }

    // Parents are decoded once each.
    std::vector<std::size_t> parent_list;
    std::unordered_map<std::size_t, std::size_t> parent_slot;
    for (const auto &j : jobs) {
        if (parent_slot.emplace(j.parent, parent_list.size()).second) parent_list.push_back(j.parent);
    }
    std::vector<NumericArray> parent_images(parent_list.size());
    parallel_for(parent_list.size(),
                 [&](std::size_t i) { parent_images[i] = io.load(manifest.records[parent_list[i]]); });

    std::unordered_set<std::string> taken;
    for (const auto &r : manifest.records) taken.insert(r.id);
    std::vector<ImageRecord> children(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const ImageRecord &parent = manifest.records[jobs[i].parent];
        ImageRecord &child = children[i];
        child = parent;
        child.id = detail::unique_id(fmt::format("{}#aug{}", parent.id, jobs[i].round + 1), taken);
        taken.insert(child.id);
    }
    parallel_for(jobs.size(), [&](std::size_t i) {
        const ImageRecord &parent = manifest.records[jobs[i].parent];
        ImageRecord &child = children[i];
        const std::uint64_t draw_seed = derive_seed(params.seed, hash_text(child.id));
        const AugmentationDraw draw = draw_augmentation(params, draw_seed);
        NumericArray img = apply_augmentation(parent_images[parent_slot.at(jobs[i].parent)], draw);
        child.provenance = Provenance::Augmented;
        child.parent_id = parent.id;
        child.augmentation_desc = draw.describe();
        child.width = static_cast<int>(img.extent(1));
        child.height = static_cast<int>(img.extent(0));
        child.content_hash = content_hash(quantize(img));
        child.path = io.store(child, img);
    });

    DatasetManifest out = manifest;
    out.records.insert(out.records.end(), std::make_move_iterator(children.begin()),
                       std::make_move_iterator(children.end()));
    out.metadata["balancing"] = {{"target_per_category", target},
                                 {"added", jobs.size()},
                                 {"seed", params.seed},
                                 {"before_split", true}};
    return out;
}

}  // namespace aerothreat
