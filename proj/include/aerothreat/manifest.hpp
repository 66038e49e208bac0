#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/labels.hpp"

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

enum class Provenance { Original, Augmented };

inline std::string to_string(Provenance p) { return p == Provenance::Original ? "original" : "augmented"; }

inline Provenance parse_provenance(std::string_view s) {
    if (s == "original") return Provenance::Original;
    if (s == "augmented") return Provenance::Augmented;
    throw ValidationError(fmt::format("unknown provenance '{}'", s));
}

/// One catalogued image with its labels and lineage.
struct ImageRecord {
    std::string id;
    std::string source_dataset;
    std::string path;
    int width = 0;
    int height = 0;
    std::string category;
    std::optional<ThreatLevel> threat;
    std::vector<std::string> attributes;
    Provenance provenance = Provenance::Original;
    std::optional<std::string> parent_id;
    std::optional<std::string> augmentation_desc;
    std::string content_hash;

    [[nodiscard]] bool is_augmented() const noexcept { return provenance == Provenance::Augmented; }

    friend bool operator==(const ImageRecord &, const ImageRecord &) = default;
};

enum class Split { Train, Test };

inline std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

/// Train/test partition. Train order is the (possibly shuffled) presentation order.
struct SplitAssignments {
    std::vector<std::string> train;
    std::vector<std::string> test;

    [[nodiscard]] std::map<std::string, Split> by_id() const {
        std::map<std::string, Split> out;
        for (const auto &id : train) out.emplace(id, Split::Train);
        for (const auto &id : test) out.emplace(id, Split::Test);
        return out;
    }

    friend bool operator==(const SplitAssignments &, const SplitAssignments &) = default;
};

struct DatasetManifest {
    std::string name;
    LabelSpace label_space;
    std::vector<ImageRecord> records;
    std::optional<SplitAssignments> split_assignments;
    /// Free-form processing notes (e.g. whether balancing ran before splitting).
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    [[nodiscard]] const ImageRecord *find(std::string_view id) const {
        for (const auto &r : records) {
            if (r.id == id) return &r;
        }
        return nullptr;
    }

    friend bool operator==(const DatasetManifest &, const DatasetManifest &) = default;
};

/// Per-category record counts in label-space order.
struct CategoryCounts {
    LabelSpace label_space;
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    [[nodiscard]] std::size_t operator[](std::string_view label) const { return counts.at(label_space.index_of(label)); }
    [[nodiscard]] std::size_t max() const {
        std::size_t m = 0;
        for (auto c : counts) m = std::max(m, c);
        return m;
    }
};

inline CategoryCounts manifest_counts(const DatasetManifest &manifest) {
    CategoryCounts out{manifest.label_space, std::vector<std::size_t>(manifest.label_space.size(), 0)};
    for (const auto &r : manifest.records) ++out.counts[manifest.label_space.index_of(r.category)];
    return out;
}

/// Checks every manifest invariant; throws ValidationError on the first violation.
inline void validate_manifest(const DatasetManifest &m) {
    std::unordered_map<std::string, const ImageRecord *> by_id;
    by_id.reserve(m.records.size());
    for (const auto &r : m.records) {
        if (r.id.empty()) throw ValidationError("record with empty id");
        if (!by_id.emplace(r.id, &r).second) throw ValidationError(fmt::format("duplicate record id '{}'", r.id));
        if (!m.label_space.contains(r.category)) {
            throw ValidationError(fmt::format("record '{}' has category '{}' outside label space '{}'", r.id,
                                              r.category, m.label_space.name()));
        }
        const bool aug = r.is_augmented();
        if (aug != r.parent_id.has_value() || aug != r.augmentation_desc.has_value()) {
            throw ValidationError(
                fmt::format("record '{}': provenance, parent_id and augmentation_desc disagree", r.id));
        }
    }
    for (const auto &r : m.records) {
        if (!r.parent_id) continue;
        auto it = by_id.find(*r.parent_id);
        if (it == by_id.end()) {
            throw ValidationError(fmt::format("record '{}' names missing parent '{}'", r.id, *r.parent_id));
        }
        const ImageRecord &parent = *it->second;
        if (parent.is_augmented()) {
            throw ValidationError(fmt::format("record '{}' has augmented parent '{}'", r.id, parent.id));
        }
        if (parent.category != r.category || parent.threat != r.threat) {
            throw ValidationError(fmt::format("record '{}' labels differ from parent '{}'", r.id, parent.id));
        }
    }
    if (m.split_assignments) {
        std::unordered_set<std::string> seen;
        auto check = [&](const std::vector<std::string> &ids) {
            for (const auto &id : ids) {
                if (!by_id.count(id)) throw ValidationError(fmt::format("split names unknown record '{}'", id));
                if (!seen.insert(id).second) throw ValidationError(fmt::format("record '{}' split twice", id));
            }
        };
        check(m.split_assignments->train);
        check(m.split_assignments->test);
        if (seen.size() != m.records.size()) {
            throw ValidationError(fmt::format("split covers {} of {} records", seen.size(), m.records.size()));
        }
    }
}

/// Records of one split, in split order (train order is the shuffled presentation order).
inline std::vector<ImageRecord> split_records(const DatasetManifest &m, Split which) {
    if (!m.split_assignments) throw ValidationError(fmt::format("manifest '{}' has no split", m.name));
    std::unordered_map<std::string, const ImageRecord *> by_id;
    for (const auto &r : m.records) by_id.emplace(r.id, &r);
    const auto &ids = which == Split::Train ? m.split_assignments->train : m.split_assignments->test;
    std::vector<ImageRecord> out;
    out.reserve(ids.size());
    for (const auto &id : ids) out.push_back(*by_id.at(id));
    return out;
}

/// Sub-manifest holding only the records of one split (no split assignments).
inline DatasetManifest split_manifest(const DatasetManifest &m, Split which) {
    DatasetManifest out{m.name + "/" + to_string(which), m.label_space, split_records(m, which), std::nullopt,
                        m.metadata};
    return out;
}

// ---------------------------------------------------------------------------
// JSON Lines serialization: a header line, then one record per line.

namespace detail {

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T> &v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<std::string> optional_string(const nlohmann::ordered_json &j, const char *key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace detail

inline nlohmann::ordered_json record_to_json(const ImageRecord &r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["source_dataset"] = r.source_dataset;
    j["path"] = r.path;
    j["width"] = r.width;
    j["height"] = r.height;
    j["category"] = r.category;
    j["threat"] = r.threat ? nlohmann::ordered_json(to_string(*r.threat)) : nlohmann::ordered_json(nullptr);
    j["attributes"] = r.attributes;
    j["provenance"] = to_string(r.provenance);
    j["parent_id"] = detail::optional_json(r.parent_id);
    j["augmentation_desc"] = detail::optional_json(r.augmentation_desc);
    j["content_hash"] = r.content_hash;
    return j;
}

inline ImageRecord record_from_json(const nlohmann::ordered_json &j) {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.source_dataset = j.at("source_dataset").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    r.category = j.at("category").get<std::string>();
    if (auto t = detail::optional_string(j, "threat")) r.threat = parse_threat_level(*t);
    r.attributes = j.at("attributes").get<std::vector<std::string>>();
    r.provenance = parse_provenance(j.at("provenance").get<std::string>());
    r.parent_id = detail::optional_string(j, "parent_id");
    r.augmentation_desc = detail::optional_string(j, "augmentation_desc");
    r.content_hash = j.at("content_hash").get<std::string>();
    return r;
}

inline nlohmann::ordered_json manifest_header(const DatasetManifest &m) {
    nlohmann::ordered_json h;
    h["name"] = m.name;
    h["label_space"] = {{"name", m.label_space.name()}, {"members", m.label_space.members()}};
    const auto counts = manifest_counts(m);
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < counts.counts.size(); ++i) c[m.label_space.members()[i]] = counts.counts[i];
    h["counts"] = c;
    if (m.split_assignments) {
        h["split_assignments"] = {{"train", m.split_assignments->train}, {"test", m.split_assignments->test}};
    }
    if (!m.metadata.empty()) h["metadata"] = m.metadata;
    return h;
}

inline void write_manifest_jsonl(std::ostream &out, const DatasetManifest &m) {
    out << manifest_header(m).dump() << '\n';
    for (const auto &r : m.records) out << record_to_json(r).dump() << '\n';
}

inline std::string manifest_to_jsonl(const DatasetManifest &m) {
    std::ostringstream os;
    write_manifest_jsonl(os, m);
    return os.str();
}

inline DatasetManifest read_manifest_jsonl(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("manifest is empty (missing header line)");
    DatasetManifest m;
    nlohmann::ordered_json h;
    try {
        h = nlohmann::ordered_json::parse(line);
        m.name = h.at("name").get<std::string>();
        const auto &ls = h.at("label_space");
        m.label_space = LabelSpace(ls.at("name").get<std::string>(), ls.at("members").get<std::vector<std::string>>());
        if (h.contains("split_assignments")) {
            const auto &s = h.at("split_assignments");
            m.split_assignments = SplitAssignments{s.at("train").get<std::vector<std::string>>(),
                                                   s.at("test").get<std::vector<std::string>>()};
        }
        if (h.contains("metadata")) m.metadata = h.at("metadata");
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                m.records.push_back(record_from_json(nlohmann::ordered_json::parse(line)));
            } catch (const nlohmann::json::exception &e) {
                throw ValidationError(fmt::format("manifest line {}: {}", lineno, e.what()));
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("manifest header: {}", e.what()));
    }
    if (h.contains("counts")) {
        const auto counts = manifest_counts(m);
        for (const auto &[label, cached] : h.at("counts").items()) {
            if (cached.get<std::size_t>() != counts[label]) {
                throw ValidationError(fmt::format("cached count for '{}' is {} but manifest holds {}", label,
                                                  cached.get<std::size_t>(), counts[label]));
            }
        }
    }
    validate_manifest(m);
    return m;
}

inline DatasetManifest manifest_from_jsonl(const std::string &text) {
    std::istringstream is(text);
    return read_manifest_jsonl(is);
}

/// Writes the manifest with record paths made relative to the manifest's directory.
inline void save_manifest(const DatasetManifest &m, const std::filesystem::path &file) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::absolute(file).parent_path();
    std::error_code ec;
    fs::create_directories(dir, ec);
    DatasetManifest rel = m;
    for (auto &r : rel.records) {
        fs::path p(r.path);
        if (p.is_absolute()) r.path = p.lexically_normal().lexically_relative(dir.lexically_normal()).generic_string();
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write manifest '{}'", file.string()));
    write_manifest_jsonl(out, rel);
    if (!out) throw IoError(fmt::format("failed writing manifest '{}'", file.string()));
}

/// Reads a manifest, resolving relative record paths against the manifest's directory.
inline DatasetManifest load_manifest(const std::filesystem::path &file) {
    namespace fs = std::filesystem;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read manifest '{}'", file.string()));
    DatasetManifest m = read_manifest_jsonl(in);
    const fs::path dir = fs::absolute(file).parent_path();
    for (auto &r : m.records) {
        fs::path p(r.path);
        if (p.is_relative()) r.path = (dir / p).lexically_normal().string();
    }
    return m;
}

}  // namespace aerothreat
