#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/manifest.hpp"
#include "aerothreat/model.hpp"
#include "aerothreat/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

/// counts(i, j) = samples with true label i predicted as j.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> labels)
        : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

    ConfusionMatrix(std::vector<std::string> labels, std::vector<std::size_t> counts)
        : labels_(std::move(labels)), counts_(std::move(counts)) {
        if (counts_.size() != labels_.size() * labels_.size()) {
            throw ValidationError("confusion counts must form a square matrix over the labels");
        }
    }

    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t operator()(std::size_t truth, std::size_t pred) const {
        return counts_[truth * labels_.size() + pred];
    }
    void add(std::size_t truth, std::size_t pred, std::size_t n = 1) { counts_[truth * labels_.size() + pred] += n; }

    [[nodiscard]] std::size_t row_sum(std::size_t i) const {
        std::size_t s = 0;
        for (std::size_t j = 0; j < size(); ++j) s += (*this)(i, j);
        return s;
    }
    [[nodiscard]] std::size_t column_sum(std::size_t j) const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < size(); ++i) s += (*this)(i, j);
        return s;
    }
    [[nodiscard]] std::size_t trace() const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < size(); ++i) s += (*this)(i, i);
        return s;
    }
    [[nodiscard]] std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts_) s += c;
        return s;
    }

    friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;

private:
    std::vector<std::string> labels_;
    std::vector<std::size_t> counts_;
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                        const std::vector<std::string> &labels) {
    if (truth.size() != pred.size()) {
        throw ValidationError(fmt::format("{} truth labels but {} predictions", truth.size(), pred.size()));
    }
    ConfusionMatrix cm(labels);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= labels.size() || pred[i] >= labels.size()) {
            throw ValidationError(fmt::format("label index out of range at sample {}", i));
        }
        cm.add(truth[i], pred[i]);
    }
    return cm;
}

inline ConfusionMatrix confusion_matrix(const std::vector<std::string> &truth, const std::vector<std::string> &pred,
                                        const std::vector<std::string> &labels) {
    if (truth.size() != pred.size()) {
        throw ValidationError(fmt::format("{} truth labels but {} predictions", truth.size(), pred.size()));
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
    auto lookup = [&](const std::string &l) {
        auto it = index.find(l);
        if (it == index.end()) throw ValidationError(fmt::format("unknown label '{}'", l));
        return it->second;
    };
    ConfusionMatrix cm(labels);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(lookup(truth[i]), lookup(pred[i]));
    return cm;
}

struct LabelMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;

    friend bool operator==(const LabelMetrics &, const LabelMetrics &) = default;
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const AverageMetrics &, const AverageMetrics &) = default;
};

struct ClassificationReport {
    std::vector<LabelMetrics> rows;
    double accuracy = 0.0;
    AverageMetrics macro_avg;
    AverageMetrics weighted_avg;
    std::size_t total_support = 0;

    friend bool operator==(const ClassificationReport &, const ClassificationReport &) = default;
};

/// Per-label precision / recall / F1 with the 0-on-zero-division convention, plus accuracy,
/// unweighted (macro) and support-weighted averages. Values are kept at full precision.
inline ClassificationReport classification_report(const ConfusionMatrix &cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw ValidationError("classification report of an empty confusion matrix");
    ClassificationReport rep;
    rep.total_support = total;
    rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    for (std::size_t i = 0; i < cm.size(); ++i) {
        LabelMetrics m;
        m.label = cm.labels()[i];
        m.support = cm.row_sum(i);
        const std::size_t predicted = cm.column_sum(i);
        const double tp = static_cast<double>(cm(i, i));
        m.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
        m.recall = m.support == 0 ? 0.0 : tp / static_cast<double>(m.support);
        m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        rep.rows.push_back(m);
    }
    const double k = static_cast<double>(cm.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto &m = rep.rows[i];
        const double w = static_cast<double>(m.support);
        rep.macro_avg.precision += m.precision;
        rep.macro_avg.recall += m.recall;
        rep.macro_avg.f1 += m.f1;
        rep.weighted_avg.precision += m.precision * w;
        rep.weighted_avg.recall += static_cast<double>(cm(i, i));  // recall · support, without rounding
        rep.weighted_avg.f1 += m.f1 * w;
    }
    rep.macro_avg.precision /= k;
    rep.macro_avg.recall /= k;
    rep.macro_avg.f1 /= k;
    const double t = static_cast<double>(total);
    rep.weighted_avg.precision /= t;
    rep.weighted_avg.recall /= t;
    rep.weighted_avg.f1 /= t;
    return rep;
}

// ---------------------------------------------------------------------------
// Model evaluation

enum class Head { Category, Threat };

inline std::string to_string(Head h) { return h == Head::Category ? "category" : "threat"; }

struct Evaluation {
    ConfusionMatrix confusion;
    ClassificationReport report;
    std::vector<std::size_t> predictions;
};

/// Argmax (lowest index on ties) of one head over a labelled set, then matrix and report.
inline Evaluation evaluate_model(const DualHeadNetwork &net, const LabeledImages &data, Head head,
                                 std::size_t batch_size = 32) {
    if (data.empty()) throw ValidationError("evaluation set is empty");
    const std::vector<std::string> labels =
        head == Head::Category ? net.config().categories.members() : threat_label_names();
    const auto &truth = head == Head::Category ? data.categories : data.threats;
    Evaluation ev;
    ev.predictions.reserve(data.size());
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, data.size());
        std::vector<const NumericArray *> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&data.images[i]);
        ForwardResult r = net.forward(stack_batch(std::span<const NumericArray *const>(ptrs)), false);
        const NumericArray &probs = head == Head::Category ? r.class_probs : r.threat_probs;
        const std::size_t k = probs.extent(1);
        for (std::size_t i = 0; i < end - start; ++i) {
            ev.predictions.push_back(argmax_row(probs.values().subspan(i * k, k)));
        }
    }
    ev.confusion = confusion_matrix(truth, ev.predictions, labels);
    ev.report = classification_report(ev.confusion);
    return ev;
}

inline Evaluation evaluate_model(const DualHeadNetwork &net, const DatasetManifest &test_manifest, Head head) {
    if (test_manifest.label_space != net.config().categories) {
        throw ValidationError(fmt::format("manifest label space '{}' [{}] does not match checkpoint label space "
                                          "'{}' [{}]",
                                          test_manifest.label_space.name(),
                                          fmt::join(test_manifest.label_space.members(), ","),
                                          net.config().categories.name(),
                                          fmt::join(net.config().categories.members(), ",")));
    }
    if (test_manifest.records.empty()) throw ValidationError("evaluation set is empty");
    return evaluate_model(net, load_labeled_images(test_manifest), head);
}

// ---------------------------------------------------------------------------
// Export

/// Two-decimal display with round-half-even applied to value·100.
inline std::string format_2dp(double v) {
    const double r = std::nearbyint(v * 100.0);
    const long long n = static_cast<long long>(r);
    const long long a = n < 0 ? -n : n;
    return fmt::format("{}{}.{:02d}", n < 0 ? "-" : "", a / 100, a % 100);
}

/// Text table: one row per label, then Accuracy, Macro Avg, Weighted Avg.
inline std::string format_report_table(const ClassificationReport &rep, std::string_view title = "Label") {
    std::size_t w0 = std::max<std::size_t>(title.size(), 12);
    for (const auto &r : rep.rows) w0 = std::max(w0, r.label.size());
    std::string out;
    out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", title, w0, "Precision", "Recall", "F1-Score", "Support");
    auto row = [&](std::string_view name, std::string p, std::string r, std::string f, std::size_t s) {
        out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", name, w0, p, r, f, s);
    };
    for (const auto &m : rep.rows) row(m.label, format_2dp(m.precision), format_2dp(m.recall), format_2dp(m.f1), m.support);
    row("Accuracy", "-", "-", format_2dp(rep.accuracy), rep.total_support);
    row("Macro Avg", format_2dp(rep.macro_avg.precision), format_2dp(rep.macro_avg.recall),
        format_2dp(rep.macro_avg.f1), rep.total_support);
    row("Weighted Avg", format_2dp(rep.weighted_avg.precision), format_2dp(rep.weighted_avg.recall),
        format_2dp(rep.weighted_avg.f1), rep.total_support);
    return out;
}

inline nlohmann::ordered_json report_to_json(const ClassificationReport &rep) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto &m : rep.rows) {
        rows.push_back({{"label", m.label},
                        {"precision", m.precision},
                        {"recall", m.recall},
                        {"f1", m.f1},
                        {"support", m.support}});
    }
    j["rows"] = rows;
    j["accuracy"] = rep.accuracy;
    auto avg = [](const AverageMetrics &a) {
        return nlohmann::ordered_json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
    };
    j["macro_avg"] = avg(rep.macro_avg);
    j["weighted_avg"] = avg(rep.weighted_avg);
    j["total_support"] = rep.total_support;
    return j;
}

inline ClassificationReport report_from_json(const nlohmann::ordered_json &j) {
    try {
        ClassificationReport rep;
        for (const auto &r : j.at("rows")) {
            rep.rows.push_back({r.at("label").get<std::string>(), r.at("precision").get<double>(),
                                r.at("recall").get<double>(), r.at("f1").get<double>(),
                                r.at("support").get<std::size_t>()});
        }
        rep.accuracy = j.at("accuracy").get<double>();
        auto avg = [](const nlohmann::ordered_json &a) {
            return AverageMetrics{a.at("precision").get<double>(), a.at("recall").get<double>(),
                                  a.at("f1").get<double>()};
        };
        rep.macro_avg = avg(j.at("macro_avg"));
        rep.weighted_avg = avg(j.at("weighted_avg"));
        rep.total_support = j.at("total_support").get<std::size_t>();
        return rep;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("malformed report JSON: {}", e.what()));
    }
}

inline std::string confusion_to_csv(const ConfusionMatrix &cm) {
    std::string out = "truth\\pred";
    for (const auto &l : cm.labels()) out += "," + l;
    out += '\n';
    for (std::size_t i = 0; i < cm.size(); ++i) {
        out += cm.labels()[i];
        for (std::size_t j = 0; j < cm.size(); ++j) out += fmt::format(",{}", cm(i, j));
        out += '\n';
    }
    return out;
}

struct ExportedFiles {
    std::filesystem::path json;
    std::filesystem::path text;
    std::filesystem::path confusion_csv;
};

namespace detail {
inline void write_text_file(const std::filesystem::path &p, const std::string &content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", p.string()));
    out << content;
    if (!out) throw IoError(fmt::format("failed writing '{}'", p.string()));
}
}  // namespace detail

/// Writes <dir>/report_<name>.json, <dir>/report_<name>.txt and <dir>/confusion_<name>.csv.
inline ExportedFiles export_report(const ClassificationReport &rep, const ConfusionMatrix &cm,
                                   const std::filesystem::path &dir, const std::string &name,
                                   std::string_view title = "Label") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!std::filesystem::is_directory(dir)) throw IoError(fmt::format("cannot create directory '{}'", dir.string()));
    ExportedFiles f{dir / ("report_" + name + ".json"), dir / ("report_" + name + ".txt"),
                    dir / ("confusion_" + name + ".csv")};
    detail::write_text_file(f.json, report_to_json(rep).dump(2) + "\n");
    detail::write_text_file(f.text, format_report_table(rep, title));
    detail::write_text_file(f.confusion_csv, confusion_to_csv(cm));
    return f;
}

// ---------------------------------------------------------------------------
// Prediction files: CSV with header "truth,pred" or "head,truth,pred".

struct PredictionSet {
    std::string head;  // "predictions" when the file has no head column
    std::vector<std::string> labels;
    std::vector<std::string> truth;
    std::vector<std::string> pred;
};

/// Label order: the given order if any; Low/Medium/High when every label is a threat level;
/// otherwise first appearance.
inline std::vector<std::string> infer_label_order(const std::vector<std::string> &truth,
                                                  const std::vector<std::string> &pred) {
    std::vector<std::string> seen;
    for (const auto *col : {&truth, &pred}) {
        for (const auto &l : *col) {
            if (std::find(seen.begin(), seen.end(), l) == seen.end()) seen.push_back(l);
        }
    }
    const bool all_threat = std::all_of(seen.begin(), seen.end(), [](const std::string &l) {
        const std::string s = to_lower(l);
        return s == "low" || s == "medium" || s == "high";
    });
    if (all_threat) {
        std::stable_sort(seen.begin(), seen.end(), [](const std::string &a, const std::string &b) {
            return threat_index(parse_threat_level(a)) < threat_index(parse_threat_level(b));
        });
    }
    return seen;
}

inline std::vector<PredictionSet> read_predictions_csv(std::istream &in,
                                                       const std::vector<std::string> &label_order = {}) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("predictions file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool with_head;
    if (line == "truth,pred") {
        with_head = false;
    } else if (line == "head,truth,pred") {
        with_head = true;
    } else {
        throw ValidationError(fmt::format("predictions header must be 'truth,pred' or 'head,truth,pred', got '{}'", line));
    }
    std::vector<PredictionSet> sets;
    auto set_for = [&](const std::string &head) -> PredictionSet & {
        for (auto &s : sets) {
            if (s.head == head) return s;
        }
        sets.push_back({head, {}, {}, {}});
        return sets.back();
    };
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream is(line);
        std::string cell;
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        if (cells.size() != (with_head ? 3u : 2u)) {
            throw ValidationError(fmt::format("predictions line {}: expected {} columns", lineno, with_head ? 3 : 2));
        }
        PredictionSet &s = set_for(with_head ? cells[0] : "predictions");
        s.truth.push_back(cells[with_head ? 1 : 0]);
        s.pred.push_back(cells[with_head ? 2 : 1]);
    }
    if (sets.empty()) throw ValidationError("predictions file has no rows");
    for (auto &s : sets) s.labels = label_order.empty() ? infer_label_order(s.truth, s.pred) : label_order;
    return sets;
}

inline std::vector<PredictionSet> load_predictions_csv(const std::filesystem::path &path,
                                                       const std::vector<std::string> &label_order = {}) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read predictions '{}'", path.string()));
    return read_predictions_csv(in, label_order);
}

}  // namespace aerothreat
