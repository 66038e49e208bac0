#pragma once

#include "aerothreat/augment.hpp"
#include "aerothreat/error.hpp"
#include "aerothreat/manifest.hpp"
#include "aerothreat/model.hpp"
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
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

struct AdamHyperparameters {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 8;
    std::size_t epochs = 21;
    LossWeights loss_weights{};
    AdamHyperparameters adam{};
    std::uint64_t seed = 0;
    bool augment_online = false;
    AugmentationParams augmentation{};

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
        if (batch_size == 0) throw ValidationError("batch_size must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
            throw ValidationError("Adam betas must lie in [0, 1)");
        }
        if (!(adam.epsilon > 0.0)) throw ValidationError("Adam epsilon must be > 0");
        if (loss_weights.category < 0.0 || loss_weights.threat < 0.0) {
            throw ValidationError("loss weights must be non-negative");
        }
        if (augment_online) augmentation.validate();
    }
};

struct AdamState {
    std::vector<NumericArray> m;
    std::vector<NumericArray> v;
    std::uint64_t t = 0;

    static AdamState for_parameters(const Parameters &p) {
        AdamState s;
        for (const auto &e : p) {
            s.m.emplace_back(e.array.shape());
            s.v.emplace_back(e.array.shape());
        }
        return s;
    }
};

/// One bias-corrected Adam update, in place. `skip(name)` leaves a parameter untouched.
inline void adam_step(Parameters &params, const Parameters &grads, AdamState &state, const TrainConfig &config,
                      const std::function<bool(const std::string &)> &skip = {}) {
    if (!params.same_layout(grads)) throw ValidationError("gradient layout does not match parameters");
    if (state.m.empty()) state = AdamState::for_parameters(params);
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ValidationError("Adam state does not match parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].array.all_finite()) {
            throw NumericError(fmt::format("gradient of '{}' is not finite", grads[i].name));
        }
        if (state.m[i].shape() != params[i].array.shape() || state.v[i].shape() != params[i].array.shape()) {
            throw ValidationError(fmt::format("Adam state shape mismatch for '{}'", params[i].name));
        }
    }
    const auto &h = config.adam;
    ++state.t;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (skip && skip(params[i].name)) continue;
        auto theta = params[i].array.values();
        auto g = grads[i].array.values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
            v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            theta[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// In-memory labelled data

struct LabeledImages {
    std::vector<std::string> ids;
    std::vector<NumericArray> images;  // (h, w, 3) each
    std::vector<std::size_t> categories;
    std::vector<std::size_t> threats;

    [[nodiscard]] std::size_t size() const noexcept { return images.size(); }
    [[nodiscard]] bool empty() const noexcept { return images.empty(); }
};

/// Decodes and preprocesses annotated records. Every record must carry a threat level.
inline LabeledImages load_labeled_images(const std::vector<ImageRecord> &records, const LabelSpace &space) {
    LabeledImages out;
    for (const auto &r : records) {
        if (!r.threat) throw ValidationError(fmt::format("record '{}' has no threat annotation", r.id));
        out.ids.push_back(r.id);
        out.categories.push_back(space.index_of(r.category));
        out.threats.push_back(threat_index(*r.threat));
    }
    out.images.resize(records.size());
    parallel_for(records.size(), [&](std::size_t i) { out.images[i] = load_preprocessed(records[i].path); });
    return out;
}

inline LabeledImages load_labeled_images(const DatasetManifest &m) {
    return load_labeled_images(m.records, m.label_space);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_class_acc = 0.0;
    double val_class_acc = 0.0;
    double train_threat_acc = 0.0;
    double val_threat_acc = 0.0;

    friend bool operator==(const EpochMetrics &, const EpochMetrics &) = default;
};

/// Per-batch accounting from which the epoch's training metrics are recomputable.
struct BatchLog {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    std::size_t size = 0;
    double loss = 0.0;  // mean over the batch, before the update
    std::size_t class_correct = 0;
    std::size_t threat_correct = 0;
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    std::vector<BatchLog> batches;
    std::size_t best_epoch = 0;  // 0 when no epoch ran
    Parameters best_parameters;
    std::optional<std::filesystem::path> checkpoint;
};

struct TrainOptions {
    /// When set, the best-validation parameters are written here.
    std::optional<std::filesystem::path> checkpoint_path;
    std::function<void(const EpochMetrics &)> on_epoch;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

struct ScoreTotals {
    double loss_sum = 0.0;
    std::size_t class_correct = 0;
    std::size_t threat_correct = 0;
    std::size_t count = 0;
};

namespace detail {

inline void accumulate_scores(const ForwardResult &r, std::span<const std::size_t> ct,
                              std::span<const std::size_t> tt, ScoreTotals &acc, double batch_loss) {
    const std::size_t n = r.batch_size();
    const std::size_t kc = r.class_probs.extent(1), kt = r.threat_probs.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        if (argmax_row(r.class_probs.values().subspan(i * kc, kc)) == ct[i]) ++acc.class_correct;
        if (argmax_row(r.threat_probs.values().subspan(i * kt, kt)) == tt[i]) ++acc.threat_correct;
    }
    acc.loss_sum += batch_loss * static_cast<double>(n);
    acc.count += n;
}

inline NumericArray gather_batch(const LabeledImages &data, std::span<const std::size_t> idx) {
    std::vector<const NumericArray *> ptrs;
    ptrs.reserve(idx.size());
    for (auto i : idx) ptrs.push_back(&data.images[i]);
    return stack_batch(std::span<const NumericArray *const>(ptrs));
}

}  // namespace detail

/// Loss and accuracies of a network over a dataset (no parameter updates).
inline ScoreTotals score_dataset(const DualHeadNetwork &net, const LabeledImages &data, std::size_t batch_size,
                                 LossWeights weights) {
    ScoreTotals acc;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, data.size());
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        ForwardResult r = net.forward(detail::gather_batch(data, idx), false);
        std::span<const std::size_t> ct(data.categories.data() + start, end - start);
        std::span<const std::size_t> tt(data.threats.data() + start, end - start);
        detail::accumulate_scores(r, ct, tt, acc, total_loss(r, ct, tt, weights));
    }
    return acc;
}

/// Mini-batch Adam training. Batch order is reshuffled every epoch from config.seed; the final
/// partial batch is kept. Training metrics are running values over the epoch's batches
/// (predictions made before each update); validation metrics are computed after the epoch.
inline TrainResult train(DualHeadNetwork &net, const LabeledImages &train_data, const LabeledImages &val_data,
                         const TrainConfig &config, const TrainOptions &options = {}) {
    config.validate();
    if (train_data.empty()) throw ValidationError("training set is empty");
    if (val_data.empty()) throw ValidationError("validation set is empty");
    for (const LabeledImages *d : {&train_data, &val_data}) {
        for (std::size_t i = 0; i < d->size(); ++i) {
            if (d->categories[i] >= net.config().num_categories() || d->threats[i] >= kThreatLevelCount) {
                throw ValidationError(fmt::format("record '{}' has labels outside the network heads",
                                                  d->ids.empty() ? std::to_string(i) : d->ids[i]));
            }
        }
    }

    TrainResult result;
    result.best_parameters = net.parameters();
    double best_val = std::numeric_limits<double>::infinity();
    AdamState state = AdamState::for_parameters(net.parameters());
    std::function<bool(const std::string &)> skip;
    if (net.config().backbone.frozen) skip = [](const std::string &n) { return is_backbone_parameter(n); };

    const std::size_t n = train_data.size();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffler(derive_seed(config.seed, hash_text(fmt::format("epoch-{}", epoch))));
        shuffler.shuffle(order);

        ScoreTotals running;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_no) {
            const std::size_t end = std::min(start + config.batch_size, n);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            NumericArray batch;
            if (config.augment_online) {
                std::vector<NumericArray> imgs(idx.size());
                parallel_for(idx.size(), [&](std::size_t j) {
                    const std::uint64_t draw =
                        derive_seed(config.seed ^ config.augmentation.seed, epoch * n + start + j);
                    imgs[j] = augment_image(train_data.images[idx[j]], config.augmentation, draw);
                });
                batch = stack_batch(imgs);
            } else {
                batch = detail::gather_batch(train_data, idx);
            }
            std::vector<std::size_t> ct, tt;
            for (auto i : idx) {
                ct.push_back(train_data.categories[i]);
                tt.push_back(train_data.threats[i]);
            }
            ForwardResult fr = net.forward(batch);
            const double loss = total_loss(fr, ct, tt, config.loss_weights);
            ScoreTotals before = running;
            detail::accumulate_scores(fr, ct, tt, running, loss);
            result.batches.push_back({epoch, batch_no, idx.size(), loss, running.class_correct - before.class_correct,
                                      running.threat_correct - before.threat_correct});
            Parameters grads = net.backward(fr, ct, tt, config.loss_weights);
            adam_step(net.mutable_parameters(), grads, state, config, skip);
        }

        const ScoreTotals val = score_dataset(net, val_data, config.batch_size, config.loss_weights);
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = running.loss_sum / static_cast<double>(running.count);
        m.train_class_acc = static_cast<double>(running.class_correct) / static_cast<double>(running.count);
        m.train_threat_acc = static_cast<double>(running.threat_correct) / static_cast<double>(running.count);
        m.val_loss = val.loss_sum / static_cast<double>(val.count);
        m.val_class_acc = static_cast<double>(val.class_correct) / static_cast<double>(val.count);
        m.val_threat_acc = static_cast<double>(val.threat_correct) / static_cast<double>(val.count);
        if (!std::isfinite(m.train_loss) || !std::isfinite(m.val_loss)) {
            throw NumericError(fmt::format("loss became non-finite in epoch {}", epoch));
        }
        result.metrics.push_back(m);
        if (m.val_loss < best_val) {
            best_val = m.val_loss;
            result.best_epoch = epoch;
            result.best_parameters = net.parameters();
        }
        if (options.on_epoch) options.on_epoch(m);
    }

    if (options.checkpoint_path) {
        DualHeadNetwork best(net.config(), result.best_parameters);
        save_checkpoint(best, *options.checkpoint_path);
        result.checkpoint = options.checkpoint_path;
    }
    return result;
}

/// Loads both manifests' images, then trains.
inline TrainResult train(DualHeadNetwork &net, const DatasetManifest &train_manifest,
                         const DatasetManifest &val_manifest, const TrainConfig &config,
                         const TrainOptions &options = {}) {
    for (const DatasetManifest *m : {&train_manifest, &val_manifest}) {
        if (m->label_space != net.config().categories) {
            throw ValidationError(fmt::format("manifest label space '{}' does not match network categories '{}'",
                                              m->label_space.name(), net.config().categories.name()));
        }
    }
    return train(net, load_labeled_images(train_manifest), load_labeled_images(val_manifest), config, options);
}

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char *kMetricsCsvHeader =
    "epoch,train_loss,val_loss,train_class_acc,val_class_acc,train_threat_acc,val_threat_acc";

inline void write_metrics_csv(std::ostream &out, const std::vector<EpochMetrics> &metrics) {
    out << kMetricsCsvHeader << '\n';
    for (const auto &m : metrics) {
        out << fmt::format("{},{:.8f},{:.8f},{:.6f},{:.6f},{:.6f},{:.6f}\n", m.epoch, m.train_loss, m.val_loss,
                           m.train_class_acc, m.val_class_acc, m.train_threat_acc, m.val_threat_acc);
    }
}

inline void save_metrics_csv(const std::vector<EpochMetrics> &metrics, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write metrics '{}'", path.string()));
    write_metrics_csv(out, metrics);
}

inline std::vector<EpochMetrics> load_metrics_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read metrics '{}'", path.string()));
    std::string line;
    if (!std::getline(in, line) || line != kMetricsCsvHeader) {
        throw ValidationError(fmt::format("'{}' does not start with the metrics header", path.string()));
    }
    std::vector<EpochMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(is, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 7) throw ValidationError(fmt::format("malformed metrics row '{}'", line));
        out.push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]});
    }
    return out;
}

inline void save_batch_log_csv(const std::vector<BatchLog> &logs, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write batch log '{}'", path.string()));
    out << "epoch,batch,size,loss,class_correct,threat_correct\n";
    for (const auto &b : logs) {
        out << fmt::format("{},{},{},{:.8f},{},{}\n", b.epoch, b.batch, b.size, b.loss, b.class_correct,
                           b.threat_correct);
    }
}

// ---------------------------------------------------------------------------
// Run configuration as JSON

namespace detail {

inline void reject_unknown_keys(const nlohmann::ordered_json &j, std::initializer_list<std::string_view> known,
                                std::string_view where) {
    if (!j.is_object()) throw ValidationError(fmt::format("{} must be a JSON object", where));
    for (const auto &[key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError(fmt::format("unknown key '{}' in {}", key, where));
        }
    }
}

template <typename T>
void read_if(const nlohmann::ordered_json &j, const char *key, T &out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json augmentation_to_json(const AugmentationParams &a) {
    return {{"rotation_max", a.rotation_max}, {"shift_max", a.shift_max},   {"shear_max", a.shear_max},
            {"zoom_min", a.zoom_min},         {"zoom_max", a.zoom_max},     {"hflip", a.hflip_enabled},
            {"fill_mode", a.fill_mode},       {"seed", a.seed}};
}

/// Keys absent from `j` keep their value from `base`.
inline AugmentationParams augmentation_from_json(const nlohmann::ordered_json &j, AugmentationParams base = {}) {
    detail::reject_unknown_keys(j, {"rotation_max", "shift_max", "shear_max", "zoom_min", "zoom_max", "hflip",
                                    "fill_mode", "seed"},
                                "augmentation");
    try {
        detail::read_if(j, "rotation_max", base.rotation_max);
        detail::read_if(j, "shift_max", base.shift_max);
        detail::read_if(j, "shear_max", base.shear_max);
        detail::read_if(j, "zoom_min", base.zoom_min);
        detail::read_if(j, "zoom_max", base.zoom_max);
        detail::read_if(j, "hflip", base.hflip_enabled);
        detail::read_if(j, "fill_mode", base.fill_mode);
        detail::read_if(j, "seed", base.seed);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("augmentation: {}", e.what()));
    }
    base.validate();
    return base;
}

inline nlohmann::ordered_json train_config_to_json(const TrainConfig &c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"loss_weights", {{"category", c.loss_weights.category}, {"threat", c.loss_weights.threat}}},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
            {"augment_online", c.augment_online},
            {"augmentation", augmentation_to_json(c.augmentation)}};
}

inline TrainConfig train_config_from_json(const nlohmann::ordered_json &j, TrainConfig base = {}) {
    detail::reject_unknown_keys(j, {"learning_rate", "batch_size", "epochs", "seed", "loss_weights", "adam",
                                    "augment_online", "augmentation"},
                                "training config");
    try {
        detail::read_if(j, "learning_rate", base.learning_rate);
        detail::read_if(j, "batch_size", base.batch_size);
        detail::read_if(j, "epochs", base.epochs);
        detail::read_if(j, "seed", base.seed);
        detail::read_if(j, "augment_online", base.augment_online);
        if (j.contains("loss_weights")) {
            const auto &w = j.at("loss_weights");
            detail::reject_unknown_keys(w, {"category", "threat"}, "loss_weights");
            detail::read_if(w, "category", base.loss_weights.category);
            detail::read_if(w, "threat", base.loss_weights.threat);
        }
        if (j.contains("adam")) {
            const auto &a = j.at("adam");
            detail::reject_unknown_keys(a, {"beta1", "beta2", "epsilon"}, "adam");
            detail::read_if(a, "beta1", base.adam.beta1);
            detail::read_if(a, "beta2", base.adam.beta2);
            detail::read_if(a, "epsilon", base.adam.epsilon);
        }
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("training config: {}", e.what()));
    }
    if (j.contains("augmentation")) base.augmentation = augmentation_from_json(j.at("augmentation"), base.augmentation);
    base.validate();
    return base;
}

}  // namespace aerothreat
