#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/layers.hpp"
#include "aerothreat/numeric_array.hpp"
#include "aerothreat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace aerothreat {

// ---------------------------------------------------------------------------
// Softmax and losses

/// Numerically stable softmax of one logit row.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValidationError("softmax of an empty row");
    double mx = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw NumericError("softmax input is not finite");
        mx = std::max(mx, z);
    }
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double &v : p) v /= sum;
    return p;
}

/// Row-wise softmax of an (n, k) array.
inline NumericArray softmax_rows(const NumericArray &logits) {
    NumericArray out(logits.shape());
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        auto p = softmax(logits.values().subspan(i * k, k));
        std::copy(p.begin(), p.end(), out.data() + i * k);
    }
    return out;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// −log p[target], with p floored at 1e-12.
inline double cross_entropy(std::span<const double> probs, std::size_t target) {
    if (target >= probs.size()) throw ValidationError(fmt::format("target {} out of range {}", target, probs.size()));
    return -std::log(std::max(probs[target], kProbabilityFloor));
}

/// Categorical cross-entropy against a one-hot row.
inline double categorical_cross_entropy(std::span<const double> probs, std::span<const double> one_hot) {
    if (probs.size() != one_hot.size()) {
        throw ValidationError(fmt::format("probability width {} != target width {}", probs.size(), one_hot.size()));
    }
    std::size_t target = one_hot.size();
    for (std::size_t i = 0; i < one_hot.size(); ++i) {
        if (one_hot[i] == 1.0) {
            if (target != one_hot.size()) throw ValidationError("target row has more than one hot entry");
            target = i;
        } else if (one_hot[i] != 0.0) {
            throw ValidationError("target row is not one-hot");
        }
    }
    if (target == one_hot.size()) throw ValidationError("target row has no hot entry");
    return cross_entropy(probs, target);
}

inline std::vector<double> one_hot(std::size_t index, std::size_t width) {
    std::vector<double> v(width, 0.0);
    v.at(index) = 1.0;
    return v;
}

struct LossWeights {
    double category = 1.0;
    double threat = 1.0;
};

/// Mean cross-entropy over the rows of an (n, k) probability array.
inline double mean_cross_entropy(const NumericArray &probs, std::span<const std::size_t> targets) {
    const std::size_t n = probs.extent(0), k = probs.extent(1);
    if (targets.size() != n) {
        throw ValidationError(fmt::format("{} targets for a batch of {}", targets.size(), n));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += cross_entropy(probs.values().subspan(i * k, k), targets[i]);
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Configuration and parameters

enum class BackboneKind { SmallConvStandin, PretrainedEfficientNetB4 };

inline std::string to_string(BackboneKind k) {
    return k == BackboneKind::SmallConvStandin ? "small_conv_standin" : "pretrained_efficientnet_b4";
}

inline BackboneKind parse_backbone_kind(std::string_view s) {
    if (s == "small_conv_standin" || s == "standin") return BackboneKind::SmallConvStandin;
    if (s == "pretrained_efficientnet_b4" || s == "efficientnet-b4") return BackboneKind::PretrainedEfficientNetB4;
    throw ValidationError(fmt::format("unknown backbone kind '{}'", s));
}

struct BackboneSpec {
    BackboneKind kind = BackboneKind::SmallConvStandin;
    std::size_t output_channels = 16;
    bool frozen = false;
};

/// Stand-in backbone: two [3x3 conv, rectifier, 2x2 average pool] blocks with 8 then 16 channels.
inline constexpr std::size_t kStandinChannels1 = 8;
inline constexpr std::size_t kStandinChannels2 = 16;

struct NetworkConfig {
    BackboneSpec backbone;
    std::size_t input_height = 32;
    std::size_t input_width = 32;
    std::size_t input_channels = 3;
    std::size_t upscale_factor = 2;
    std::size_t conv3x3_filters = 32;
    std::size_t conv1x1_filters = 64;
    LabelSpace categories;

    [[nodiscard]] std::size_t num_categories() const { return categories.size(); }

    void validate() const {
        if (backbone.kind == BackboneKind::PretrainedEfficientNetB4) {
            throw ValidationError(
                "backbone 'pretrained_efficientnet_b4' requires ImageNet weights that are not bundled with this "
                "build; use the 'small_conv_standin' backbone");
        }
        if (backbone.output_channels != kStandinChannels2) {
            throw ValidationError(fmt::format("small_conv_standin produces {} channels, config says {}",
                                              kStandinChannels2, backbone.output_channels));
        }
        if (input_height % 4 != 0 || input_width % 4 != 0 || input_height == 0 || input_width == 0) {
            throw ValidationError("input height and width must be positive multiples of 4");
        }
        if (input_channels == 0 || upscale_factor == 0 || conv3x3_filters == 0 || conv1x1_filters == 0) {
            throw ValidationError("layer widths and upscale factor must be positive");
        }
        if (categories.size() < 2) throw ValidationError("network needs a category label space");
    }
};

struct NamedArray {
    std::string name;
    NumericArray array;

    friend bool operator==(const NamedArray &, const NamedArray &) = default;
};

/// Ordered named weight/bias arrays. Gradients use the same layout.
class Parameters {
public:
    Parameters() = default;
    explicit Parameters(std::vector<NamedArray> entries) : entries_(std::move(entries)) {}

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] auto begin() noexcept { return entries_.begin(); }
    [[nodiscard]] auto end() noexcept { return entries_.end(); }
    [[nodiscard]] auto begin() const noexcept { return entries_.begin(); }
    [[nodiscard]] auto end() const noexcept { return entries_.end(); }
    NamedArray &operator[](std::size_t i) { return entries_[i]; }
    const NamedArray &operator[](std::size_t i) const { return entries_[i]; }

    [[nodiscard]] const NumericArray &get(std::string_view name) const {
        for (const auto &e : entries_) {
            if (e.name == name) return e.array;
        }
        throw ValidationError(fmt::format("no parameter named '{}'", name));
    }
    NumericArray &get(std::string_view name) {
        return const_cast<NumericArray &>(std::as_const(*this).get(name));
    }

    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto &e : entries_) n += e.array.size();
        return n;
    }

    /// Same names and shapes, all zeros.
    [[nodiscard]] Parameters zeros_like() const {
        std::vector<NamedArray> z;
        z.reserve(entries_.size());
        for (const auto &e : entries_) z.push_back({e.name, NumericArray(e.array.shape())});
        return Parameters(std::move(z));
    }

    [[nodiscard]] bool same_layout(const Parameters &other) const {
        if (other.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i) {
            if (entries_[i].name != other[i].name || entries_[i].array.shape() != other[i].array.shape()) return false;
        }
        return true;
    }

    friend bool operator==(const Parameters &, const Parameters &) = default;

private:
    std::vector<NamedArray> entries_;
};

namespace param {
inline constexpr const char *conv1_w = "backbone.conv1.weight";
inline constexpr const char *conv1_b = "backbone.conv1.bias";
inline constexpr const char *conv2_w = "backbone.conv2.weight";
inline constexpr const char *conv2_b = "backbone.conv2.bias";
inline constexpr const char *conv3_w = "neck.conv3x3.weight";
inline constexpr const char *conv3_b = "neck.conv3x3.bias";
inline constexpr const char *conv1x1_w = "neck.conv1x1.weight";
inline constexpr const char *conv1x1_b = "neck.conv1x1.bias";
inline constexpr const char *class_w = "head_class.weight";
inline constexpr const char *class_b = "head_class.bias";
inline constexpr const char *threat_w = "head_threat.weight";
inline constexpr const char *threat_b = "head_threat.bias";
}  // namespace param

inline bool is_backbone_parameter(std::string_view name) { return name.rfind("backbone.", 0) == 0; }

// ---------------------------------------------------------------------------
// Forward / backward

struct ForwardCache {
    std::uint64_t network_version = 0;
    layers::Dims input_dims, conv1_dims, pool1_dims, conv2_dims, pool2_dims, up_dims, conv3_dims, conv1x1_dims;
    layers::RowMatrix col1, col2, col3, col1x1;
    NumericArray conv1_act, conv2_act, conv3_act;
    NumericArray features;  // pooled (n, F2)
};

struct ForwardResult {
    NumericArray class_probs;   // (n, |categories|)
    NumericArray threat_probs;  // (n, 3)
    NumericArray class_logits;
    NumericArray threat_logits;
    std::shared_ptr<const ForwardCache> cache;

    [[nodiscard]] std::size_t batch_size() const { return class_probs.extent(0); }
};

/// Total loss: w_c · mean CE(category) + w_t · mean CE(threat).
inline double total_loss(const ForwardResult &result, std::span<const std::size_t> class_targets,
                         std::span<const std::size_t> threat_targets, LossWeights weights = {}) {
    if (class_targets.size() != threat_targets.size() || class_targets.size() != result.batch_size()) {
        throw ValidationError(fmt::format("batch {} with {} category and {} threat targets", result.batch_size(),
                                          class_targets.size(), threat_targets.size()));
    }
    double loss = 0.0;
    if (weights.category != 0.0) loss += weights.category * mean_cross_entropy(result.class_probs, class_targets);
    if (weights.threat != 0.0) loss += weights.threat * mean_cross_entropy(result.threat_probs, threat_targets);
    return loss;
}

/// Pipeline: standin backbone → nearest upscale → 3x3 conv + rectifier → 1x1 conv →
/// global average pool → two independent affine + softmax heads.
class DualHeadNetwork {
public:
    explicit DualHeadNetwork(NetworkConfig config) : config_(std::move(config)) {
        config_.validate();
        params_ = make_zero_parameters();
    }

    DualHeadNetwork(NetworkConfig config, Parameters params) : config_(std::move(config)), params_(std::move(params)) {
        config_.validate();
        if (!params_.same_layout(make_zero_parameters())) {
            throw ValidationError("parameter names or shapes do not match the network configuration");
        }
        for (const auto &p : params_) {
            if (!p.array.all_finite()) throw NumericError(fmt::format("parameter '{}' is not finite", p.name));
        }
    }

    [[nodiscard]] const NetworkConfig &config() const noexcept { return config_; }
    [[nodiscard]] const Parameters &parameters() const noexcept { return params_; }
    [[nodiscard]] std::uint64_t version() const noexcept { return version_; }

    /// Mutable access invalidates outstanding forward caches.
    Parameters &mutable_parameters() noexcept {
        ++version_;
        return params_;
    }

    void set_parameters(Parameters p) {
        if (!p.same_layout(params_)) throw ValidationError("parameter layout mismatch");
        params_ = std::move(p);
        ++version_;
    }

    /// Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    void initialize(std::uint64_t seed) {
        Rng rng(derive_seed(seed, hash_text("init")));
        for (auto &[name, arr] : params_) {
            if (arr.rank() == 1) {
                arr.fill(0.0);
                continue;
            }
            std::size_t fan_in, fan_out;
            if (arr.rank() == 4) {
                const std::size_t rf = arr.extent(0) * arr.extent(1);
                fan_in = rf * arr.extent(2);
                fan_out = rf * arr.extent(3);
            } else {
                fan_in = arr.extent(0);
                fan_out = arr.extent(1);
            }
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (double &v : arr.values()) v = rng.uniform(-limit, limit);
        }
        ++version_;
    }

    [[nodiscard]] ForwardResult forward(const NumericArray &batch, bool keep_cache = true) const {
        using namespace layers;
        if (batch.rank() != 4 || batch.extent(1) != config_.input_height || batch.extent(2) != config_.input_width ||
            batch.extent(3) != config_.input_channels || batch.extent(0) == 0) {
            throw ValidationError(fmt::format("batch shape {} does not match network input (B,{},{},{})",
                                              shape_string(batch.shape()), config_.input_height,
                                              config_.input_width, config_.input_channels));
        }
        auto cache = std::make_shared<ForwardCache>();
        cache->network_version = version_;
        cache->input_dims = Dims::of(batch);

        NumericArray a = conv2d(batch, params_.get(param::conv1_w), params_.get(param::conv1_b), &cache->col1);
        relu_inplace(a);
        cache->conv1_dims = Dims::of(a);
        NumericArray p1 = avg_pool2(a);
        cache->conv1_act = std::move(a);
        cache->pool1_dims = Dims::of(p1);

        NumericArray b = conv2d(p1, params_.get(param::conv2_w), params_.get(param::conv2_b), &cache->col2);
        relu_inplace(b);
        cache->conv2_dims = Dims::of(b);
        NumericArray p2 = avg_pool2(b);
        cache->conv2_act = std::move(b);
        cache->pool2_dims = Dims::of(p2);

        NumericArray up = upsample_nearest(p2, config_.upscale_factor);
        cache->up_dims = Dims::of(up);
        NumericArray c = conv2d(up, params_.get(param::conv3_w), params_.get(param::conv3_b), &cache->col3);
        relu_inplace(c);
        cache->conv3_dims = Dims::of(c);
        NumericArray d = conv2d(c, params_.get(param::conv1x1_w), params_.get(param::conv1x1_b), &cache->col1x1);
        cache->conv3_act = std::move(c);
        cache->conv1x1_dims = Dims::of(d);

        NumericArray features = global_average_pool(d);
        ForwardResult r;
        r.class_logits = dense(features, params_.get(param::class_w), params_.get(param::class_b));
        r.threat_logits = dense(features, params_.get(param::threat_w), params_.get(param::threat_b));
        r.class_probs = softmax_rows(r.class_logits);
        r.threat_probs = softmax_rows(r.threat_logits);
        cache->features = std::move(features);
        if (keep_cache) r.cache = std::move(cache);
        return r;
    }

    /// Gradient of total_loss with respect to every parameter, from a forward pass's cache.
    [[nodiscard]] Parameters backward(const ForwardResult &result, std::span<const std::size_t> class_targets,
                                      std::span<const std::size_t> threat_targets, LossWeights weights = {}) const {
        using namespace layers;
        if (!result.cache) throw StateError("backward needs the activations cached by forward()");
        if (result.cache->network_version != version_) {
            throw StateError("forward cache is stale: parameters changed after the forward pass");
        }
        const ForwardCache &fc = *result.cache;
        const std::size_t n = result.batch_size();
        if (class_targets.size() != n || threat_targets.size() != n) {
            throw ValidationError(fmt::format("batch {} with {} category and {} threat targets", n,
                                              class_targets.size(), threat_targets.size()));
        }
        Parameters g = params_.zeros_like();

        // d(w · mean CE)/d logits = w (p − onehot) / n
        auto head_grad = [&](const NumericArray &probs, std::span<const std::size_t> targets, double w) {
            NumericArray dz = probs;
            const std::size_t k = probs.extent(1);
            for (std::size_t i = 0; i < n; ++i) {
                if (targets[i] >= k) throw ValidationError(fmt::format("target {} out of range {}", targets[i], k));
                dz[i * k + targets[i]] -= 1.0;
            }
            const double scale = w / static_cast<double>(n);
            for (double &v : dz.values()) v *= scale;
            return dz;
        };
        NumericArray dzc = head_grad(result.class_probs, class_targets, weights.category);
        NumericArray dzt = head_grad(result.threat_probs, threat_targets, weights.threat);

        NumericArray dfeat = dense_backward(dzc, fc.features, params_.get(param::class_w), g.get(param::class_w),
                                            g.get(param::class_b));
        NumericArray dfeat_t = dense_backward(dzt, fc.features, params_.get(param::threat_w), g.get(param::threat_w),
                                              g.get(param::threat_b));
        for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] += dfeat_t[i];

        NumericArray dd = global_average_pool_backward(dfeat, fc.conv1x1_dims);
        NumericArray dc = conv2d_backward(dd, fc.col1x1, fc.conv3_dims, params_.get(param::conv1x1_w),
                                          g.get(param::conv1x1_w), g.get(param::conv1x1_b), true);
        relu_backward_inplace(dc, fc.conv3_act);
        NumericArray dup = conv2d_backward(dc, fc.col3, fc.up_dims, params_.get(param::conv3_w),
                                           g.get(param::conv3_w), g.get(param::conv3_b), true);
        NumericArray dp2 = upsample_nearest_backward(dup, fc.pool2_dims, config_.upscale_factor);
        NumericArray db = avg_pool2_backward(dp2, fc.conv2_dims);
        relu_backward_inplace(db, fc.conv2_act);
        NumericArray dp1 = conv2d_backward(db, fc.col2, fc.pool1_dims, params_.get(param::conv2_w),
                                           g.get(param::conv2_w), g.get(param::conv2_b), true);
        NumericArray da = avg_pool2_backward(dp1, fc.conv1_dims);
        relu_backward_inplace(da, fc.conv1_act);
        conv2d_backward(da, fc.col1, fc.input_dims, params_.get(param::conv1_w), g.get(param::conv1_w),
                        g.get(param::conv1_b), false);
        return g;
    }

    /// Smallest |pre-activation| seen by any rectifier in a forward pass; distance to the
    /// nearest kink of the piecewise-linear network.
    [[nodiscard]] double min_rectifier_margin(const NumericArray &batch) const {
        using namespace layers;
        double margin = std::numeric_limits<double>::infinity();
        auto scan = [&](const NumericArray &pre) {
            for (double v : pre.values()) margin = std::min(margin, std::abs(v));
        };
        NumericArray a = conv2d(batch, params_.get(param::conv1_w), params_.get(param::conv1_b));
        scan(a);
        relu_inplace(a);
        NumericArray b = conv2d(avg_pool2(a), params_.get(param::conv2_w), params_.get(param::conv2_b));
        scan(b);
        relu_inplace(b);
        NumericArray c = conv2d(upsample_nearest(avg_pool2(b), config_.upscale_factor), params_.get(param::conv3_w),
                                params_.get(param::conv3_b));
        scan(c);
        return margin;
    }

private:
    [[nodiscard]] Parameters make_zero_parameters() const {
        const auto &c = config_;
        const std::size_t f1 = c.conv3x3_filters, f2 = c.conv1x1_filters;
        std::vector<NamedArray> v;
        v.push_back({param::conv1_w, NumericArray({3, 3, c.input_channels, kStandinChannels1})});
        v.push_back({param::conv1_b, NumericArray({kStandinChannels1})});
        v.push_back({param::conv2_w, NumericArray({3, 3, kStandinChannels1, kStandinChannels2})});
        v.push_back({param::conv2_b, NumericArray({kStandinChannels2})});
        v.push_back({param::conv3_w, NumericArray({3, 3, kStandinChannels2, f1})});
        v.push_back({param::conv3_b, NumericArray({f1})});
        v.push_back({param::conv1x1_w, NumericArray({1, 1, f1, f2})});
        v.push_back({param::conv1x1_b, NumericArray({f2})});
        v.push_back({param::class_w, NumericArray({f2, c.num_categories()})});
        v.push_back({param::class_b, NumericArray({c.num_categories()})});
        v.push_back({param::threat_w, NumericArray({f2, kThreatLevelCount})});
        v.push_back({param::threat_b, NumericArray({kThreatLevelCount})});
        return Parameters(std::move(v));
    }

    NetworkConfig config_;
    Parameters params_;
    std::uint64_t version_ = 0;
};

/// Stacks (h, w, c) images into an (n, h, w, c) batch.
inline NumericArray stack_batch(std::span<const NumericArray *const> images) {
    if (images.empty()) throw ValidationError("empty batch");
    const Shape &s = images.front()->shape();
    NumericArray out({images.size(), s.at(0), s.at(1), s.at(2)});
    const std::size_t per = images.front()->size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->shape() != s) throw ValidationError("images in a batch must share one shape");
        std::copy(images[i]->data(), images[i]->data() + per, out.data() + i * per);
    }
    return out;
}

inline NumericArray stack_batch(const std::vector<NumericArray> &images) {
    std::vector<const NumericArray *> ptrs;
    ptrs.reserve(images.size());
    for (const auto &im : images) ptrs.push_back(&im);
    return stack_batch(std::span<const NumericArray *const>(ptrs));
}

// ---------------------------------------------------------------------------
// Checkpoints (JSON; doubles are written with round-trip precision)

inline nlohmann::ordered_json network_config_to_json(const NetworkConfig &c) {
    nlohmann::ordered_json j;
    j["backbone"] = {{"kind", to_string(c.backbone.kind)},
                     {"output_channels", c.backbone.output_channels},
                     {"frozen", c.backbone.frozen}};
    j["input_shape"] = {c.input_height, c.input_width, c.input_channels};
    j["upscale_factor"] = c.upscale_factor;
    j["conv3x3_filters"] = c.conv3x3_filters;
    j["conv1x1_filters"] = c.conv1x1_filters;
    j["categories"] = {{"name", c.categories.name()}, {"members", c.categories.members()}};
    j["threat_levels"] = threat_label_names();
    return j;
}

inline NetworkConfig network_config_from_json(const nlohmann::ordered_json &j) {
    NetworkConfig c;
    const auto &b = j.at("backbone");
    c.backbone.kind = parse_backbone_kind(b.at("kind").get<std::string>());
    c.backbone.output_channels = b.at("output_channels").get<std::size_t>();
    c.backbone.frozen = b.at("frozen").get<bool>();
    const auto shape = j.at("input_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw ValidationError("checkpoint input_shape must have 3 extents");
    c.input_height = shape[0];
    c.input_width = shape[1];
    c.input_channels = shape[2];
    c.upscale_factor = j.at("upscale_factor").get<std::size_t>();
    c.conv3x3_filters = j.at("conv3x3_filters").get<std::size_t>();
    c.conv1x1_filters = j.at("conv1x1_filters").get<std::size_t>();
    const auto &cat = j.at("categories");
    c.categories = LabelSpace(cat.at("name").get<std::string>(), cat.at("members").get<std::vector<std::string>>());
    return c;
}

inline nlohmann::ordered_json checkpoint_to_json(const DualHeadNetwork &net) {
    nlohmann::ordered_json j;
    j["format"] = "aerothreat-checkpoint";
    j["version"] = 1;
    j["config"] = network_config_to_json(net.config());
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto &[name, a] : net.parameters()) {
        arr.push_back({{"name", name}, {"shape", a.shape()}, {"values", a.storage()}});
    }
    j["parameters"] = std::move(arr);
    return j;
}

inline DualHeadNetwork checkpoint_from_json(const nlohmann::ordered_json &j) {
    try {
        if (j.at("format").get<std::string>() != "aerothreat-checkpoint") {
            throw ValidationError("not an aerothreat checkpoint");
        }
        NetworkConfig config = network_config_from_json(j.at("config"));
        std::vector<NamedArray> entries;
        for (const auto &p : j.at("parameters")) {
            entries.push_back({p.at("name").get<std::string>(),
                               NumericArray(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>())});
        }
        return DualHeadNetwork(std::move(config), Parameters(std::move(entries)));
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("malformed checkpoint: {}", e.what()));
    }
}

inline void save_checkpoint(const DualHeadNetwork &net, const std::filesystem::path &path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write checkpoint '{}'", path.string()));
    out << checkpoint_to_json(net).dump() << '\n';
    if (!out) throw IoError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

inline DualHeadNetwork load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read checkpoint '{}'", path.string()));
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("checkpoint '{}': {}", path.string(), e.what()));
    }
    return checkpoint_from_json(j);
}

}  // namespace aerothreat
