#include "test_support.hpp"

#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cmath>
#include <numbers>

using namespace aerothreat;
using testing_support::mini_config;

namespace {

using BigFloat = boost::multiprecision::cpp_dec_float_50;

std::vector<double> softmax_oracle(const std::vector<double> &z) {
    std::vector<BigFloat> e;
    BigFloat sum = 0;
    for (double v : z) {
        e.push_back(boost::multiprecision::exp(BigFloat(v)));
        sum += e.back();
    }
    std::vector<double> p;
    for (const auto &v : e) p.push_back(static_cast<double>(v / sum));
    return p;
}

NumericArray random_batch(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    NumericArray x({n, h, w, 3});
    for (double &v : x.values()) v = rng.uniform();
    return x;
}

// Direct same-padded convolution, one output element at a time.
NumericArray naive_conv(const NumericArray &in, const NumericArray &w, const NumericArray &b) {
    const std::size_t n = in.extent(0), h = in.extent(1), wd = in.extent(2), cin = in.extent(3);
    const std::size_t k = w.extent(0), cout = w.extent(3);
    const long r = static_cast<long>(k / 2);
    const auto u = [](long v) { return static_cast<std::size_t>(v); };
    NumericArray out({n, h, wd, cout});
    for (std::size_t i = 0; i < n; ++i)
        for (long y = 0; y < static_cast<long>(h); ++y)
            for (long x = 0; x < static_cast<long>(wd); ++x)
                for (std::size_t o = 0; o < cout; ++o) {
                    double s = b[o];
                    for (long dy = -r; dy <= r; ++dy)
                        for (long dx = -r; dx <= r; ++dx) {
                            const long yy = y + dy, xx = x + dx;
                            if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                            for (std::size_t c = 0; c < cin; ++c) {
                                s += in.at(i, u(yy), u(xx), c) * w.at(u(dy + r), u(dx + r), c, o);
                            }
                        }
                    out.at(i, u(y), u(x), o) = s;
                }
    return out;
}

}  // namespace

TEST(Softmax, UniformForEqualLogits) {
    for (double v : softmax(std::vector<double>{0, 0, 0, 0})) EXPECT_DOUBLE_EQ(v, 0.25);
    for (double c : {-50.0, 0.0, 3.5, 700.0}) {
        for (double v : softmax(std::vector<double>{c, c, c})) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
}

TEST(Softmax, MatchesHighPrecisionOracle) {
    const std::vector<double> z{1, 0, 0, 0};
    const auto p = softmax(z);
    const auto ref = softmax_oracle(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(p[i], ref[i], 1e-15);
    EXPECT_NEAR(p[0], std::numbers::e / (std::numbers::e + 3.0), 1e-15);

    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> row(2 + rng.index(6));
        for (double &v : row) v = rng.uniform(-30, 30);
        const auto got = softmax(row);
        const auto want = softmax_oracle(row);
        for (std::size_t i = 0; i < row.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-14);
    }
}

TEST(Softmax, ShiftInvariantAndStableForLargeLogits) {
    const auto p = softmax(std::vector<double>{1000, 999, 998});
    const auto q = softmax(std::vector<double>{2, 1, 0});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], q[i], 1e-15);
}

TEST(Softmax, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(softmax(std::vector<double>{0, std::nan("")}), NumericError);
    EXPECT_THROW(softmax(std::vector<double>{0, INFINITY}), NumericError);
    EXPECT_THROW(softmax(std::vector<double>{}), ValidationError);
}

TEST(CrossEntropy, KnownValues) {
    EXPECT_DOUBLE_EQ(cross_entropy(std::vector<double>{0, 1, 0}, 1), 0.0);
    EXPECT_NEAR(cross_entropy(std::vector<double>(4, 0.25), 2), std::log(4.0), 1e-12);
    EXPECT_NEAR(cross_entropy(std::vector<double>(3, 1.0 / 3.0), 0), std::log(3.0), 1e-12);
    EXPECT_NEAR(categorical_cross_entropy(std::vector<double>(4, 0.25), one_hot(3, 4)), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, FloorsZeroProbability) {
    EXPECT_NEAR(cross_entropy(std::vector<double>{1, 0}, 1), -std::log(1e-12), 1e-9);
    EXPECT_TRUE(std::isfinite(cross_entropy(std::vector<double>{1, 0}, 1)));
}

TEST(CrossEntropy, RejectsBadTargets) {
    EXPECT_THROW(categorical_cross_entropy(std::vector<double>(4, 0.25), one_hot(0, 3)), ValidationError);
    EXPECT_THROW(categorical_cross_entropy(std::vector<double>(2, 0.5), std::vector<double>{1, 1}), ValidationError);
    EXPECT_THROW(categorical_cross_entropy(std::vector<double>(2, 0.5), std::vector<double>{0, 0}), ValidationError);
    EXPECT_THROW(cross_entropy(std::vector<double>(2, 0.5), 2), ValidationError);
}

TEST(TotalLoss, PerfectAndUniformPredictions) {
    ForwardResult perfect;
    perfect.class_probs = NumericArray({2, 4}, std::vector<double>{1, 0, 0, 0, 0, 0, 1, 0});
    perfect.threat_probs = NumericArray({2, 3}, std::vector<double>{0, 0, 1, 1, 0, 0});
    const std::vector<std::size_t> ct{0, 2}, tt{2, 0};
    EXPECT_DOUBLE_EQ(total_loss(perfect, ct, tt), 0.0);

    ForwardResult uniform;
    uniform.class_probs = NumericArray({2, 4}, 0.25);
    uniform.threat_probs = NumericArray({2, 3}, 1.0 / 3.0);
    EXPECT_NEAR(total_loss(uniform, ct, tt), std::log(4.0) + std::log(3.0), 1e-12);
    EXPECT_NEAR(total_loss(uniform, ct, tt), 2.484907, 1e-6);
    EXPECT_NEAR(total_loss(uniform, ct, tt, {1.0, 0.0}), std::log(4.0), 1e-12);
    EXPECT_NEAR(total_loss(uniform, ct, tt, {0.0, 2.0}), 2.0 * std::log(3.0), 1e-12);
    EXPECT_THROW(total_loss(uniform, ct, std::vector<std::size_t>{0}), ValidationError);
}

TEST(TotalLoss, NeverNegative) {
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        ForwardResult r;
        NumericArray cl({3, 4}), tl({3, 3});
        for (double &v : cl.values()) v = rng.uniform(-40, 40);
        for (double &v : tl.values()) v = rng.uniform(-40, 40);
        r.class_probs = softmax_rows(cl);
        r.threat_probs = softmax_rows(tl);
        const std::vector<std::size_t> ct{rng.index(4), rng.index(4), rng.index(4)};
        const std::vector<std::size_t> tt{rng.index(3), rng.index(3), rng.index(3)};
        ASSERT_GE(total_loss(r, ct, tt, {rng.uniform(), rng.uniform()}), 0.0);
    }
}

TEST(Layers, GlobalAveragePool) {
    const NumericArray in({1, 2, 2, 1}, std::vector<double>{1, 3, 5, 7});
    const NumericArray out = layers::global_average_pool(in);
    ASSERT_EQ(out.shape(), (Shape{1, 1}));
    EXPECT_DOUBLE_EQ(out[0], 4.0);
}

TEST(Layers, ConvolutionMatchesDirectSum) {
    Rng rng(17);
    for (std::size_t k : {1u, 3u}) {
        NumericArray in({2, 5, 6, 3}), w({k, k, 3, 4}), b({4});
        for (double &v : in.values()) v = rng.uniform(-1, 1);
        for (double &v : w.values()) v = rng.uniform(-1, 1);
        for (double &v : b.values()) v = rng.uniform(-1, 1);
        const NumericArray got = layers::conv2d(in, w, b);
        const NumericArray want = naive_conv(in, w, b);
        ASSERT_EQ(got.shape(), want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12) << "k=" << k;
    }
}

TEST(Layers, PoolAndUpsample) {
    const NumericArray in({1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4});
    const NumericArray up = layers::upsample_nearest(in, 2);
    ASSERT_EQ(up.shape(), (Shape{1, 4, 4, 1}));
    EXPECT_EQ(up.at(0, 0, 1, 0), 1.0);
    EXPECT_EQ(up.at(0, 1, 3, 0), 2.0);
    EXPECT_EQ(up.at(0, 3, 0, 0), 3.0);
    const NumericArray back = layers::avg_pool2(up);
    EXPECT_EQ(back, in);
    EXPECT_DOUBLE_EQ(layers::avg_pool2(in)[0], 2.5);
}

TEST(Network, ProbabilityRowsSumToOne) {
    NetworkConfig c;
    c.categories = aodta_label_space();
    DualHeadNetwork net(c);
    net.initialize(1);
    const auto r = net.forward(random_batch(4, 32, 32, 2));
    ASSERT_EQ(r.class_probs.shape(), (Shape{4, 4}));
    ASSERT_EQ(r.threat_probs.shape(), (Shape{4, 3}));
    for (std::size_t i = 0; i < 4; ++i) {
        double sc = 0, st = 0;
        for (std::size_t j = 0; j < 4; ++j) sc += r.class_probs[i * 4 + j];
        for (std::size_t j = 0; j < 3; ++j) st += r.threat_probs[i * 3 + j];
        EXPECT_NEAR(sc, 1.0, 1e-12);
        EXPECT_NEAR(st, 1.0, 1e-12);
    }
}

TEST(Network, ZeroWeightsGiveUniformOutput) {
    NetworkConfig c;
    c.categories = avd_label_space();
    const DualHeadNetwork net(c);
    const auto r = net.forward(random_batch(2, 32, 32, 4));
    for (double p : r.class_probs.values()) EXPECT_DOUBLE_EQ(p, 0.25);
    for (double p : r.threat_probs.values()) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(Network, HeadWidthFollowsLabelSpace) {
    NetworkConfig c = mini_config();
    DualHeadNetwork net(c);
    EXPECT_EQ(net.parameters().get(param::class_w).shape(), (Shape{6, 2}));
    EXPECT_EQ(net.parameters().get(param::threat_w).shape(), (Shape{6, 3}));
    c.categories = make_label_space("five", {"a", "b", "c", "d", "e"});
    EXPECT_EQ(DualHeadNetwork(c).parameters().get(param::class_b).size(), 5u);
}

TEST(Network, RejectsMismatchedInput) {
    DualHeadNetwork net(mini_config());
    EXPECT_THROW((void)net.forward(NumericArray({1, 9, 8, 3})), ValidationError);
    EXPECT_THROW((void)net.forward(NumericArray({1, 8, 8, 1})), ValidationError);
    EXPECT_THROW((void)net.forward(NumericArray({0, 8, 8, 3})), ValidationError);
    EXPECT_THROW((void)net.forward(NumericArray({8, 8, 3})), ValidationError);
}

TEST(Network, PretrainedBackboneIsRejected) {
    NetworkConfig c = mini_config();
    c.backbone.kind = BackboneKind::PretrainedEfficientNetB4;
    EXPECT_THROW(DualHeadNetwork{c}, ValidationError);
    EXPECT_EQ(parse_backbone_kind(to_string(BackboneKind::SmallConvStandin)), BackboneKind::SmallConvStandin);
}

TEST(Network, ForwardIsPure) {
    DualHeadNetwork net(mini_config());
    net.initialize(9);
    const auto x = random_batch(3, 8, 8, 1);
    const auto before = net.parameters();
    const auto a = net.forward(x);
    const auto b = net.forward(x, false);
    EXPECT_EQ(a.class_probs, b.class_probs);
    EXPECT_EQ(a.threat_probs, b.threat_probs);
    EXPECT_EQ(net.parameters(), before);
    EXPECT_EQ(b.cache, nullptr);
}

TEST(Network, InitializationIsSeededAndBiasesStartAtZero) {
    DualHeadNetwork a(mini_config()), b(mini_config()), c(mini_config());
    a.initialize(4);
    b.initialize(4);
    c.initialize(5);
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_NE(a.parameters(), c.parameters());
    for (const auto &[name, arr] : a.parameters()) {
        if (arr.rank() == 1) {
            for (double v : arr.values()) EXPECT_EQ(v, 0.0) << name;
        }
    }
    // glorot bound for the 1x1 conv: sqrt(6 / (4 + 6))
    for (double v : a.parameters().get(param::conv1x1_w).values()) EXPECT_LE(std::abs(v), std::sqrt(0.6));
}

TEST(Network, HeadsAreIndependent) {
    DualHeadNetwork net(mini_config());
    net.initialize(2);
    const auto x = random_batch(2, 8, 8, 8);
    const auto before = net.forward(x, false);
    for (double &v : net.mutable_parameters().get(param::threat_w).values()) v += 0.5;
    net.mutable_parameters().get(param::threat_b)[1] = 3.0;
    const auto after = net.forward(x, false);
    EXPECT_EQ(before.class_probs, after.class_probs);
    EXPECT_NE(before.threat_probs, after.threat_probs);
}

TEST(Backward, ZeroLossWeightsGiveZeroGradients) {
    DualHeadNetwork net(mini_config());
    net.initialize(3);
    const auto r = net.forward(random_batch(2, 8, 8, 1));
    const std::vector<std::size_t> ct{0, 1}, tt{2, 0};
    const auto g = net.backward(r, ct, tt, {0.0, 0.0});
    for (const auto &[name, arr] : g) {
        for (double v : arr.values()) EXPECT_EQ(v, 0.0) << name;
    }
}

TEST(Backward, HeadGradientsMatchClosedForm) {
    DualHeadNetwork net(mini_config());
    net.initialize(6);
    const std::size_t n = 4;
    const auto r = net.forward(random_batch(n, 8, 8, 2));
    const std::vector<std::size_t> ct{0, 1, 1, 0}, tt{2, 0, 1, 1};
    const auto g = net.backward(r, ct, tt, {1.0, 1.0});
    const NumericArray &f = r.cache->features;
    const std::size_t nf = f.extent(1);
    for (std::size_t k = 0; k < 2; ++k) {
        double bias = 0;
        for (std::size_t i = 0; i < n; ++i) bias += r.class_probs[i * 2 + k] - (ct[i] == k ? 1.0 : 0.0);
        EXPECT_NEAR(g.get(param::class_b)[k], bias / n, 1e-14);
        for (std::size_t j = 0; j < nf; ++j) {
            double w = 0;
            for (std::size_t i = 0; i < n; ++i) {
                w += f[i * nf + j] * (r.class_probs[i * 2 + k] - (ct[i] == k ? 1.0 : 0.0));
            }
            EXPECT_NEAR(g.get(param::class_w)[j * 2 + k], w / n, 1e-14);
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        double bias = 0;
        for (std::size_t i = 0; i < n; ++i) bias += r.threat_probs[i * 3 + k] - (tt[i] == k ? 1.0 : 0.0);
        EXPECT_NEAR(g.get(param::threat_b)[k], bias / n, 1e-14);
    }
}

TEST(Backward, MatchesCentralDifferences) {
    const auto stats = testing_support::gradient_check(4, 21);
    EXPECT_GE(stats.checked, 30u);
    EXPECT_LT(stats.worst_rel_error, 1e-4) << stats.worst_point;
}

TEST(Backward, RequiresFreshCache) {
    DualHeadNetwork net(mini_config());
    net.initialize(1);
    const auto x = random_batch(1, 8, 8, 3);
    const std::vector<std::size_t> ct{0}, tt{0};
    EXPECT_THROW((void)net.backward(net.forward(x, false), ct, tt), StateError);
    const auto r = net.forward(x);
    net.mutable_parameters();
    EXPECT_THROW((void)net.backward(r, ct, tt), StateError);
    const auto fresh = net.forward(x);
    EXPECT_THROW((void)net.backward(fresh, ct, std::vector<std::size_t>{}), ValidationError);
    EXPECT_THROW((void)net.backward(fresh, std::vector<std::size_t>{2}, tt), ValidationError);
}

TEST(Checkpoint, ReloadIsBitIdentical) {
    testing_support::TempDir dir("ckpt");
    DualHeadNetwork net(mini_config());
    net.initialize(12);
    net.mutable_parameters().get(param::conv2_b)[3] = 0.1 + 0.2;  // not exactly representable
    save_checkpoint(net, dir / "c.json");
    const DualHeadNetwork back = load_checkpoint(dir / "c.json");
    EXPECT_EQ(back.parameters(), net.parameters());
    EXPECT_EQ(back.config().categories, net.config().categories);
    EXPECT_EQ(back.config().conv3x3_filters, 4u);
    const auto x = random_batch(2, 8, 8, 0);
    EXPECT_EQ(back.forward(x, false).class_probs, net.forward(x, false).class_probs);
}

TEST(Checkpoint, RejectsBadFiles) {
    testing_support::TempDir dir("ckpt_bad");
    EXPECT_THROW(load_checkpoint(dir / "missing.json"), IoError);
    std::ofstream(dir / "junk.json") << "not json";
    EXPECT_THROW(load_checkpoint(dir / "junk.json"), ValidationError);

    DualHeadNetwork net(mini_config());
    auto j = checkpoint_to_json(net);
    j["parameters"][0]["values"].erase(0);
    EXPECT_THROW(checkpoint_from_json(j), ValidationError);
    j = checkpoint_to_json(net);
    j["parameters"][1]["values"][0] = 1e308 * 10;  // serialised as null
    EXPECT_ANY_THROW(checkpoint_from_json(j));
    j = checkpoint_to_json(net);
    j["format"] = "other";
    EXPECT_THROW(checkpoint_from_json(j), ValidationError);
}
