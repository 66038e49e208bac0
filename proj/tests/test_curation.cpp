#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <opencv2/imgcodecs.hpp>
#include <set>

using namespace aerothreat;
using testing_support::manifest_of;
using testing_support::original;
using testing_support::random_image;
using testing_support::random_raw;
using testing_support::TempDir;

namespace fs = std::filesystem;

namespace {

void write_raw(const RawImage &img, const fs::path &p) { write_png(img, p); }

/// In-memory loader for balancing tests: every parent maps to a seeded random image.
BalanceIo memory_io(std::map<std::string, NumericArray> *stored = nullptr) {
    BalanceIo io;
    io.load = [](const ImageRecord &r) { return random_image(hash_text(r.id)); };
    io.store = [stored](const ImageRecord &child, const NumericArray &img) {
        if (stored) (*stored)[child.id] = img;
        return "mem/" + child.id + ".png";
    };
    return io;
}

DatasetManifest counts_manifest(const LabelSpace &space, const std::vector<std::size_t> &counts) {
    std::vector<ImageRecord> recs;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            auto r = original(fmt::format("{}/{:04d}", space.members()[c], i), space.members()[c]);
            r.threat = threat_from_index(i % 3);
            recs.push_back(r);
        }
    }
    return manifest_of(space, std::move(recs));
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest / dedupe

TEST(Ingest, OneRecordPerReadableImage) {
    TempDir dir("ingest");
    for (int i = 0; i < 3; ++i) write_raw(random_raw(40, 30, 3, i), dir / fmt::format("b{}.png", i));
    const auto m = ingest_source(dir.path(), "birds_src", "Bird", manifest_of(aodta_label_space(), {})).manifest;
    ASSERT_EQ(m.records.size(), 3u);
    for (const auto &r : m.records) {
        EXPECT_EQ(r.category, "Bird");
        EXPECT_EQ(r.source_dataset, "birds_src");
        EXPECT_EQ(r.provenance, Provenance::Original);
        EXPECT_EQ(r.width, 40);
        EXPECT_EQ(r.height, 30);
        EXPECT_EQ(r.content_hash.size(), 64u);
        EXPECT_FALSE(r.threat.has_value());
    }
    EXPECT_EQ(m.records[0].id, "birds_src/b0.png");
    EXPECT_NO_THROW(validate_manifest(m));
}

TEST(Ingest, TwiceThenDedupeIsIdempotent) {
    TempDir dir("ingest2");
    for (int i = 0; i < 3; ++i) write_raw(random_raw(16, 16, 3, 10 + i), dir / fmt::format("b{}.png", i));
    auto m = manifest_of(aodta_label_space(), {});
    m = ingest_source(dir.path(), "birds_src", "Bird", m).manifest;
    m = ingest_source(dir.path(), "birds_src", "Bird", m).manifest;
    ASSERT_EQ(m.records.size(), 6u);
    const auto d = dedupe(m);
    EXPECT_EQ(d.manifest.records.size(), 3u);
    EXPECT_EQ(d.removed, 3u);
    for (const auto &r : d.manifest.records) EXPECT_EQ(r.id.find('#'), std::string::npos);
}

TEST(Ingest, UnreadableFilesReportedNotFatal) {
    TempDir dir("ingest3");
    write_raw(random_raw(8, 8, 3, 1), dir / "ok.png");
    std::ofstream(dir / "broken.png") << "not an image";
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto r = ingest_source(dir.path(), "s", "Drone", manifest_of(aodta_label_space(), {}));
    EXPECT_EQ(r.added, 1u);
    ASSERT_EQ(r.unreadable.size(), 1u);
    EXPECT_NE(r.unreadable[0].find("broken.png"), std::string::npos);
}

TEST(Ingest, AcceptsJpegAndGrayscale) {
    TempDir dir("ingest4");
    cv::Mat gray(20, 24, CV_8UC1, cv::Scalar(77));
    ASSERT_TRUE(cv::imwrite((dir / "g.png").string(), gray));
    cv::Mat color(20, 24, CV_8UC3, cv::Scalar(10, 200, 30));
    ASSERT_TRUE(cv::imwrite((dir / "c.jpg").string(), color));
    const auto m = ingest_source(dir.path(), "s", "Drone", manifest_of(aodta_label_space(), {})).manifest;
    EXPECT_EQ(m.records.size(), 2u);
    const auto g = load_preprocessed(dir / "g.png");
    for (double v : g.values()) EXPECT_DOUBLE_EQ(v, 77.0 / 255.0);
}

TEST(Ingest, Errors) {
    TempDir dir("ingest5");
    const auto empty = manifest_of(aodta_label_space(), {});
    EXPECT_THROW(ingest_source(dir / "missing", "s", "Bird", empty), IoError);
    EXPECT_THROW(ingest_source(dir.path(), "s", "Bird", empty), ValidationError);  // zero readable
    write_raw(random_raw(8, 8, 3, 1), dir / "ok.png");
    EXPECT_THROW(ingest_source(dir.path(), "s", "UAV", empty), ValidationError);
}

TEST(Ingest, AttributeSidecar) {
    TempDir dir("ingest6");
    write_raw(random_raw(8, 8, 3, 1), dir / "a.png");
    write_raw(random_raw(8, 8, 3, 2), dir / "b.png");
    std::ofstream(dir / kAttributesFile) << "filename,attributes\na.png,military;night\n";
    const auto m = ingest_source(dir.path(), "s", "Drone", manifest_of(aodta_label_space(), {})).manifest;
    EXPECT_EQ(m.records[0].attributes, (std::vector<std::string>{"military", "night"}));
    EXPECT_TRUE(m.records[1].attributes.empty());
}

TEST(ContentHash, DecodedPixelsNotFileBytes) {
    TempDir dir("hash");
    RawImage img{12, 9, 3, std::vector<std::uint8_t>(12 * 9 * 3)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>((i / 3) % 7 * 30);
    write_raw(img, dir / "a.png");
    cv::Mat bgr(9, 12, CV_8UC3);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c) bgr.at<cv::Vec3b>(y, x)[2 - c] = img.at(y, x, c);
    ASSERT_TRUE(cv::imwrite((dir / "b.png").string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 0}));
    EXPECT_EQ(content_hash(decode_image(dir / "a.png")), content_hash(decode_image(dir / "b.png")));
    EXPECT_NE(fs::file_size(dir / "a.png"), fs::file_size(dir / "b.png"));

    // same bytes, different geometry
    RawImage tall{9, 12, 3, img.pixels};
    EXPECT_NE(content_hash(img), content_hash(tall));
}

TEST(Dedupe, TwoIdenticalImagesKeepOne) {
    auto a = original("b", "Bird");
    auto b = original("a", "Bird");
    b.content_hash = a.content_hash;
    const auto d = dedupe(manifest_of(aodta_label_space(), {a, b}));
    ASSERT_EQ(d.manifest.records.size(), 1u);
    EXPECT_EQ(d.manifest.records[0].id, "a");  // lexicographically smallest survives
    EXPECT_EQ(d.removed, 1u);
}

TEST(Dedupe, NoDuplicatesIsIdentity) {
    const auto m = counts_manifest(aodta_label_space(), {3, 2, 2, 4});
    const auto d = dedupe(m);
    EXPECT_EQ(d.manifest.records, m.records);
    EXPECT_EQ(d.removed, 0u);
}

TEST(Dedupe, MatchesPairwisePixelOracle) {
    TempDir dir("dedupe");
    Rng rng(99);
    for (int trial = 0; trial < 6; ++trial) {
        const fs::path src = dir / fmt::format("t{}", trial);
        fs::create_directories(src);
        const std::size_t n = 6 + rng.index(8);
        const std::size_t k = 2 + rng.index(4);
        std::vector<RawImage> images;
        const RawImage dup = random_raw(10, 10, 3, 1000 + trial);
        for (std::size_t i = 0; i < n - k; ++i) images.push_back(random_raw(10, 10, 3, 100 * trial + i));
        for (std::size_t i = 0; i < k; ++i) images.push_back(dup);
        rng.shuffle(images);
        for (std::size_t i = 0; i < images.size(); ++i) write_raw(images[i], src / fmt::format("i{:02d}.png", i));

        const auto m = ingest_source(src, "s", "Drone", manifest_of(aodta_label_space(), {})).manifest;
        const auto d = dedupe(m);

        // oracle: keep image i unless an earlier (smaller id) image has identical decoded pixels
        std::vector<RawImage> decoded;
        for (const auto &r : m.records) decoded.push_back(decode_image(r.path));
        std::vector<std::string> expected;
        for (std::size_t i = 0; i < decoded.size(); ++i) {
            bool seen = false;
            for (std::size_t j = 0; j < i && !seen; ++j) seen = decoded[j] == decoded[i];
            if (!seen) expected.push_back(m.records[i].id);
        }
        std::vector<std::string> got;
        for (const auto &r : d.manifest.records) got.push_back(r.id);
        EXPECT_EQ(got, expected);
        EXPECT_EQ(got.size(), n - k + 1);
    }
}

TEST(Dedupe, ReparentsAugmentedChildren) {
    auto a = original("a", "Bird");
    auto b = original("b", "Bird");
    b.content_hash = a.content_hash;
    auto child = testing_support::augmented("b#aug1", b);
    const auto d = dedupe(manifest_of(aodta_label_space(), {a, b, child}));
    ASSERT_EQ(d.manifest.records.size(), 2u);
    EXPECT_EQ(d.manifest.records[1].parent_id, "a");
    EXPECT_NO_THROW(validate_manifest(d.manifest));
}

// ---------------------------------------------------------------------------
// preprocess

TEST(Preprocess, AllWhiteIsAllOne) {
    RawImage img{32, 32, 3, std::vector<std::uint8_t>(32 * 32 * 3, 255)};
    const auto a = preprocess_image(img);
    EXPECT_EQ(a.shape(), (Shape{32, 32, 3}));
    for (double v : a.values()) EXPECT_EQ(v, 1.0);
}

TEST(Preprocess, ConstantFieldStaysConstant) {
    RawImage img{64, 64, 3, std::vector<std::uint8_t>(64 * 64 * 3, 123)};
    const auto a = preprocess_image(img);
    for (double v : a.values()) EXPECT_EQ(v, 123.0 / 255.0);
}

TEST(Preprocess, CheckerboardMatchesHandBilinear) {
    // 2x2 {0,255} checkerboard: corners of the 32x32 output land exactly on the source
    // pixels, and with sy = y/31, sx = x/31 the bilinear blend reduces to fx + fy - 2 fx fy.
    RawImage img{2, 2, 1, {0, 255, 255, 0}};
    const auto a = preprocess_image(img);
    auto expected = [](int y, int x) {
        const double fy = y / 31.0, fx = x / 31.0;
        return fx + fy - 2.0 * fx * fy;
    };
    EXPECT_EQ(a.at(0, 0, 0), 0.0);
    EXPECT_EQ(a.at(0, 31, 0), 1.0);
    EXPECT_EQ(a.at(31, 0, 0), 1.0);
    EXPECT_EQ(a.at(31, 31, 0), 0.0);
    EXPECT_NEAR(a.at(15, 15, 1), 480.0 / 961.0, 1e-12);  // 2 * 15/31 * 16/31
    EXPECT_NEAR(a.at(0, 10, 2), 10.0 / 31.0, 1e-12);
    EXPECT_NEAR(a.at(31, 10, 0), 21.0 / 31.0, 1e-12);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_NEAR(a.at(y, x, c), expected(y, x), 1e-12) << y << "," << x;
}

TEST(Preprocess, RejectsBadImages) {
    EXPECT_THROW(preprocess_image(RawImage{0, 0, 3, {}}), DecodeError);
    EXPECT_THROW(preprocess_image(RawImage{1, 1, 2, {0, 0}}), DecodeError);
    EXPECT_THROW(preprocess_image(RawImage{2, 2, 3, {0}}), DecodeError);
    TempDir dir("pp");
    std::ofstream(dir / "x.png") << "garbage";
    EXPECT_THROW(load_preprocessed(dir / "x.png"), DecodeError);
}

// ---------------------------------------------------------------------------
// split

TEST(Split, SeventyThirtyPerCategory) {
    const auto m = stratified_split(counts_manifest(aodta_label_space(), {100, 100, 100, 100}), {0.7, 5, true});
    const auto train = manifest_counts(split_manifest(m, Split::Train));
    const auto test = manifest_counts(split_manifest(m, Split::Test));
    EXPECT_EQ(train.counts, std::vector<std::size_t>(4, 70));
    EXPECT_EQ(test.counts, std::vector<std::size_t>(4, 30));
}

TEST(Split, RoundHalfUpTrainCount) {
    // enumerate candidate train sizes and pick the one nearest 0.8 * 236 = 188.8
    std::size_t best = 0;
    for (std::size_t t = 0; t <= 236; ++t) {
        if (std::abs(static_cast<double>(t) - 188.8) < std::abs(static_cast<double>(best) - 188.8)) best = t;
    }
    ASSERT_EQ(best, 189u);
    const auto m = stratified_split(counts_manifest(aodta_label_space(), {236, 2, 2, 2}), {0.8, 1, true});
    EXPECT_EQ(manifest_counts(split_manifest(m, Split::Train))["Airplane"], 189u);
    EXPECT_EQ(manifest_counts(split_manifest(m, Split::Test))["Airplane"], 47u);
    EXPECT_EQ(stratified_train_count(0.5, 5), 3u);  // 2.5 rounds up
}

TEST(Split, DeterministicUnderSeed) {
    const auto base = counts_manifest(aodta_label_space(), {20, 13, 9, 5});
    const auto a = stratified_split(base, {0.8, 42, true});
    const auto b = stratified_split(base, {0.8, 42, true});
    const auto c = stratified_split(base, {0.8, 43, true});
    EXPECT_EQ(a.split_assignments, b.split_assignments);
    EXPECT_NE(a.split_assignments, c.split_assignments);
    EXPECT_NO_THROW(validate_manifest(a));
}

TEST(Split, ProportionBoundHolds) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> counts;
        for (int c = 0; c < 4; ++c) counts.push_back(2 + rng.index(60));
        const double f = rng.uniform(0.05, 0.95);
        const auto m = stratified_split(counts_manifest(aodta_label_space(), counts), {f, 7, true});
        const auto train = manifest_counts(split_manifest(m, Split::Train));
        for (std::size_t c = 0; c < 4; ++c) {
            const double total = static_cast<double>(counts[c]);
            EXPECT_LE(std::abs(static_cast<double>(train.counts[c]) / total - f), 1.0 / total + 1e-12);
        }
    }
}

TEST(Split, ShuffleFlagControlsTrainOrder) {
    const auto base = counts_manifest(aodta_label_space(), {30, 30, 30, 30});
    const auto unshuffled = stratified_split(base, {0.8, 9, false});
    const auto &ids = unshuffled.split_assignments->train;
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end(), [&](const std::string &x, const std::string &y) {
        const auto pos = [&](const std::string &id) {
            return std::find_if(base.records.begin(), base.records.end(), [&](auto &r) { return r.id == id; }) -
                   base.records.begin();
        };
        return pos(x) < pos(y);
    }));
    const auto shuffled = stratified_split(base, {0.8, 9, true});
    EXPECT_NE(shuffled.split_assignments->train, ids);
    std::set<std::string> a(ids.begin(), ids.end()), b(shuffled.split_assignments->train.begin(),
                                                       shuffled.split_assignments->train.end());
    EXPECT_EQ(a.size(), b.size());
}

TEST(Split, Errors) {
    EXPECT_THROW(stratified_split(counts_manifest(aodta_label_space(), {5, 5, 5, 1}), {0.8, 1, true}),
                 ValidationError);
    EXPECT_THROW(stratified_split(counts_manifest(aodta_label_space(), {5, 5, 5, 5}), {1.0, 1, true}),
                 ValidationError);
    EXPECT_THROW(stratified_split(counts_manifest(aodta_label_space(), {5, 5, 5, 5}), {0.0, 1, true}),
                 ValidationError);
}

// ---------------------------------------------------------------------------
// augmentation

TEST(Augment, ZeroRangesAreIdentity) {
    const auto img = random_image(1);
    for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(augment_image(img, AugmentationParams::identity(), s), img);
}

TEST(Augment, DoubleFlipIsBitExact) {
    const auto img = random_image(2);
    EXPECT_EQ(hflip(hflip(img)), img);
    EXPECT_NE(hflip(img), img);
    AugmentationDraw flip;
    flip.hflip = true;
    EXPECT_EQ(apply_augmentation(apply_augmentation(img, flip), flip), img);
}

TEST(Augment, QuarterTurnIsIndexPermutation) {
    NumericArray img({32, 32, 3});
    for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) img.at(r, c, ch) = (r * 32 + c) / 1024.0 + ch * 1e-4 + (r > c) * 0.3;
    AugmentationDraw d;
    d.rotation_deg = 90.0;
    const auto out = apply_augmentation(img, d);
    // forward map about the centre 15.5: (x, y) -> (31 - y, x), so out(r, c) = in(31 - c, r)
    for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) ASSERT_EQ(out.at(r, c, ch), img.at(31 - c, r, ch)) << r << "," << c;
}

TEST(Augment, ShapeAndRangePreserved) {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        AugmentationParams p;
        p.rotation_max = rng.uniform(0.0, 180.0);
        p.shift_max = rng.uniform(0.0, 0.5);
        p.shear_max = rng.uniform(0.0, 45.0);
        p.zoom_min = rng.uniform(0.5, 1.0);
        p.zoom_max = rng.uniform(1.0, 1.5);
        const auto img = random_image(100 + i);
        const auto out = augment_image(img, p, rng.index(1u << 30));
        ASSERT_EQ(out.shape(), img.shape());
        for (double v : out.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
}

TEST(Augment, DrawsWithinBoundsAndDeterministic) {
    AugmentationParams p;
    for (std::uint64_t s = 0; s < 500; ++s) {
        const auto d = draw_augmentation(p, s);
        EXPECT_LE(std::abs(d.rotation_deg), p.rotation_max);
        EXPECT_LE(std::abs(d.shift_x), p.shift_max);
        EXPECT_LE(std::abs(d.shift_y), p.shift_max);
        EXPECT_LE(std::abs(d.shear_deg), p.shear_max);
        EXPECT_GE(d.zoom, p.zoom_min);
        EXPECT_LE(d.zoom, p.zoom_max);
        EXPECT_EQ(d.describe(), draw_augmentation(p, s).describe());
    }
}

TEST(Augment, ParamValidation) {
    AugmentationParams p;
    p.shift_max = 1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.zoom_min = 1.1;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.rotation_max = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.fill_mode = "reflect";
    EXPECT_THROW(p.validate(), ValidationError);
}

// ---------------------------------------------------------------------------
// balancing

TEST(Balance, FiveTwoGainsThreeWithValidLineage) {
    const auto space = make_label_space("AB", {"A", "B"});
    const auto m = counts_manifest(space, {5, 2});
    const auto b = balance_by_augmentation(m, AugmentationParams{}, memory_io());
    ASSERT_EQ(b.records.size(), 10u);
    std::set<std::string> b_originals;
    for (const auto &r : m.records)
        if (r.category == "B") b_originals.insert(r.id);
    std::vector<std::string> parents;
    for (const auto &r : b.records) {
        if (!r.is_augmented()) continue;
        EXPECT_EQ(r.category, "B");
        ASSERT_TRUE(r.parent_id.has_value());
        EXPECT_TRUE(b_originals.count(*r.parent_id));
        EXPECT_TRUE(r.augmentation_desc.has_value());
        EXPECT_EQ(r.threat, b.find(*r.parent_id)->threat);
        parents.push_back(*r.parent_id);
    }
    // round-robin over B's originals in record order
    EXPECT_EQ(parents, (std::vector<std::string>{"B/0000", "B/0001", "B/0000"}));
    EXPECT_NO_THROW(validate_manifest(b));
    EXPECT_TRUE(b.metadata.at("balancing").at("before_split").get<bool>());
}

TEST(Balance, AlreadyBalancedAddsNothing) {
    const auto m = counts_manifest(aodta_label_space(), {4, 4, 4, 4});
    const auto b = balance_by_augmentation(m, AugmentationParams{}, memory_io());
    EXPECT_EQ(b.records, m.records);
}

TEST(Balance, EqualisesAndIsDeterministic) {
    const auto m = counts_manifest(aodta_label_space(), {13, 6, 3, 1});
    std::map<std::string, NumericArray> first, second;
    AugmentationParams p;
    p.seed = 21;
    const auto a = balance_by_augmentation(m, p, memory_io(&first));
    const auto b = balance_by_augmentation(m, p, memory_io(&second));
    const auto c = manifest_counts(a);
    EXPECT_EQ(c.counts, std::vector<std::size_t>(4, 13));
    EXPECT_EQ(c.total(), 4u * 13u);
    EXPECT_EQ(manifest_to_jsonl(a), manifest_to_jsonl(b));
    EXPECT_EQ(first, second);
    std::size_t airplane_added = 0;
    for (const auto &r : a.records) airplane_added += r.is_augmented() && r.category == "Airplane";
    EXPECT_EQ(airplane_added, 0u);
    for (const auto &[id, img] : first) {
        EXPECT_EQ(img.shape(), (Shape{32, 32, 3}));
        for (double v : img.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
}

TEST(Balance, LabelsPreservedOverRandomManifests) {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> counts;
        for (int c = 0; c < 4; ++c) counts.push_back(1 + rng.index(9));
        const auto m = counts_manifest(aodta_label_space(), counts);
        const auto b = balance_by_augmentation(m, AugmentationParams{}, memory_io());
        for (const auto &r : b.records) {
            if (!r.is_augmented()) continue;
            const ImageRecord *parent = b.find(*r.parent_id);
            ASSERT_NE(parent, nullptr);
            EXPECT_EQ(r.category, parent->category);
            EXPECT_EQ(r.threat, parent->threat);
        }
    }
}

TEST(Balance, Errors) {
    auto m = counts_manifest(aodta_label_space(), {3, 0, 2, 2});
    EXPECT_THROW(balance_by_augmentation(m, AugmentationParams{}, memory_io()), ValidationError);
    auto split = stratified_split(counts_manifest(aodta_label_space(), {3, 3, 2, 2}), {0.5, 1, true});
    EXPECT_THROW(balance_by_augmentation(split, AugmentationParams{}, memory_io()), ValidationError);
}

TEST(Balance, FileIoWritesPngChildren) {
    TempDir dir("balance");
    const LabelSpace space = make_label_space("AB", {"A", "B"});
    auto m = manifest_of(space, {});
    for (const char *cat : {"A", "B"}) {
        const fs::path src = dir / cat;
        fs::create_directories(src);
        const int n = std::string(cat) == "A" ? 4 : 1;
        for (int i = 0; i < n; ++i) write_raw(random_raw(32, 32, 3, 7 * i + cat[0]), src / fmt::format("{}.png", i));
        m = ingest_source(src, cat, cat, m).manifest;
    }
    const auto b = balance_by_augmentation(m, AugmentationParams{}, file_balance_io(dir / "aug"));
    ASSERT_EQ(b.records.size(), 8u);
    for (const auto &r : b.records) {
        if (!r.is_augmented()) continue;
        ASSERT_TRUE(fs::exists(r.path)) << r.path;
        const RawImage img = decode_image(r.path);
        EXPECT_EQ(content_hash(img), r.content_hash);
        EXPECT_EQ(img.width, 32);
    }
}
