#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "cosgan/dataset.hpp"
#include "cosgan/synthetic.hpp"

using namespace cosgan;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cosgan_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& s) const { return (path / s).string(); }
};

// scores pairs by the mean brightness of the anime side, rescaled to [0,1]
struct BrightnessScorer : PairScorer {
    double score(const ImagePair& pair) const override {
        return cv::mean(pair.anime)[0] / 255.0;
    }
};

struct FixedRegion : RegionDetector {
    RegionBox box;
    explicit FixedRegion(RegionBox b) : box(b) {}
    RegionBox detect(const cv::Mat&) const override { return box; }
};

cv::Mat solid(int size, cv::Scalar color) { return cv::Mat(size, size, CV_8UC3, color); }

void write_pair(const std::string& dir, const std::string& id, const cv::Mat& anime,
                const cv::Mat& clothing) {
    save_image(anime, (fs::path(dir) / (id + "_anime.png")).string());
    save_image(clothing, (fs::path(dir) / (id + "_clothing.png")).string());
}

}  // namespace

TEST_CASE("manifest JSONL round-trip") {
    TmpDir tmp("manifest");
    Manifest m(2);
    m[0].id = "a";
    m[0].anime_path = "a_anime.png";
    m[0].clothing_path = "a_clothing.png";
    m[0].status = "calibrated";
    m[0].filter_score = 0.9;
    m[0].clothing_region = RegionBox{1, 2, 3, 4, 0.8};
    m[0].duplicate_group = 0;
    m[0].calibrated_center_x = 31.5;
    m[0].split = "train";
    m[1].id = "b";
    m[1].anime_path = "b_anime.png";
    m[1].clothing_path = "b_clothing.png";
    const std::string path = tmp.sub("manifest.jsonl");
    save_manifest(m, path);
    Manifest r = load_manifest(path);
    REQUIRE(r.size() == 2);
    CHECK(r[0].id == "a");
    CHECK(r[0].status == "calibrated");
    CHECK(r[0].clothing_region->w == 3);
    CHECK(r[0].calibrated_center_x.value() == 31.5);
    CHECK(r[1].status == "raw");
    CHECK_FALSE(r[1].calibrated_center_x.has_value());

    std::ofstream(path, std::ios::app) << "{broken\n";
    CHECK_THROWS_WITH(load_manifest(path), Catch::Matchers::ContainsSubstring("line 3"));
}

TEST_CASE("scan_pairs matches anime/clothing files by id") {
    TmpDir tmp("scan");
    write_pair(tmp.str(), "x1", solid(8, {10, 10, 10}), solid(8, {20, 20, 20}));
    write_pair(tmp.str(), "x2", solid(8, {10, 10, 10}), solid(8, {20, 20, 20}));
    save_image(solid(8, {0, 0, 0}), tmp.sub("orphan_anime.png"));  // no clothing side
    Manifest m = scan_pairs(tmp.str());
    REQUIRE(m.size() == 2);
    CHECK(m[0].id == "x1");
    CHECK(m[1].id == "x2");
    CHECK(m[0].status == "raw");
    CHECK_THROWS_AS(scan_pairs(tmp.sub("missing")), std::runtime_error);
}

TEST_CASE("filtering: threshold sweep reproduces the labeled confusion matrix") {
    TmpDir tmp("filter");
    // 20 pairs, anime brightness k*12 -> scores 0.0, 0.047, ..., 0.894
    Manifest m;
    for (int k = 0; k < 20; ++k) {
        const std::string id = (k < 10 ? "p0" : "p") + std::to_string(k);
        write_pair(tmp.str(), id, solid(8, {k * 12.0, k * 12.0, k * 12.0}),
                   solid(8, {100, 100, 100}));
    }
    m = scan_pairs(tmp.str());
    // labels: the 8 brightest are "good"
    for (double thr : {0.25, 0.5, 0.56}) {
        Manifest sweep = m;
        filter_pairs(sweep, BrightnessScorer{}, FilterConfig{thr});
        int tp = 0, fp = 0, tn = 0, fn = 0;
        for (int k = 0; k < 20; ++k) {
            const bool label_good = k >= 12;
            const bool passed = sweep[k].status == "filtered";
            // oracle: score is exactly k*12/255
            CHECK(passed == (k * 12.0 / 255.0 >= thr));
            (passed ? (label_good ? tp : fp) : (label_good ? fn : tn))++;
        }
        if (thr == 0.56) {  // passes at k >= 12: perfect split
            CHECK(tp == 8);
            CHECK(fp == 0);
            CHECK(tn == 12);
            CHECK(fn == 0);
        }
        if (thr == 0.25) {  // passes at k >= 6
            CHECK(tp == 8);
            CHECK(fp == 6);
            CHECK(fn == 0);
        }
    }
    // filtering is idempotent: rejected records stay rejected on rerun
    filter_pairs(m, BrightnessScorer{}, FilterConfig{0.5});
    Manifest again = m;
    filter_pairs(again, ConstantScorer{1.0}, FilterConfig{0.0});
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i].status == again[i].status);
}

TEST_CASE("region crop writes the detected sub-image") {
    TmpDir tmp("crop");
    cv::Mat clothing = solid(16, {250, 250, 250});
    cv::rectangle(clothing, {4, 6}, {11, 13}, cv::Scalar(30, 30, 200), cv::FILLED);
    write_pair(tmp.str(), "c1", solid(16, {0, 0, 0}), clothing);
    Manifest m = scan_pairs(tmp.str());
    filter_pairs(m, ConstantScorer{1.0}, {});
    crop_regions(m, FixedRegion{{4, 6, 8, 8}}, tmp.sub("cropped"));
    REQUIRE(m[0].status == "cropped");
    cv::Mat crop = load_image(m[0].clothing_path);
    CHECK(crop.cols == 8);
    CHECK(crop.rows == 8);
    // the crop is exactly the painted rectangle
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(crop.at<cv::Vec3b>(y, x) == cv::Vec3b(30, 30, 200));
    // boxes are clamped to the image
    Manifest m2 = scan_pairs(tmp.str());
    filter_pairs(m2, ConstantScorer{1.0}, {});
    crop_regions(m2, FixedRegion{{-5, -5, 100, 100}}, tmp.sub("cropped2"));
    cv::Mat full = load_image(m2[0].clothing_path);
    CHECK(full.cols == 16);
}

TEST_CASE("dedup groups exact copies and separates a 50% gray shift") {
    TmpDir tmp("dedup");
    ImagePair base = synthetic_pair(1, 5, 32);
    write_pair(tmp.str(), "a", base.anime, base.clothing);
    write_pair(tmp.str(), "b", base.anime, base.clothing);  // exact copy
    cv::Mat shifted;
    base.clothing.convertTo(shifted, -1, 1.0, 127.0);  // heavy brightness shift
    write_pair(tmp.str(), "c", base.anime, shifted);
    Manifest m = scan_pairs(tmp.str());
    filter_pairs(m, ConstantScorer{1.0}, {});
    crop_regions(m, FullImageRegion{}, tmp.sub("cropped"));
    dedup(m, DedupConfig{0.90});
    CHECK(m[0].duplicate_group == m[1].duplicate_group);
    CHECK(m[0].duplicate_primary);
    CHECK_FALSE(m[1].duplicate_primary);
    CHECK(m[2].duplicate_group != m[0].duplicate_group);
    CHECK(m[2].duplicate_primary);
}

TEST_CASE("dedup transitivity: chained near-duplicates form one group") {
    // union-find closure over A~B and B~C even if A and C differ more
    dataset_detail::UnionFind uf(3);
    uf.unite(0, 1);
    uf.unite(1, 2);
    CHECK(uf.find(0) == uf.find(2));

    // end-to-end with images: a and c differ too much directly (~84% shared
    // pixels) but each neighbors b (~92% shared), so the chain must merge all
    // three. The two colors share a grayscale value, keeping the brightness
    // and contrast channels out of the picture.
    TmpDir tmp("trans");
    const cv::Scalar blue(200, 60, 40), green(40, 98, 30);  // both ~gray 70
    auto chain_img = [&](const cv::Scalar& r1, const cv::Scalar& r2) {
        cv::Mat img = solid(32, {255, 255, 255});
        cv::rectangle(img, {2, 2}, {11, 9}, r1, cv::FILLED);    // region 1: 80 px
        cv::rectangle(img, {18, 20}, {27, 27}, r2, cv::FILLED);  // region 2: 80 px
        return img;
    };
    write_pair(tmp.str(), "a", solid(32, {0, 0, 0}), chain_img(blue, blue));
    write_pair(tmp.str(), "b", solid(32, {0, 0, 0}), chain_img(blue, green));
    write_pair(tmp.str(), "c", solid(32, {0, 0, 0}), chain_img(green, green));
    Manifest m = scan_pairs(tmp.str());
    filter_pairs(m, ConstantScorer{1.0}, {});
    crop_regions(m, FullImageRegion{}, tmp.sub("cropped"));
    dedup(m, DedupConfig{0.90});
    CHECK(m[0].duplicate_group == m[1].duplicate_group);
    CHECK(m[1].duplicate_group == m[2].duplicate_group);
}

TEST_CASE("similarity is the weakest of the three channels") {
    cv::Mat a = solid(16, {100, 100, 100});
    auto sa = dataset_detail::dup_signature(a);
    CHECK_THAT(dataset_detail::similarity(sa, sa), Catch::Matchers::WithinAbs(1.0, 1e-9));
    cv::Mat b = solid(16, {100, 100, 100});
    cv::rectangle(b, {0, 0}, {7, 15}, cv::Scalar(220, 30, 30), cv::FILLED);
    auto sb = dataset_detail::dup_signature(b);
    const double sim = dataset_detail::similarity(sa, sb);
    CHECK(sim < 0.9);
    CHECK(sim >= 0.0);
}

TEST_CASE("calibration recovers planted garment centers within one pixel") {
    TmpDir tmp("calib");
    PrepareFixture fx = write_prepare_fixture(tmp.sub("raw"));
    Manifest m = scan_pairs(tmp.sub("raw"));
    filter_pairs(m, ConstantScorer{1.0}, {});
    crop_regions(m, FullImageRegion{}, tmp.sub("cropped"));
    dedup(m, DedupConfig{0.90});
    CentroidKeypoints kp;
    BicubicUpscaler up;
    calibrate(m, kp, up, CalibrateConfig{}, tmp.sub("calibrated"));

    int calibrated = 0;
    for (const auto& rec : m) {
        if (rec.status != "calibrated") continue;
        ++calibrated;
        REQUIRE(rec.calibrated_center_x.has_value());
        CHECK_FALSE(rec.calibration_fallback);
        const double planted = fx.garment_center_x.at(rec.id);
        INFO(rec.id << ": planted " << planted << " got " << *rec.calibrated_center_x);
        CHECK(std::abs(*rec.calibrated_center_x - planted) <= 1.0);
        // the output image is re-centered: its sharp-structure centroid sits
        // at the middle of the frame
        cv::Mat out = load_image(rec.clothing_path);
        auto pts = kp.detect(out);
        REQUIRE_FALSE(pts.empty());
        CHECK(std::abs(pts[0].x - (out.cols - 1) / 2.0) <= 1.5);
    }
    CHECK(calibrated == 10);  // 12 inputs minus 2 planted duplicates
}

TEST_CASE("featureless images fall back to the geometric center") {
    TmpDir tmp("calib_fb");
    write_pair(tmp.str(), "flat", solid(32, {0, 0, 0}), solid(32, {128, 128, 128}));
    Manifest m = scan_pairs(tmp.str());
    filter_pairs(m, ConstantScorer{1.0}, {});
    crop_regions(m, FullImageRegion{}, tmp.sub("cropped"));
    dedup(m, DedupConfig{0.90});
    CentroidKeypoints kp;
    BicubicUpscaler up;
    calibrate(m, kp, up, CalibrateConfig{}, tmp.sub("calibrated"));
    REQUIRE(m[0].status == "calibrated");
    CHECK(m[0].calibration_fallback);
    CHECK_THAT(*m[0].calibrated_center_x, Catch::Matchers::WithinAbs(16.0, 1.0));
}

TEST_CASE("split keeps duplicate groups on one side and is deterministic") {
    TmpDir tmp("split");
    write_prepare_fixture(tmp.sub("raw"));
    PrepareConfig cfg;
    cfg.split.test_fraction = 0.3;
    Manifest m = prepare_dataset(tmp.sub("raw"), tmp.sub("work"), cfg, PreparePlugins{});

    std::map<int, std::set<std::string>> group_splits;
    int split_count = 0;
    for (const auto& rec : m)
        if (!rec.split.empty()) {
            group_splits[rec.duplicate_group].insert(rec.split);
            ++split_count;
        }
    CHECK(split_count == 10);
    for (const auto& [g, splits] : group_splits) CHECK(splits.size() == 1);  // no leakage
    int test_groups = 0;
    for (const auto& [g, splits] : group_splits) test_groups += splits.count("test");
    CHECK(test_groups == 3);  // round(0.3 * 10)

    Manifest m2 = prepare_dataset(tmp.sub("raw"), tmp.sub("work2"), cfg, PreparePlugins{});
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i].split == m2[i].split);
}

TEST_CASE("prepare pipeline is idempotent") {
    TmpDir tmp("idem");
    write_prepare_fixture(tmp.sub("raw"));
    PrepareConfig cfg;
    Manifest first = prepare_dataset(tmp.sub("raw"), tmp.sub("work"), cfg, PreparePlugins{});
    Manifest second = prepare_dataset(tmp.sub("raw"), tmp.sub("work"), cfg, PreparePlugins{});
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].id == second[i].id);
        CHECK(first[i].status == second[i].status);
        CHECK(first[i].clothing_path == second[i].clothing_path);
        CHECK(first[i].duplicate_group == second[i].duplicate_group);
        CHECK(first[i].split == second[i].split);
        if (first[i].calibrated_center_x)
            CHECK(*first[i].calibrated_center_x == *second[i].calibrated_center_x);
    }
}

TEST_CASE("load_split returns calibrated primaries of the requested side") {
    TmpDir tmp("loadsplit");
    write_prepare_fixture(tmp.sub("raw"));
    PrepareConfig cfg;
    cfg.split.test_fraction = 0.2;
    Manifest m = prepare_dataset(tmp.sub("raw"), tmp.sub("work"), cfg, PreparePlugins{});
    auto train = load_split(m, "train");
    auto test = load_split(m, "test");
    CHECK(train.size() + test.size() == 10);
    CHECK(test.size() == 2);
    for (const auto& p : train) CHECK(p.anime.cols == 64);
}

TEST_CASE("active-learning selection ranks by uncertainty") {
    Manifest m(4);
    for (int i = 0; i < 4; ++i) m[i].id = "r" + std::to_string(i);
    m[0].filter_score = 0.51;  // most uncertain
    m[1].filter_score = 0.95;
    m[2].filter_score = 0.40;
    m[3].filter_score = -1.0;  // unscored: excluded
    auto round = select_uncertain(m, 2);
    REQUIRE(round.queried_ids.size() == 2);
    CHECK(round.queried_ids[0] == "r0");
    CHECK(round.queried_ids[1] == "r2");
}
