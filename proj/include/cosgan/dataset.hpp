#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <opencv2/imgproc.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cosgan/image_io.hpp"
#include "cosgan/rng.hpp"

namespace cosgan {

// ---------------------------------------------------------------------------
// Manifest
//
// The preparation pipeline is a sequence of stages, each reading and writing a
// JSONL manifest so partial runs can resume and every decision is auditable.

struct RegionBox {
    int x = 0, y = 0, w = 0, h = 0;
    double confidence = 1.0;
};

struct Keypoint {
    double x = 0, y = 0;
    double confidence = 1.0;
};

struct DatasetRecord {
    std::string id;
    std::string anime_path;
    std::string clothing_path;

    std::string status = "raw";  // raw|filtered|rejected|cropped|deduped|calibrated
    double filter_score = -1.0;
    std::optional<RegionBox> clothing_region;
    int duplicate_group = -1;
    bool duplicate_primary = true;
    std::optional<double> calibrated_center_x;
    bool calibration_fallback = false;
    std::string split;  // ""|train|test
};

using Manifest = std::vector<DatasetRecord>;

inline void to_json(nlohmann::json& j, const RegionBox& r) {
    j = {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}, {"confidence", r.confidence}};
}
inline void from_json(const nlohmann::json& j, RegionBox& r) {
    j.at("x").get_to(r.x);
    j.at("y").get_to(r.y);
    j.at("w").get_to(r.w);
    j.at("h").get_to(r.h);
    r.confidence = j.value("confidence", 1.0);
}

inline void to_json(nlohmann::json& j, const DatasetRecord& r) {
    j = {{"id", r.id},
         {"anime_path", r.anime_path},
         {"clothing_path", r.clothing_path},
         {"status", r.status},
         {"filter_score", r.filter_score},
         {"duplicate_group", r.duplicate_group},
         {"duplicate_primary", r.duplicate_primary},
         {"calibration_fallback", r.calibration_fallback},
         {"split", r.split}};
    if (r.clothing_region) j["clothing_region"] = *r.clothing_region;
    if (r.calibrated_center_x) j["calibrated_center_x"] = *r.calibrated_center_x;
}
inline void from_json(const nlohmann::json& j, DatasetRecord& r) {
    j.at("id").get_to(r.id);
    j.at("anime_path").get_to(r.anime_path);
    j.at("clothing_path").get_to(r.clothing_path);
    r.status = j.value("status", "raw");
    r.filter_score = j.value("filter_score", -1.0);
    r.duplicate_group = j.value("duplicate_group", -1);
    r.duplicate_primary = j.value("duplicate_primary", true);
    r.calibration_fallback = j.value("calibration_fallback", false);
    r.split = j.value("split", "");
    if (j.contains("clothing_region")) r.clothing_region = j.at("clothing_region").get<RegionBox>();
    if (j.contains("calibrated_center_x")) r.calibrated_center_x = j.at("calibrated_center_x").get<double>();
}

inline void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_manifest: cannot open " + path);
    for (const auto& rec : m) f << nlohmann::json(rec).dump() << '\n';
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            m.push_back(nlohmann::json::parse(line).get<DatasetRecord>());
        } catch (const std::exception& e) {
            throw std::runtime_error("load_manifest: bad record at line " +
                                     std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

// Scan a directory of <id>_anime.* / <id>_clothing.* image pairs.
inline Manifest scan_pairs(const std::string& dir) {
    namespace fs = std::filesystem;
    std::map<std::string, DatasetRecord> by_id;
    if (!fs::is_directory(dir)) throw std::runtime_error("scan_pairs: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string stem = e.path().stem().string();
        const auto pos = stem.rfind('_');
        if (pos == std::string::npos) continue;
        const std::string id = stem.substr(0, pos), role = stem.substr(pos + 1);
        if (role != "anime" && role != "clothing") continue;
        auto& rec = by_id[id];
        rec.id = id;
        (role == "anime" ? rec.anime_path : rec.clothing_path) = e.path().string();
    }
    Manifest m;
    for (auto& [id, rec] : by_id)
        if (!rec.anime_path.empty() && !rec.clothing_path.empty()) m.push_back(rec);
    std::sort(m.begin(), m.end(),
              [](const DatasetRecord& a, const DatasetRecord& b) { return a.id < b.id; });
    return m;
}

// ---------------------------------------------------------------------------
// Pluggable external models with built-in fallbacks
//
// Production runs would plug in trained classifiers/detectors; the defaults
// keep the pipeline runnable and deterministic without them.

class PairScorer {
public:
    virtual ~PairScorer() = default;
    // Probability-like score in [0,1] that the pair is a usable match.
    virtual double score(const ImagePair& pair) const = 0;
};

class ConstantScorer : public PairScorer {
public:
    explicit ConstantScorer(double v = 1.0) : v_(v) {}
    double score(const ImagePair&) const override { return v_; }

private:
    double v_;
};

class RegionDetector {
public:
    virtual ~RegionDetector() = default;
    virtual RegionBox detect(const cv::Mat& img) const = 0;
};

class FullImageRegion : public RegionDetector {
public:
    RegionBox detect(const cv::Mat& img) const override {
        return {0, 0, img.cols, img.rows, 1.0};
    }
};

class KeypointDetector {
public:
    virtual ~KeypointDetector() = default;
    virtual std::vector<Keypoint> detect(const cv::Mat& img) const = 0;
};

// Centroid of sharp structure, as a single point.  Weighting by thresholded
// gradient magnitude means the deliberately blurred mirror bands added during
// calibration contribute nothing, while crisp garment edges dominate.
class CentroidKeypoints : public KeypointDetector {
public:
    explicit CentroidKeypoints(double edge_threshold = 250.0) : tau_(edge_threshold) {}

    std::vector<Keypoint> detect(const cv::Mat& img) const override {
        cv::Mat gray, gx, gy;
        cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);
        cv::Sobel(gray, gx, CV_64F, 1, 0, 3);
        cv::Sobel(gray, gy, CV_64F, 0, 1, 3);
        double sx = 0, sy = 0, sw = 0;
        for (int y = 0; y < gray.rows; ++y)
            for (int x = 0; x < gray.cols; ++x) {
                const double mag = std::hypot(gx.at<double>(y, x), gy.at<double>(y, x));
                const double wgt = std::max(0.0, mag - tau_);
                sx += wgt * x;
                sy += wgt * y;
                sw += wgt;
            }
        if (sw <= 0) return {};
        return {Keypoint{sx / sw, sy / sw, 1.0}};
    }

private:
    double tau_;
};

class Upscaler {
public:
    virtual ~Upscaler() = default;
    virtual cv::Mat upscale(const cv::Mat& img, int factor) const = 0;
};

class BicubicUpscaler : public Upscaler {
public:
    cv::Mat upscale(const cv::Mat& img, int factor) const override {
        cv::Mat out;
        cv::resize(img, out, {}, factor, factor, cv::INTER_CUBIC);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Stage 1: filtering

struct FilterConfig {
    double threshold = 0.5;
};

inline void filter_pairs(Manifest& m, const PairScorer& scorer, const FilterConfig& cfg) {
    for (auto& rec : m) {
        if (rec.status != "raw") continue;  // idempotent: only advance raw records
        ImagePair pair{load_image(rec.anime_path), load_image(rec.clothing_path), rec.id};
        rec.filter_score = scorer.score(pair);
        rec.status = rec.filter_score >= cfg.threshold ? "filtered" : "rejected";
    }
}

// ---------------------------------------------------------------------------
// Stage 2: clothing region crop

inline void crop_regions(Manifest& m, const RegionDetector& det, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    for (auto& rec : m) {
        if (rec.status != "filtered") continue;
        cv::Mat img = load_image(rec.clothing_path);
        RegionBox box = det.detect(img);
        box.x = std::clamp(box.x, 0, img.cols - 1);
        box.y = std::clamp(box.y, 0, img.rows - 1);
        box.w = std::clamp(box.w, 1, img.cols - box.x);
        box.h = std::clamp(box.h, 1, img.rows - box.y);
        rec.clothing_region = box;
        cv::Mat crop = img(cv::Rect(box.x, box.y, box.w, box.h)).clone();
        const std::string out = (fs::path(out_dir) / (rec.id + "_clothing.png")).string();
        save_image(crop, out);
        rec.clothing_path = out;
        rec.status = "cropped";
    }
}

// ---------------------------------------------------------------------------
// Stage 3: near-duplicate grouping
//
// Similarity between two clothing images is the weakest of three channels:
// color histogram intersection, brightness histogram intersection, and a
// contrast (grey-level std) agreement score.  Pairs at or above the threshold
// join the same group via union-find.

namespace dataset_detail {

struct DupSignature {
    cv::Mat color_hist;       // HS histogram, L1-normalized
    cv::Mat brightness_hist;  // grey histogram, L1-normalized
    double contrast = 0;      // grey std-dev
};

inline DupSignature dup_signature(const cv::Mat& img) {
    DupSignature s;
    cv::Mat hsv, gray;
    cv::cvtColor(img, hsv, cv::COLOR_BGR2HSV);
    cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);

    const int hs_bins[] = {16, 8};
    const float hr[] = {0, 180}, sr[] = {0, 256};
    const float* hs_ranges[] = {hr, sr};
    const int hs_ch[] = {0, 1};
    cv::calcHist(&hsv, 1, hs_ch, cv::Mat(), s.color_hist, 2, hs_bins, hs_ranges);
    s.color_hist /= std::max(1.0, cv::sum(s.color_hist)[0]);

    const int g_bins = 32;
    const float gr[] = {0, 256};
    const float* g_ranges[] = {gr};
    const int g_ch[] = {0};
    cv::calcHist(&gray, 1, g_ch, cv::Mat(), s.brightness_hist, 1, &g_bins, g_ranges);
    s.brightness_hist /= std::max(1.0, cv::sum(s.brightness_hist)[0]);

    cv::Scalar mean, stddev;
    cv::meanStdDev(gray, mean, stddev);
    s.contrast = stddev[0];
    return s;
}

inline double similarity(const DupSignature& a, const DupSignature& b) {
    const double color = cv::compareHist(a.color_hist, b.color_hist, cv::HISTCMP_INTERSECT);
    const double bright =
        cv::compareHist(a.brightness_hist, b.brightness_hist, cv::HISTCMP_INTERSECT);
    const double cmax = std::max(a.contrast, b.contrast);
    const double contrast = cmax <= 1e-9 ? 1.0 : std::min(a.contrast, b.contrast) / cmax;
    return std::min({color, bright, contrast});
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace dataset_detail

struct DedupConfig {
    double threshold = 0.90;
};

inline void dedup(Manifest& m, const DedupConfig& cfg) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i].status == "cropped") active.push_back(i);

    std::vector<dataset_detail::DupSignature> sigs;
    sigs.reserve(active.size());
    for (std::size_t i : active)
        sigs.push_back(dataset_detail::dup_signature(load_image(m[i].clothing_path)));

    dataset_detail::UnionFind uf(active.size());
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
            if (dataset_detail::similarity(sigs[a], sigs[b]) >= cfg.threshold) uf.unite(a, b);

    std::map<std::size_t, int> root_to_group;
    std::map<int, std::size_t> group_first;
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t root = uf.find(a);
        auto [it, inserted] = root_to_group.emplace(root, static_cast<int>(root_to_group.size()));
        DatasetRecord& rec = m[active[a]];
        rec.duplicate_group = it->second;
        if (inserted) {
            group_first[it->second] = active[a];
            rec.duplicate_primary = true;
        } else {
            rec.duplicate_primary = false;
        }
        rec.status = "deduped";
    }
}

// ---------------------------------------------------------------------------
// Stage 4: horizontal calibration
//
// The clothing image is upscaled, mirror-padded on both sides by half its
// width, the padded bands are blurred so reflections do not register as
// garment structure, and keypoints are detected on the expanded canvas.  The
// confidence-weighted keypoint x-mean gives the garment center; the final
// image is a width-wide crop of the expanded canvas centered there.

struct CalibrateConfig {
    int upscale_factor = 2;
    double pad_fraction = 0.5;       // each side, fraction of (upscaled) width
    double blur_sigma_fraction = 0.02;  // of upscaled width
};

namespace dataset_detail {

struct CalibrationGeometry {
    cv::Mat expanded;  // padded + band-blurred canvas at upscaled size
    int up_width = 0;  // upscaled image width
    int pad = 0;       // padding per side, pixels
};

inline CalibrationGeometry expand_for_calibration(const cv::Mat& img, const Upscaler& up,
                                                  const CalibrateConfig& cfg) {
    CalibrationGeometry g;
    cv::Mat big = cfg.upscale_factor > 1 ? up.upscale(img, cfg.upscale_factor) : img.clone();
    g.up_width = big.cols;
    g.pad = std::max(1, static_cast<int>(std::lround(cfg.pad_fraction * big.cols)));
    cv::copyMakeBorder(big, g.expanded, 0, 0, g.pad, g.pad, cv::BORDER_REFLECT_101);
    const double sigma = std::max(0.5, cfg.blur_sigma_fraction * big.cols);
    cv::Rect left(0, 0, g.pad, g.expanded.rows);
    cv::Rect right(g.pad + big.cols, 0, g.pad, g.expanded.rows);
    cv::GaussianBlur(g.expanded(left), g.expanded(left), {0, 0}, sigma);
    cv::GaussianBlur(g.expanded(right), g.expanded(right), {0, 0}, sigma);
    return g;
}

}  // namespace dataset_detail

inline void calibrate(Manifest& m, const KeypointDetector& kp, const Upscaler& up,
                      const CalibrateConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    for (auto& rec : m) {
        if (rec.status != "deduped" || !rec.duplicate_primary) continue;
        cv::Mat img = load_image(rec.clothing_path);
        auto geo = dataset_detail::expand_for_calibration(img, up, cfg);

        std::vector<Keypoint> pts = kp.detect(geo.expanded);
        double center_up;  // center in expanded-canvas coordinates
        if (pts.empty()) {
            center_up = geo.pad + geo.up_width / 2.0;
            rec.calibration_fallback = true;
        } else {
            double sx = 0, sw = 0;
            for (const auto& p : pts) {
                sx += p.confidence * p.x;
                sw += p.confidence;
            }
            center_up = sw > 0 ? sx / sw : geo.pad + geo.up_width / 2.0;
            rec.calibration_fallback = sw <= 0;
        }

        // crop one original-width window around the center from the expanded canvas
        const double half = geo.up_width / 2.0;
        double left = std::clamp(center_up - half, 0.0,
                                 static_cast<double>(geo.expanded.cols - geo.up_width));
        const int lx = static_cast<int>(std::lround(left));
        cv::Mat crop = geo.expanded(cv::Rect(lx, 0, geo.up_width, geo.expanded.rows)).clone();
        cv::Mat out;
        cv::resize(crop, out, img.size(), 0, 0, cv::INTER_AREA);

        const std::string out_path = (fs::path(out_dir) / (rec.id + "_clothing.png")).string();
        save_image(out, out_path);
        rec.clothing_path = out_path;
        // store the detected center mapped back to original-image coordinates
        rec.calibrated_center_x = (center_up - geo.pad) /
                                  (cfg.upscale_factor > 1 ? cfg.upscale_factor : 1);
        rec.status = "calibrated";
    }
}

// ---------------------------------------------------------------------------
// Stage 5: train/test split
//
// Whole duplicate groups go to the same side so near-copies never straddle
// the split.  Assignment is deterministic in the seed.

struct SplitConfig {
    double test_fraction = 0.085;
    std::uint64_t seed = 7;
};

inline void split_dataset(Manifest& m, const SplitConfig& cfg) {
    std::set<int> groups;
    for (const auto& rec : m)
        if (rec.status == "calibrated") groups.insert(rec.duplicate_group);
    std::vector<int> order(groups.begin(), groups.end());
    RngEngine rng = make_rng(cfg.seed, "split");
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[uniform_index(rng, i)]);

    const std::size_t n_test =
        static_cast<std::size_t>(std::lround(cfg.test_fraction * order.size()));
    std::set<int> test_groups(order.begin(), order.begin() + n_test);
    for (auto& rec : m)
        if (rec.status == "calibrated")
            rec.split = test_groups.count(rec.duplicate_group) ? "test" : "train";
}

// ---------------------------------------------------------------------------
// Active-learning style scorer refinement loop (bookkeeping only; labeling is
// delegated to the caller).

struct ActiveLearningRound {
    std::vector<std::string> queried_ids;  // most uncertain pairs this round
};

inline ActiveLearningRound select_uncertain(const Manifest& m, std::size_t budget) {
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& rec : m)
        if (rec.filter_score >= 0)
            ranked.emplace_back(std::abs(rec.filter_score - 0.5), rec.id);
    std::sort(ranked.begin(), ranked.end());
    ActiveLearningRound round;
    for (std::size_t i = 0; i < std::min(budget, ranked.size()); ++i)
        round.queried_ids.push_back(ranked[i].second);
    return round;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PrepareConfig {
    FilterConfig filter;
    DedupConfig dedup;
    CalibrateConfig calibrate;
    SplitConfig split;
    bool run_calibration = true;
};

struct PreparePlugins {
    std::shared_ptr<PairScorer> scorer = std::make_shared<ConstantScorer>();
    std::shared_ptr<RegionDetector> region = std::make_shared<FullImageRegion>();
    std::shared_ptr<KeypointDetector> keypoints = std::make_shared<CentroidKeypoints>();
    std::shared_ptr<Upscaler> upscaler = std::make_shared<BicubicUpscaler>();
};

inline Manifest prepare_dataset(const std::string& in_dir, const std::string& work_dir,
                                const PrepareConfig& cfg, const PreparePlugins& plugins) {
    namespace fs = std::filesystem;
    fs::create_directories(work_dir);
    const std::string manifest_path = (fs::path(work_dir) / "manifest.jsonl").string();
    Manifest m = fs::exists(manifest_path) ? load_manifest(manifest_path) : scan_pairs(in_dir);

    filter_pairs(m, *plugins.scorer, cfg.filter);
    crop_regions(m, *plugins.region, (fs::path(work_dir) / "cropped").string());
    dedup(m, cfg.dedup);
    if (cfg.run_calibration)
        calibrate(m, *plugins.keypoints, *plugins.upscaler, cfg.calibrate,
                  (fs::path(work_dir) / "calibrated").string());
    split_dataset(m, cfg.split);

    save_manifest(m, manifest_path);
    return m;
}

// Calibrated training pairs from a manifest, primaries only.
inline std::vector<ImagePair> load_split(const Manifest& m, const std::string& split,
                                         bool primaries_only = true) {
    std::vector<ImagePair> out;
    for (const auto& rec : m) {
        if (rec.status != "calibrated" || rec.split != split) continue;
        if (primaries_only && !rec.duplicate_primary) continue;
        out.push_back({load_image(rec.anime_path), load_image(rec.clothing_path), rec.id});
    }
    return out;
}

}  // namespace cosgan
