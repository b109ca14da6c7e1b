#pragma once

#include <filesystem>
#include <opencv2/imgproc.hpp>
#include <string>
#include <vector>

#include "cosgan/image_io.hpp"
#include "cosgan/rng.hpp"

namespace cosgan {

// Procedurally generated paired data: a "character" image containing a
// colored shape, and the matching "garment" image rendered in the same color.
// The color/shape correspondence makes the mapping learnable, so training
// progress can be measured without any real data.

namespace synth_detail {

inline cv::Scalar palette_color(RngEngine& rng) {
    // saturated, mid-brightness colors so mean statistics separate well
    cv::Mat hsv(1, 1, CV_8UC3,
                cv::Scalar(uniform_index(rng, 180), 180 + uniform_index(rng, 76),
                           140 + uniform_index(rng, 100)));
    cv::Mat bgr;
    cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
    const auto px = bgr.at<cv::Vec3b>(0, 0);
    return {static_cast<double>(px[0]), static_cast<double>(px[1]),
            static_cast<double>(px[2])};
}

inline void draw_character(cv::Mat& img, int shape, const cv::Scalar& color, int cx, int cy,
                           int r) {
    switch (shape % 3) {
        case 0:
            cv::circle(img, {cx, cy}, r, color, cv::FILLED, cv::LINE_8);
            break;
        case 1:
            cv::rectangle(img, {cx - r, cy - r}, {cx + r, cy + r}, color, cv::FILLED);
            break;
        default: {
            std::vector<cv::Point> tri{{cx, cy - r}, {cx - r, cy + r}, {cx + r, cy + r}};
            cv::fillConvexPoly(img, tri, color);
        }
    }
    // a small dark "head" above the shape gives the input some structure
    cv::circle(img, {cx, std::max(2, cy - r - r / 2)}, std::max(1, r / 3),
               cv::Scalar(40, 40, 40), cv::FILLED);
}

// simple T-shirt silhouette: body rectangle plus two sleeve rectangles
inline void draw_garment(cv::Mat& img, const cv::Scalar& color, int cx, int size) {
    const int bw = size * 5 / 16, bh = size * 9 / 16;
    const int top = size * 3 / 16;
    cv::rectangle(img, {cx - bw / 2, top}, {cx + bw / 2, top + bh}, color, cv::FILLED);
    const int sw = size * 3 / 32, sh = size * 7 / 32;
    cv::rectangle(img, {cx - bw / 2 - sw, top}, {cx - bw / 2, top + sh}, color, cv::FILLED);
    cv::rectangle(img, {cx + bw / 2, top}, {cx + bw / 2 + sw, top + sh}, color, cv::FILLED);
}

}  // namespace synth_detail

// One deterministic character/garment pair; `index` selects shape, color and jitter.
inline ImagePair synthetic_pair(std::size_t index, std::uint64_t seed, int size = 64) {
    RngEngine rng = make_rng(seed, "synthetic_pair/" + std::to_string(index));
    const cv::Scalar color = synth_detail::palette_color(rng);
    const int shape = static_cast<int>(uniform_index(rng, 3));

    ImagePair pair;
    pair.id = "synthetic_" + std::to_string(index);
    pair.anime = cv::Mat(size, size, CV_8UC3, cv::Scalar(235, 235, 235));
    const int cx = size / 2 + static_cast<int>(uniform_index(rng, size / 4)) - size / 8;
    const int cy = size / 2 + static_cast<int>(uniform_index(rng, size / 8));
    synth_detail::draw_character(pair.anime, shape, color, cx, cy, size / 5);

    pair.clothing = cv::Mat(size, size, CV_8UC3, cv::Scalar(250, 250, 250));
    synth_detail::draw_garment(pair.clothing, color, size / 2, size);
    return pair;
}

inline std::vector<ImagePair> synthetic_corpus(std::size_t n, std::uint64_t seed,
                                               int size = 64) {
    std::vector<ImagePair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_pair(i, seed, size));
    return out;
}

// ---------------------------------------------------------------------------
// Preparation-pipeline fixture: 12 pairs written to disk, of which 2 are exact
// copies of earlier pairs.  Garments sit at known horizontal centers so the
// calibration stage can be checked against planted ground truth.

struct PrepareFixture {
    std::vector<std::string> ids;
    std::map<std::string, double> garment_center_x;  // planted centers, primaries only
    std::vector<std::pair<std::string, std::string>> duplicate_of;  // copy -> original
};

inline PrepareFixture write_prepare_fixture(const std::string& dir, int size = 64) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    PrepareFixture fx;

    // ten distinct hues keep every cross-pair histogram intersection well
    // below the duplicate threshold
    const int hues[10] = {0, 18, 36, 54, 72, 90, 108, 126, 144, 162};
    const int centers[10] = {24, 40, 28, 36, 32, 26, 38, 30, 34, 25};

    auto make_pair = [&](int i) {
        cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hues[i], 230, 150));
        cv::Mat bgr;
        cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
        const auto px = bgr.at<cv::Vec3b>(0, 0);
        const cv::Scalar color(px[0], px[1], px[2]);

        ImagePair p;
        p.id = "pair" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        p.anime = cv::Mat(size, size, CV_8UC3, cv::Scalar(235, 235, 235));
        synth_detail::draw_character(p.anime, i, color, size / 2, size / 2, size / 5);
        // solid garment block at a planted horizontal center
        p.clothing = cv::Mat(size, size, CV_8UC3, cv::Scalar(250, 250, 250));
        const int cx = centers[i] * size / 64, hw = size / 8, hh = size * 5 / 16;
        cv::rectangle(p.clothing, {cx - hw, size / 2 - hh}, {cx + hw - 1, size / 2 + hh - 1},
                      color, cv::FILLED);
        fx.garment_center_x[p.id] = (cx - hw + cx + hw - 1) / 2.0;
        return p;
    };

    for (int i = 0; i < 10; ++i) {
        ImagePair p = make_pair(i);
        fx.ids.push_back(p.id);
        save_image(p.anime, (fs::path(dir) / (p.id + "_anime.png")).string());
        save_image(p.clothing, (fs::path(dir) / (p.id + "_clothing.png")).string());
    }
    // planted exact duplicates of pair02 and pair07
    for (auto [copy_idx, orig_idx] : std::vector<std::pair<int, int>>{{10, 2}, {11, 7}}) {
        ImagePair orig = make_pair(orig_idx);
        const std::string id = "pair" + std::to_string(copy_idx);
        fx.ids.push_back(id);
        fx.duplicate_of.emplace_back(id, orig.id);
        save_image(orig.anime, (fs::path(dir) / (id + "_anime.png")).string());
        save_image(orig.clothing, (fs::path(dir) / (id + "_clothing.png")).string());
    }
    return fx;
}

}  // namespace cosgan
