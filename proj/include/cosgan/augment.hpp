#pragma once

#include <opencv2/imgproc.hpp>

#include <cmath>

#include "cosgan/image_io.hpp"
#include "cosgan/rng.hpp"
#include "cosgan/schedule.hpp"

namespace cosgan {

namespace aug_detail {

inline cv::Mat rotate_small(const cv::Mat& img, double degrees) {
    cv::Mat rot = cv::getRotationMatrix2D(
        cv::Point2f(img.cols / 2.0f, img.rows / 2.0f), degrees, 1.0);
    cv::Mat out;
    cv::warpAffine(img, out, rot, img.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    return out;
}

inline cv::Mat random_crop_resize(const cv::Mat& img, double fraction, RngEngine& rng) {
    const int cw = std::max(1, static_cast<int>(std::lround(img.cols * fraction)));
    const int ch = std::max(1, static_cast<int>(std::lround(img.rows * fraction)));
    const int maxx = img.cols - cw, maxy = img.rows - ch;
    const int ox = maxx > 0 ? static_cast<int>(uniform_index(rng, maxx + 1)) : 0;
    const int oy = maxy > 0 ? static_cast<int>(uniform_index(rng, maxy + 1)) : 0;
    cv::Mat crop = img(cv::Rect(ox, oy, cw, ch));
    cv::Mat out;
    cv::resize(crop, out, img.size(), 0, 0, cv::INTER_CUBIC);
    return out;
}

// hue shift as a fraction of the full circle, saturation as a multiplier
inline cv::Mat hue_sat_jitter(const cv::Mat& img, double hue_shift, double sat_scale) {
    cv::Mat f;
    img.convertTo(f, CV_32FC3, 1.0 / 255.0);
    cv::Mat hsv;
    cv::cvtColor(f, hsv, cv::COLOR_BGR2HSV);  // H in [0,360)
    for (int y = 0; y < hsv.rows; ++y) {
        cv::Vec3f* row = hsv.ptr<cv::Vec3f>(y);
        for (int x = 0; x < hsv.cols; ++x) {
            float h = row[x][0] + static_cast<float>(hue_shift * 360.0);
            if (h >= 360.0f) h -= 360.0f;
            if (h < 0.0f) h += 360.0f;
            row[x][0] = h;
            row[x][1] = std::clamp(row[x][1] * static_cast<float>(sat_scale), 0.0f, 1.0f);
        }
    }
    cv::Mat bgr, out;
    cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
    bgr.convertTo(out, CV_8UC3, 255.0);
    return out;
}

}  // namespace aug_detail

// Anime side: rotation, crop, hue/saturation jitter. Clothing side: only a
// horizontal flip. No augmentation crosses sides; a disabled knob leaves the
// pixels bit-identical.
inline ImagePair augment(const ImagePair& pair, const AugmentConfig& cfg, RngEngine& rng) {
    ImagePair out;
    out.id = pair.id;
    cv::Mat anime = pair.anime;
    if (cfg.rotation_degrees > 0)
        anime = aug_detail::rotate_small(anime, uniform(rng, -cfg.rotation_degrees,
                                                        cfg.rotation_degrees));
    if (cfg.crop_fraction > 0 && cfg.crop_fraction < 1)
        anime = aug_detail::random_crop_resize(anime, cfg.crop_fraction, rng);
    if (cfg.hue_sat_jitter > 0) {
        const double h = uniform(rng, -cfg.hue_sat_jitter, cfg.hue_sat_jitter);
        const double s = uniform(rng, 1.0 - cfg.hue_sat_jitter, 1.0 + cfg.hue_sat_jitter);
        anime = aug_detail::hue_sat_jitter(anime, h, s);
    }
    out.anime = anime;

    cv::Mat clothing = pair.clothing;
    if (cfg.clothing_flip_prob > 0 && uniform01(rng) < cfg.clothing_flip_prob) {
        cv::Mat flipped;  // never flip in place: the input must stay untouched
        cv::flip(clothing, flipped, 1);
        clothing = flipped;
    }
    out.clothing = clothing;
    return out;
}

// Per-sample augmentation stream derived from (seed, epoch, index) so that
// prefetch order cannot change results.
inline RngEngine augment_rng(std::uint64_t seed, int epoch, std::size_t sample_index) {
    return make_rng(seed, "augment/" + std::to_string(epoch) + "/" + std::to_string(sample_index));
}

}  // namespace cosgan
