#pragma once

#include <cstdint>
#include <stdexcept>

#include "cosgan/generator.hpp"

namespace cosgan {

struct AugmentConfig {
    Scalar rotation_degrees = 3.0;
    Scalar crop_fraction = 0.9;       // crop to this fraction of the side, resize back
    Scalar hue_sat_jitter = 0.05;
    Scalar clothing_flip_prob = 0.5;
};

struct TrainConfig {
    Scalar lr = 0.0002;
    Scalar beta1 = 0.5;
    Scalar beta2 = 0.99;
    int epochs_constant = 70;
    int epochs_decay = 30;
    int batch_size = 8;
    int batch_size_full_res = 4;  // halved at the top resolution stage
    Scalar fade_fraction = 0.5;   // fade-in spans this fraction of each stage
    AugmentConfig augment;
    std::uint64_t seed = 0;

    int total_epochs() const { return epochs_constant + epochs_decay; }
};

// Constant for the first epochs_constant epochs, then linear to zero.
inline Scalar lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 1 || epoch > cfg.total_epochs())
        throw std::invalid_argument("lr_at: epoch out of range");
    if (epoch <= cfg.epochs_constant) return cfg.lr;
    return cfg.lr * static_cast<Scalar>(cfg.total_epochs() - epoch) /
           static_cast<Scalar>(cfg.epochs_decay);
}

// Stage boundaries split the epoch budget evenly; fade_alpha ramps linearly
// over the first fade_fraction of each stage. The first stage never fades.
inline ProgressiveState progressive_schedule(int epoch, const TrainConfig& cfg,
                                             const GeneratorConfig& gcfg) {
    if (epoch < 0 || epoch >= cfg.total_epochs())
        throw std::invalid_argument("progressive_schedule: epoch out of range");
    const int stages = gcfg.max_stage() + 1;
    const int stage_len = cfg.total_epochs() / stages;
    int stage = stage_len > 0 ? epoch / stage_len : 0;
    if (stage >= stages) stage = stages - 1;
    ProgressiveState st;
    st.stage = stage;
    st.resolution = gcfg.resolution_at(stage);
    if (stage == 0) {
        st.fade_alpha = 1.0;
    } else {
        const Scalar into = static_cast<Scalar>(epoch - stage * stage_len);
        const Scalar fade_epochs = cfg.fade_fraction * static_cast<Scalar>(stage_len);
        st.fade_alpha = fade_epochs > 0 ? std::min<Scalar>(1.0, into / fade_epochs) : 1.0;
    }
    return st;
}

inline int batch_size_at(const ProgressiveState& st, const TrainConfig& cfg,
                         const GeneratorConfig& gcfg) {
    return st.resolution >= gcfg.max_res ? cfg.batch_size_full_res : cfg.batch_size;
}

}  // namespace cosgan
