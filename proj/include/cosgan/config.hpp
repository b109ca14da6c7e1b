#pragma once

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>

#include "cosgan/discriminators.hpp"
#include "cosgan/losses.hpp"
#include "cosgan/schedule.hpp"

namespace cosgan {

using json = nlohmann::json;

inline void to_json(json& j, const GeneratorConfig& c) {
    j = json{{"min_res", c.min_res},   {"max_res", c.max_res}, {"base_ch", c.base_ch},
             {"ch_cap", c.ch_cap},     {"init_std", c.init_std},
             {"lrelu_slope", c.lrelu_slope}, {"disable_skips", c.disable_skips}};
}
inline void from_json(const json& j, GeneratorConfig& c) {
    c.min_res = j.value("min_res", c.min_res);
    c.max_res = j.value("max_res", c.max_res);
    c.base_ch = j.value("base_ch", c.base_ch);
    c.ch_cap = j.value("ch_cap", c.ch_cap);
    c.init_std = j.value("init_std", c.init_std);
    c.lrelu_slope = j.value("lrelu_slope", c.lrelu_slope);
    c.disable_skips = j.value("disable_skips", c.disable_skips);
}

inline void to_json(json& j, const DiscriminatorConfig& c) {
    j = json{{"base_ch", c.base_ch},
             {"spectral", c.spectral},
             {"multiscale_domain", c.multiscale_domain},
             {"multiscale_realfake", c.multiscale_realfake},
             {"lrelu_slope", c.lrelu_slope},
             {"init_std", c.init_std},
             {"seed", c.seed}};
}
inline void from_json(const json& j, DiscriminatorConfig& c) {
    c.base_ch = j.value("base_ch", c.base_ch);
    c.spectral = j.value("spectral", c.spectral);
    c.multiscale_domain = j.value("multiscale_domain", c.multiscale_domain);
    c.multiscale_realfake = j.value("multiscale_realfake", c.multiscale_realfake);
    c.lrelu_slope = j.value("lrelu_slope", c.lrelu_slope);
    c.init_std = j.value("init_std", c.init_std);
    c.seed = j.value("seed", c.seed);
}

inline void to_json(json& j, const TermFlags& f) {
    j = json{{"adv_domain", f.adv_domain},
             {"adv_realfake", f.adv_realfake},
             {"unassociated", f.unassociated},
             {"fm_domain", f.fm_domain},
             {"fm_realfake", f.fm_realfake},
             {"input_consistency", f.input_consistency},
             {"l1", f.l1}};
}
inline void from_json(const json& j, TermFlags& f) {
    f.adv_domain = j.value("adv_domain", f.adv_domain);
    f.adv_realfake = j.value("adv_realfake", f.adv_realfake);
    f.unassociated = j.value("unassociated", f.unassociated);
    f.fm_domain = j.value("fm_domain", f.fm_domain);
    f.fm_realfake = j.value("fm_realfake", f.fm_realfake);
    f.input_consistency = j.value("input_consistency", f.input_consistency);
    f.l1 = j.value("l1", f.l1);
}

inline void to_json(json& j, const LossWeights& w) {
    j = json{{"lambda_l1", w.lambda_l1}, {"layer_weights", w.layer_weights}, {"term_flags", w.flags}};
}
inline void from_json(const json& j, LossWeights& w) {
    w.lambda_l1 = j.value("lambda_l1", w.lambda_l1);
    if (j.contains("layer_weights")) w.layer_weights = j.at("layer_weights").get<std::vector<Scalar>>();
    if (j.contains("term_flags")) j.at("term_flags").get_to(w.flags);
}

inline void to_json(json& j, const AugmentConfig& a) {
    j = json{{"rotation_degrees", a.rotation_degrees},
             {"crop_fraction", a.crop_fraction},
             {"hue_sat_jitter", a.hue_sat_jitter},
             {"clothing_flip_prob", a.clothing_flip_prob}};
}
inline void from_json(const json& j, AugmentConfig& a) {
    a.rotation_degrees = j.value("rotation_degrees", a.rotation_degrees);
    a.crop_fraction = j.value("crop_fraction", a.crop_fraction);
    a.hue_sat_jitter = j.value("hue_sat_jitter", a.hue_sat_jitter);
    a.clothing_flip_prob = j.value("clothing_flip_prob", a.clothing_flip_prob);
}

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr", c.lr},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"epochs_constant", c.epochs_constant},
             {"epochs_decay", c.epochs_decay},
             {"batch_size", c.batch_size},
             {"batch_size_full_res", c.batch_size_full_res},
             {"fade_fraction", c.fade_fraction},
             {"augment", c.augment},
             {"seed", c.seed}};
}
inline void from_json(const json& j, TrainConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epochs_constant = j.value("epochs_constant", c.epochs_constant);
    c.epochs_decay = j.value("epochs_decay", c.epochs_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.batch_size_full_res = j.value("batch_size_full_res", c.batch_size_full_res);
    c.fade_fraction = j.value("fade_fraction", c.fade_fraction);
    if (j.contains("augment")) j.at("augment").get_to(c.augment);
    c.seed = j.value("seed", c.seed);
}

struct RunConfig {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    LossWeights losses;
    TrainConfig train;
    bool progressive = true;
    bool calibrate_dataset = true;
    std::string ladder_row;  // set when built from the configuration ladder
};

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"generator", c.generator}, {"discriminator", c.discriminator},
             {"losses", c.losses},       {"train", c.train},
             {"progressive", c.progressive}, {"calibrate_dataset", c.calibrate_dataset},
             {"ladder_row", c.ladder_row}};
}
inline void from_json(const json& j, RunConfig& c) {
    if (j.contains("generator")) j.at("generator").get_to(c.generator);
    if (j.contains("discriminator")) j.at("discriminator").get_to(c.discriminator);
    if (j.contains("losses")) j.at("losses").get_to(c.losses);
    if (j.contains("train")) j.at("train").get_to(c.train);
    c.progressive = j.value("progressive", c.progressive);
    c.calibrate_dataset = j.value("calibrate_dataset", c.calibrate_dataset);
    c.ladder_row = j.value("ladder_row", c.ladder_row);
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    json j;
    in >> j;
    return j.get<RunConfig>();
}

inline void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << json(cfg).dump(2) << "\n";
}

// Dotted-path override, e.g. "train.lr=0.001" or "losses.term_flags.l1=false".
inline void apply_override(json& j, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must be key=value: " + kv);
    std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json* cur = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot - pos);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*cur)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        cur = &(*cur)[part];
        pos = dot + 1;
    }
}

// The cumulative configuration ladder, rows (a)..(j). Each row enables one
// more technique on top of the previous row.
inline RunConfig ladder_config(char row, const RunConfig& base = {}) {
    if (row < 'a' || row > 'j')
        throw std::invalid_argument("ladder row must be in a..j");
    RunConfig c = base;
    c.ladder_row = std::string(1, row);
    TermFlags& f = c.losses.flags;
    f.adv_domain = true;
    f.l1 = true;
    f.adv_realfake = row >= 'd';
    f.unassociated = row >= 'e';
    f.fm_domain = row >= 'i';
    f.fm_realfake = row >= 'i';
    f.input_consistency = row >= 'j';
    c.progressive = row >= 'b';
    c.calibrate_dataset = row >= 'c';
    c.discriminator.spectral = row >= 'f';
    c.discriminator.multiscale_domain = row >= 'g';
    c.discriminator.multiscale_realfake = row >= 'h';
    return c;
}

// Names of the loss terms a ladder row enables, for the loss-record schema.
inline std::vector<std::string> enabled_generator_terms(const RunConfig& c) {
    std::vector<std::string> out;
    const TermFlags& f = c.losses.flags;
    if (f.adv_domain) out.push_back("adv_domain");
    if (f.adv_realfake) out.push_back("adv_realfake");
    if (f.fm_domain) out.push_back("fm_domain");
    if (f.fm_realfake) out.push_back("fm_realfake");
    if (f.input_consistency) out.push_back("input_consistency");
    if (f.l1) out.push_back("l1");
    return out;
}

}  // namespace cosgan
