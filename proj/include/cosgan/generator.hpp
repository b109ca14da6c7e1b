#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "cosgan/layers.hpp"

namespace cosgan {

struct ProgressiveState {
    int stage = 0;
    Scalar fade_alpha = 1.0;
    int resolution = 0;
};

struct GeneratorConfig {
    int min_res = 32;
    int max_res = 256;
    int base_ch = 16;   // channels at max_res
    int ch_cap = 512;
    Scalar init_std = 0.02;
    Scalar lrelu_slope = 0.2;
    bool disable_skips = false;  // diagnostic: zero the skip connections

    int max_stage() const {
        int s = 0;
        for (int r = min_res; r < max_res; r *= 2) ++s;
        return s;
    }
    int resolution_at(int stage) const { return min_res << stage; }
    int channels(int res) const { return std::min(ch_cap, base_ch * (max_res / res)); }
};

// Progressive U-Net. Parameters are keyed by the resolution a block operates
// at, so growing a stage adds blocks without touching existing ones.
struct GeneratorParams {
    GeneratorConfig cfg;
    ParamStore store;
    int built_stage = -1;  // highest stage whose blocks exist
};

namespace gen_detail {

inline std::string in_adapt(int res) { return "G.in" + std::to_string(res); }
inline std::string enc(int res) { return "G.enc" + std::to_string(res); }
inline std::string dec(int res) { return "G.dec" + std::to_string(res); }
inline std::string out_adapt(int res) { return "G.out" + std::to_string(res); }

inline void build_stage_blocks(GeneratorParams& p, int stage, RngEngine& rng) {
    const GeneratorConfig& c = p.cfg;
    const int R = c.resolution_at(stage);
    ensure_conv(p.store, in_adapt(R), {3, c.channels(R), 3, 1, 1}, rng, c.init_std);
    if (stage == 0) {
        for (int r = R; r > 4; r /= 2)
            ensure_conv(p.store, enc(r), {c.channels(r), c.channels(r / 2), 3, 2, 1}, rng, c.init_std);
        ensure_conv(p.store, "G.bottleneck", {c.channels(4), c.channels(4), 3, 1, 1}, rng, c.init_std);
        for (int r = 8; r <= R; r *= 2)
            ensure_conv(p.store, dec(r), {c.channels(r / 2) + c.channels(r), c.channels(r), 3, 1, 1},
                        rng, c.init_std);
    } else {
        ensure_conv(p.store, enc(R), {c.channels(R), c.channels(R / 2), 3, 2, 1}, rng, c.init_std);
        ensure_conv(p.store, dec(R), {c.channels(R / 2) + c.channels(R), c.channels(R), 3, 1, 1},
                    rng, c.init_std);
    }
    ensure_conv(p.store, out_adapt(R), {c.channels(R), 3, 3, 1, 1}, rng, c.init_std);
}

// Full path for one stage (no fade), input at that stage's resolution.
inline Var forward_stage(Graph& g, const GeneratorParams& p, int stage, const Var& x) {
    const GeneratorConfig& c = p.cfg;
    const int R = c.resolution_at(stage);
    auto act = [&](const Var& v) { return leaky_relu(v, c.lrelu_slope); };

    std::vector<std::pair<int, Var>> skips;  // (resolution, encoder features)
    Var f = act(apply_conv(g, in_adapt(R), x, {3, c.channels(R), 3, 1, 1}));
    skips.push_back({R, f});
    for (int r = R; r > 4; r /= 2) {
        f = act(apply_conv(g, enc(r), f, {c.channels(r), c.channels(r / 2), 3, 2, 1}));
        if (r / 2 > 4) skips.push_back({r / 2, f});
    }
    Var d = act(apply_conv(g, "G.bottleneck", f, {c.channels(4), c.channels(4), 3, 1, 1}));
    for (int r = 8; r <= R; r *= 2) {
        Var up = upsample_nearest2(d);
        Var skip = skips.back().second;
        if (skips.back().first != r)
            throw std::logic_error("generator: skip wiring out of order");
        skips.pop_back();
        if (c.disable_skips) skip = constant(Tensor(skip->val.shape()));
        d = act(apply_conv(g, dec(r), concat_channels(up, skip),
                           {c.channels(r / 2) + c.channels(r), c.channels(r), 3, 1, 1}));
    }
    return tanh_act(apply_conv(g, out_adapt(R), d, {c.channels(R), 3, 3, 1, 1}));
}

}  // namespace gen_detail

inline GeneratorParams init_generator(std::uint64_t seed, const GeneratorConfig& cfg = {}) {
    GeneratorParams p;
    p.cfg = cfg;
    RngEngine rng = make_rng(seed, "generator_init");
    gen_detail::build_stage_blocks(p, 0, rng);
    p.built_stage = 0;
    return p;
}

inline ProgressiveState initial_state(const GeneratorConfig& cfg = {}) {
    return ProgressiveState{0, 1.0, cfg.resolution_at(0)};
}

inline void check_progressive(const GeneratorParams& p, const ProgressiveState& st) {
    if (st.stage < 0 || st.stage > p.built_stage)
        throw std::invalid_argument("generator: stage " + std::to_string(st.stage) +
                                    " has no built blocks");
    if (st.resolution != p.cfg.resolution_at(st.stage))
        throw std::invalid_argument("generator: state resolution inconsistent with stage");
    if (st.fade_alpha < 0.0 || st.fade_alpha > 1.0)
        throw std::invalid_argument("generator: fade_alpha out of [0,1]");
}

// Graph-building forward with fade-in blending at the image level.
inline Var generator_forward(Graph& g, const GeneratorParams& p, const ProgressiveState& st,
                             const Var& x) {
    check_progressive(p, st);
    if (x->val.dim(2) != st.resolution || x->val.dim(3) != st.resolution)
        throw std::invalid_argument("generator: input resolution " + std::to_string(x->val.dim(2)) +
                                    " does not match stage resolution " +
                                    std::to_string(st.resolution));
    const bool fading = st.stage > 0 && st.fade_alpha < 1.0;
    if (!fading) return gen_detail::forward_stage(g, p, st.stage, x);
    Var old_out = upsample_nearest2(
        gen_detail::forward_stage(g, p, st.stage - 1, avgpool2(x)));
    if (st.fade_alpha <= 0.0) return old_out;
    Var new_out = gen_detail::forward_stage(g, p, st.stage, x);
    return lincomb(new_out, st.fade_alpha, old_out, 1.0 - st.fade_alpha);
}

// Inference entry point: batched NCHW in, NCHW out, deterministic.
inline Tensor generate(const Tensor& x, const GeneratorParams& params, const ProgressiveState& st) {
    check_image_batch(x, "generator input");
    if (!params.store.all_finite())
        throw std::invalid_argument("generator: non-finite weights");
    ParamStore& store = const_cast<ParamStore&>(params.store);
    Graph g(store, /*with_grad=*/false);
    return generator_forward(g, params, st, constant(x))->val;
}

// Adds one resolution stage. Pre-existing weights are untouched.
inline ProgressiveState grow(GeneratorParams& params, const ProgressiveState& st,
                             std::uint64_t seed = 0x6e657731) {
    check_progressive(params, st);
    if (st.stage >= params.cfg.max_stage())
        throw std::invalid_argument("grow: already at maximum resolution");
    if (st.fade_alpha < 1.0)
        throw std::invalid_argument("grow: current stage still fading in");
    const int next = st.stage + 1;
    if (next > params.built_stage) {
        RngEngine rng = make_rng(seed, "generator_grow_stage" + std::to_string(next));
        gen_detail::build_stage_blocks(params, next, rng);
        params.built_stage = next;
    }
    return ProgressiveState{next, 0.0, params.cfg.resolution_at(next)};
}

}  // namespace cosgan
