#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/generator.hpp"
#include "cosgan/layers.hpp"

namespace cosgan {

// Score maps plus tapped trunk activations of one (sub-)discriminator.
struct PatchScoreMapsG {
    std::vector<Var> scores;
    std::vector<Var> features;
};

struct PatchScoreMaps {
    std::vector<Tensor> scores;
    std::vector<Tensor> features;
};

inline PatchScoreMaps values_of(const PatchScoreMapsG& g) {
    PatchScoreMaps out;
    for (const auto& s : g.scores) out.scores.push_back(s->val);
    for (const auto& f : g.features) out.features.push_back(f->val);
    return out;
}

struct DiscriminatorConfig {
    int base_ch = 16;
    bool spectral = true;
    bool multiscale_domain = true;    // three input scales for D_d
    bool multiscale_realfake = true;  // three patch heads for D_r
    Scalar lrelu_slope = 0.2;
    Scalar init_std = 0.02;
    std::uint64_t seed = 0xd15c0;
};

// Both discriminator families tap T = 5 trunk activations.
constexpr int kTapCount = 5;

struct DiscriminatorParams {
    DiscriminatorConfig cfg;
    ParamStore store;
};

// level-0 entry is the image itself; level k is the 2x2 mean pool of k-1.
inline std::vector<Tensor> downsample_pyramid(const Tensor& img, int levels) {
    check_image_batch(img, "pyramid input");
    if (levels < 1) throw std::invalid_argument("downsample_pyramid: levels must be >= 1");
    const int div = 1 << (levels - 1);
    if (img.dim(2) % div != 0 || img.dim(3) % div != 0)
        throw std::invalid_argument("downsample_pyramid: size not divisible by 2^(levels-1)");
    std::vector<Tensor> out{img};
    Var cur = constant(img);
    for (int k = 1; k < levels; ++k) {
        cur = avgpool2(cur);
        out.push_back(cur->val);
    }
    return out;
}

namespace disc_detail {

// Valid convolutions fall back to pad-1 when the input is smaller than the
// kernel, so every stage resolution yields at least a 1x1 map.
inline int adaptive_pad(int in, int k, int pad) {
    if (pad == 0 && in < k) return 1;
    return pad;
}

inline Var conv_block(Graph& g, const std::string& name, const Var& x, int in_ch, int out_ch,
                      int k, int stride, int pad, const DiscriminatorConfig& cfg, RngEngine& rng) {
    const int p = adaptive_pad(x->val.dim(2), k, pad);
    ConvSpec spec{in_ch, out_ch, k, stride, p, cfg.spectral};
    ensure_conv(g.store(), name, spec, rng, cfg.init_std);
    return leaky_relu(apply_conv(g, name, x, spec), cfg.lrelu_slope);
}

inline Var score_head(Graph& g, const std::string& name, const Var& feat, int in_ch,
                      const DiscriminatorConfig& cfg, RngEngine& rng) {
    ConvSpec spec{in_ch, 1, 1, 1, 0, cfg.spectral};
    ensure_conv(g.store(), name, spec, rng, cfg.init_std);
    return apply_conv(g, name, feat, spec);
}

// Fade-in blend on the input image: new high-resolution detail is mixed with
// the upsampled low-resolution view, mirroring the generator's schedule.
inline Var fade_input(const Var& x, const ProgressiveState& st) {
    if (st.stage == 0 || st.fade_alpha >= 1.0) return x;
    Var coarse = upsample_nearest2(avgpool2(x));
    if (st.fade_alpha <= 0.0) return coarse;
    return lincomb(x, st.fade_alpha, coarse, 1.0 - st.fade_alpha);
}

}  // namespace disc_detail

// ---------------------------------------------------------------------------
// Real/fake multi-scale patch discriminator D_r: one trunk, chained heads.
// At 256x256 input the heads emit 61x61, 13x13 and 1x1 score maps.

inline PatchScoreMapsG realfake_forward(Graph& g, const DiscriminatorParams& params,
                                        const ProgressiveState& st, const Var& img_in) {
    const DiscriminatorConfig& cfg = params.cfg;
    const int c = cfg.base_ch;
    RngEngine rng = make_rng(cfg.seed, "realfake_build");
    Var x = disc_detail::fade_input(img_in, st);

    PatchScoreMapsG out;
    using disc_detail::conv_block;
    Var t1 = conv_block(g, "Dr.t1", x, 3, c, 3, 1, 1, cfg, rng);
    Var t2 = conv_block(g, "Dr.t2", t1, c, 2 * c, 4, 2, 1, cfg, rng);
    Var t3 = conv_block(g, "Dr.t3", t2, 2 * c, 4 * c, 4, 2, 1, cfg, rng);
    Var t4 = conv_block(g, "Dr.t4", t3, 4 * c, 4 * c, 4, 1, 0, cfg, rng);
    out.features = {t1, t2, t3, t4};
    Var head1 = disc_detail::score_head(g, "Dr.h1", t4, 4 * c, cfg, rng);

    Var c5 = conv_block(g, "Dr.c5", t4, 4 * c, 4 * c, 3, 2, 0, cfg, rng);
    Var c6 = conv_block(g, "Dr.c6", c5, 4 * c, 4 * c, 3, 2, 1, cfg, rng);
    Var c7 = conv_block(g, "Dr.c7", c6, 4 * c, 4 * c, 3, 1, 0, cfg, rng);
    out.features.push_back(c7);
    Var head2 = disc_detail::score_head(g, "Dr.h2", c7, 4 * c, cfg, rng);

    Var tail = c7;
    if (tail->val.dim(2) >= 5) {
        tail = conv_block(g, "Dr.c8", tail, 4 * c, 4 * c, 3, 2, 0, cfg, rng);
        tail = conv_block(g, "Dr.c9", tail, 4 * c, 4 * c, 3, 2, 1, cfg, rng);
        tail = conv_block(g, "Dr.c10", tail, 4 * c, 4 * c, 3, 1, 0, cfg, rng);
    }
    if (tail->val.dim(2) > 1) tail = global_avgpool(tail);
    Var head3 = disc_detail::score_head(g, "Dr.h3", tail, 4 * c, cfg, rng);

    if (cfg.multiscale_realfake)
        out.scores = {head1, head2, head3};
    else
        out.scores = {head3};
    return out;
}

inline PatchScoreMaps realfake_discriminate(const Tensor& img, DiscriminatorParams& params,
                                            const ProgressiveState& st) {
    check_image_batch(img, "realfake input");
    if (img.dim(2) != st.resolution)
        throw std::invalid_argument("realfake_discriminate: resolution mismatch");
    Graph g(params.store, /*with_grad=*/false);
    return values_of(realfake_forward(g, params, st, constant(img)));
}

// ---------------------------------------------------------------------------
// Improved domain discriminator D_d: three unshared copies of one patch
// network judging the channel-concatenated (x, y) pair at full, 1/2 and 1/4
// resolution.

inline PatchScoreMapsG domain_forward_scale(Graph& g, const DiscriminatorParams& params, int scale,
                                            const Var& pair) {
    const DiscriminatorConfig& cfg = params.cfg;
    const int c = cfg.base_ch;
    RngEngine rng = make_rng(cfg.seed, "domain_build" + std::to_string(scale));
    const std::string p = "Dd" + std::to_string(scale) + ".";
    using disc_detail::conv_block;
    Var b1 = conv_block(g, p + "b1", pair, 6, c, 3, 2, 1, cfg, rng);
    Var b2 = conv_block(g, p + "b2", b1, c, 2 * c, 3, 2, 1, cfg, rng);
    Var b3 = conv_block(g, p + "b3", b2, 2 * c, 4 * c, 3, 2, 1, cfg, rng);
    Var b4 = conv_block(g, p + "b4", b3, 4 * c, 4 * c, 3, 1, 1, cfg, rng);
    Var b5 = conv_block(g, p + "b5", b4, 4 * c, 4 * c, 3, 1, 1, cfg, rng);
    PatchScoreMapsG out;
    out.features = {b1, b2, b3, b4, b5};
    ConvSpec sspec{4 * c, 1, 3, 1, 1, cfg.spectral};
    ensure_conv(g.store(), p + "score", sspec, rng, cfg.init_std);
    out.scores = {apply_conv(g, p + "score", b5, sspec)};
    return out;
}

inline std::vector<PatchScoreMapsG> domain_forward(Graph& g, const DiscriminatorParams& params,
                                                   const ProgressiveState& st, const Var& x,
                                                   const Var& y) {
    if (!x->val.same_shape(y->val))
        throw std::invalid_argument("domain_discriminate: x/y shape mismatch");
    Var pair = concat_channels(disc_detail::fade_input(x, st), disc_detail::fade_input(y, st));
    std::vector<PatchScoreMapsG> out;
    out.push_back(domain_forward_scale(g, params, 1, pair));
    if (params.cfg.multiscale_domain) {
        Var half = avgpool2(pair);
        out.push_back(domain_forward_scale(g, params, 2, half));
        out.push_back(domain_forward_scale(g, params, 3, avgpool2(half)));
    }
    return out;
}

inline std::vector<PatchScoreMaps> domain_discriminate(const Tensor& x, const Tensor& y,
                                                       DiscriminatorParams& params,
                                                       const ProgressiveState& st) {
    check_image_batch(x, "domain input x");
    check_image_batch(y, "domain input y");
    if (x.dim(2) != st.resolution)
        throw std::invalid_argument("domain_discriminate: resolution mismatch");
    Graph g(params.store, /*with_grad=*/false);
    auto maps = domain_forward(g, params, st, constant(x), constant(y));
    std::vector<PatchScoreMaps> out;
    for (const auto& m : maps) out.push_back(values_of(m));
    return out;
}

// Eagerly materializes every discriminator parameter for a given stage
// resolution, so init order (and checkpoints) do not depend on first use.
inline DiscriminatorParams init_discriminators(std::uint64_t seed, const DiscriminatorConfig& cfg,
                                               int resolution) {
    DiscriminatorParams params;
    params.cfg = cfg;
    params.cfg.seed = seed;
    ProgressiveState st{0, 1.0, resolution};
    Tensor img({1, 3, resolution, resolution});
    Graph g1(params.store, false);
    realfake_forward(g1, params, st, constant(img));
    Graph g2(params.store, false);
    domain_forward(g2, params, st, constant(img), constant(img));
    return params;
}

}  // namespace cosgan
