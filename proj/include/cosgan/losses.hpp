#pragma once

#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/discriminators.hpp"
#include "cosgan/generator.hpp"

namespace cosgan {

struct TermFlags {
    bool adv_domain = true;
    bool adv_realfake = true;
    bool unassociated = true;
    bool fm_domain = true;
    // The printed full objective omits this term even though the ablation
    // adds both feature-matching losses; it stays available behind a flag.
    bool fm_realfake = false;
    bool input_consistency = true;
    bool l1 = true;
};

struct LossWeights {
    Scalar lambda_l1 = 10.0;
    std::vector<Scalar> layer_weights = {5.0, 1.5, 1.5, 1.5, 1.0};  // N1..N5
    TermFlags flags;

    void validate() const {
        if (lambda_l1 < 0) throw std::invalid_argument("LossWeights: lambda < 0");
        for (Scalar w : layer_weights)
            if (w < 0) throw std::invalid_argument("LossWeights: negative layer weight");
    }
};

struct PairSample {
    Tensor x;  // 3xHxW, [-1,1]
    Tensor y;  // 3xHxW, [-1,1]
    bool associated = true;
};

using PairBatch = std::vector<PairSample>;

inline Tensor stack_batch(const std::vector<const Tensor*>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("stack_batch: empty");
    const auto& s = imgs[0]->shape();
    if (s.size() != 3) throw std::invalid_argument("stack_batch: expected CHW samples");
    Tensor out({static_cast<int>(imgs.size()), s[0], s[1], s[2]});
    const std::size_t n = imgs[0]->numel();
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        if (!imgs[i]->same_shape(*imgs[0]))
            throw std::invalid_argument("stack_batch: ragged sample shapes");
        std::copy_n(imgs[i]->data(), n, out.data() + i * n);
    }
    return out;
}

inline Tensor stack_x(const PairBatch& b) {
    std::vector<const Tensor*> v;
    for (const auto& s : b) v.push_back(&s.x);
    return stack_batch(v);
}

inline Tensor stack_y(const PairBatch& b) {
    std::vector<const Tensor*> v;
    for (const auto& s : b) v.push_back(&s.y);
    return stack_batch(v);
}

// ---------------------------------------------------------------------------
// Individual terms (tensor level). Graph-level variants build on autodiff ops.

// mean over the pooled elements of all maps of (score - target)^2
inline Scalar lsgan_term(const PatchScoreMaps& maps, Scalar target) {
    if (maps.scores.empty()) throw std::invalid_argument("lsgan_term: no score maps");
    Scalar acc = 0;
    std::size_t total = 0;
    for (const auto& m : maps.scores) {
        total += m.numel();
        for (std::size_t i = 0; i < m.numel(); ++i) {
            Scalar d = m[i] - target;
            acc += d * d;
        }
    }
    if (total == 0) throw std::invalid_argument("lsgan_term: empty score maps");
    return acc / static_cast<Scalar>(total);
}

inline Scalar l1_term(const Tensor& y, const Tensor& y_hat) {
    if (!y.same_shape(y_hat)) throw std::invalid_argument("l1_term: shape mismatch");
    Scalar acc = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += std::abs(y[i] - y_hat[i]);
    return acc / static_cast<Scalar>(y.numel());
}

// sum_i N_i * meanAbs(real_i - fake_i); N_i are free per-layer weights on the
// element-normalized L1 distance.
inline Scalar feature_matching_term(const std::vector<Tensor>& feats_real,
                                    const std::vector<Tensor>& feats_fake,
                                    const LossWeights& w) {
    if (feats_real.size() != feats_fake.size() || feats_real.empty())
        throw std::invalid_argument("feature_matching_term: layer count mismatch");
    if (w.layer_weights.size() != feats_real.size())
        throw std::invalid_argument("feature_matching_term: layer weights length " +
                                    std::to_string(w.layer_weights.size()) + " vs taps " +
                                    std::to_string(feats_real.size()));
    Scalar acc = 0;
    for (std::size_t i = 0; i < feats_real.size(); ++i) {
        if (!feats_real[i].same_shape(feats_fake[i]))
            throw std::invalid_argument("feature_matching_term: layer shape mismatch");
        Scalar layer = 0;
        for (std::size_t j = 0; j < feats_real[i].numel(); ++j)
            layer += std::abs(feats_real[i][j] - feats_fake[i][j]);
        acc += w.layer_weights[i] * layer / static_cast<Scalar>(feats_real[i].numel());
    }
    return acc;
}

// Same weighted form, comparing D_r taps of the anime input with D_r taps of
// the generated image.
inline Scalar input_consistency_term(const std::vector<Tensor>& feats_input,
                                     const std::vector<Tensor>& feats_generated,
                                     const LossWeights& w) {
    return feature_matching_term(feats_input, feats_generated, w);
}

// Derangement pairing via Sattolo's algorithm: every draw is a single cycle,
// so no sample ever keeps its own clothing image.
inline PairBatch sample_unassociated(const PairBatch& batch, RngEngine& rng) {
    if (batch.size() < 2)
        throw std::invalid_argument("sample_unassociated: batch must have >= 2 samples");
    std::vector<std::size_t> perm(batch.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = batch.size() - 1; i >= 1; --i)
        std::swap(perm[i], perm[uniform_index(rng, i)]);
    PairBatch out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.push_back(PairSample{batch[i].x, batch[perm[i]].y, false});
    return out;
}

// ---------------------------------------------------------------------------
// Graph-level composition of the full objective

namespace loss_detail {

inline Var lsgan_g(const PatchScoreMapsG& maps, Scalar target) {
    return mean_squared_to(maps.scores, target);
}

inline Var lsgan_scale_avg_g(const std::vector<PatchScoreMapsG>& per_scale, Scalar target) {
    std::vector<Var> terms;
    for (const auto& m : per_scale) terms.push_back(lsgan_g(m, target));
    return scalar_comb(terms, std::vector<Scalar>(terms.size(), 1.0 / terms.size()));
}

inline Var fm_g(const std::vector<Var>& real, const std::vector<Var>& fake,
                const LossWeights& w) {
    if (real.size() != fake.size() || real.size() != w.layer_weights.size())
        throw std::invalid_argument("feature matching: tap/weight count mismatch");
    std::vector<Var> terms;
    for (std::size_t i = 0; i < real.size(); ++i)
        terms.push_back(mean_abs_diff(real[i], fake[i]));
    return scalar_comb(terms, w.layer_weights);
}

inline Var fm_scale_avg_g(const std::vector<PatchScoreMapsG>& real,
                          const std::vector<PatchScoreMapsG>& fake, const LossWeights& w) {
    std::vector<Var> terms;
    for (std::size_t k = 0; k < real.size(); ++k)
        terms.push_back(fm_g(real[k].features, fake[k].features, w));
    return scalar_comb(terms, std::vector<Scalar>(terms.size(), 1.0 / terms.size()));
}

inline std::vector<Var> detach_features(const std::vector<Var>& feats) {
    std::vector<Var> out;
    for (const auto& f : feats) out.push_back(detach(f));
    return out;
}

}  // namespace loss_detail

struct LossRecord {
    std::map<std::string, Scalar> generator_terms;
    std::map<std::string, Scalar> domain_disc_terms;
    std::map<std::string, Scalar> realfake_disc_terms;
    Scalar generator_total = 0;
    Scalar domain_disc_total = 0;
    Scalar realfake_disc_total = 0;
};

struct LossBundle {
    Var generator_loss;       // graph over generator parameters (D frozen)
    Var domain_disc_loss;     // graph over D_d parameters (G frozen)
    Var realfake_disc_loss;   // graph over D_r parameters (G frozen)
    Graph::Bindings generator_binds;
    Graph::Bindings domain_disc_binds;
    Graph::Bindings realfake_disc_binds;
    LossRecord record;
};

// add leaf gradients onto the bound parameters (after backward())
inline void harvest_gradients(const Graph::Bindings& binds) {
    for (const auto& [p, v] : binds) {
        if (!v->requires_grad || v->grad.numel() == 0) continue;
        if (p->grad.numel() != p->value.numel()) p->grad = Tensor(p->value.shape());
        for (std::size_t i = 0; i < v->grad.numel(); ++i) p->grad[i] += v->grad[i];
    }
}

// Builds the three optimization targets of the full objective on one batch.
// y_unassoc carries real clothing images deranged against x (may be empty
// when the unassociated term is disabled).
inline LossBundle total_losses(GeneratorParams& gen, DiscriminatorParams& disc,
                               const ProgressiveState& st, const Tensor& x, const Tensor& y,
                               const Tensor& y_unassoc, const LossWeights& w,
                               bool with_grad = true) {
    w.validate();
    if (!x.same_shape(y)) throw std::invalid_argument("total_losses: x/y shape mismatch");
    using namespace loss_detail;
    LossBundle out;
    LossRecord& rec = out.record;
    const Var xc = constant(x);
    const Var yc = constant(y);

    // Detached generator output for the discriminator updates.
    Tensor y_hat_val = generate(x, gen, st);
    const Var y_hat_c = constant(y_hat_val);

    // --- D_d objective -----------------------------------------------------
    if (w.flags.adv_domain) {
        Graph gd(disc.store, with_grad);
        auto real = domain_forward(gd, disc, st, xc, yc);
        auto fake = domain_forward(gd, disc, st, xc, y_hat_c);
        std::vector<Var> terms = {lsgan_scale_avg_g(real, 1.0), lsgan_scale_avg_g(fake, 0.0)};
        rec.domain_disc_terms["dd_real"] = terms[0]->val[0];
        rec.domain_disc_terms["dd_fake"] = terms[1]->val[0];
        if (w.flags.unassociated) {
            if (y_unassoc.numel() == 0)
                throw std::invalid_argument("total_losses: unassociated term enabled but no y'");
            auto unassoc = domain_forward(gd, disc, st, xc, constant(y_unassoc));
            terms.push_back(lsgan_scale_avg_g(unassoc, 0.0));
            rec.domain_disc_terms["dd_unassoc"] = terms.back()->val[0];
        }
        out.domain_disc_loss = scalar_comb(terms, std::vector<Scalar>(terms.size(), 1.0));
        out.domain_disc_binds = gd.bindings();
    } else {
        out.domain_disc_loss = constant(Tensor({1}, {0.0}));
    }
    rec.domain_disc_total = out.domain_disc_loss->val[0];

    // --- D_r objective -----------------------------------------------------
    if (w.flags.adv_realfake) {
        Graph gr(disc.store, with_grad);
        Var t_real = lsgan_g(realfake_forward(gr, disc, st, yc), 1.0);
        Var t_fake = lsgan_g(realfake_forward(gr, disc, st, y_hat_c), 0.0);
        rec.realfake_disc_terms["dr_real"] = t_real->val[0];
        rec.realfake_disc_terms["dr_fake"] = t_fake->val[0];
        out.realfake_disc_loss = scalar_comb({t_real, t_fake}, {1.0, 1.0});
        out.realfake_disc_binds = gr.bindings();
    } else {
        out.realfake_disc_loss = constant(Tensor({1}, {0.0}));
    }
    rec.realfake_disc_total = out.realfake_disc_loss->val[0];

    // --- generator objective (discriminators frozen) -----------------------
    {
        Graph gg(gen.store, with_grad);
        Graph gd_frozen(disc.store, false);
        Var y_hat = generator_forward(gg, gen, st, xc);
        std::vector<Var> terms;
        std::vector<Scalar> weights;
        auto add = [&](const std::string& name, const Var& t, Scalar wt) {
            terms.push_back(t);
            weights.push_back(wt);
            rec.generator_terms[name] = wt * t->val[0];
        };
        std::vector<PatchScoreMapsG> dd_fake, dd_real;
        if (w.flags.adv_domain || w.flags.fm_domain)
            dd_fake = domain_forward(gd_frozen, disc, st, xc, y_hat);
        if (w.flags.adv_domain)
            add("adv_domain", lsgan_scale_avg_g(dd_fake, 1.0), 1.0);
        PatchScoreMapsG dr_fake;
        if (w.flags.adv_realfake || w.flags.fm_realfake || w.flags.input_consistency)
            dr_fake = realfake_forward(gd_frozen, disc, st, y_hat);
        if (w.flags.adv_realfake)
            add("adv_realfake", lsgan_g(dr_fake, 1.0), 1.0);
        if (w.flags.fm_domain) {
            dd_real = domain_forward(gd_frozen, disc, st, xc, yc);
            add("fm_domain", fm_scale_avg_g(dd_real, dd_fake, w), 1.0);
        }
        if (w.flags.fm_realfake) {
            auto dr_real = realfake_forward(gd_frozen, disc, st, yc);
            add("fm_realfake", fm_g(dr_real.features, dr_fake.features, w), 1.0);
        }
        if (w.flags.input_consistency) {
            auto dr_input = realfake_forward(gd_frozen, disc, st, xc);
            add("input_consistency", fm_g(dr_input.features, dr_fake.features, w), 1.0);
        }
        if (w.flags.l1)
            add("l1", mean_abs_diff(constant(y), y_hat), w.lambda_l1);
        if (terms.empty()) {
            out.generator_loss = constant(Tensor({1}, {0.0}));
        } else {
            out.generator_loss = scalar_comb(terms, weights);
        }
        out.generator_binds = gg.bindings();
    }
    rec.generator_total = out.generator_loss->val[0];
    return out;
}

}  // namespace cosgan
