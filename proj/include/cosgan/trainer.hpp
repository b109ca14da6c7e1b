#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cosgan/augment.hpp"
#include "cosgan/checkpoint.hpp"
#include "cosgan/config.hpp"
#include "cosgan/losses.hpp"
#include "cosgan/optimizer.hpp"
#include "cosgan/schedule.hpp"

namespace cosgan {

struct StepResult {
    bool ok = false;
    std::string error;
    LossRecord record;
};

// Alternating optimization: one D_d update, one D_r update, one G update per
// step, each against the other networks' frozen parameters.
class Trainer {
public:
    explicit Trainer(const RunConfig& cfg)
        : cfg_(cfg),
          gen_(init_generator(cfg.train.seed, cfg.generator)),
          disc_(init_discriminators(cfg.train.seed, cfg.discriminator, cfg.generator.max_res)),
          opt_g_(cfg.train.beta1, cfg.train.beta2),
          opt_dd_(cfg.train.beta1, cfg.train.beta2),
          opt_dr_(cfg.train.beta1, cfg.train.beta2),
          rng_(cfg.train.seed) {
        state_ = initial_state(cfg.generator);
        if (!cfg_.progressive) {
            while (state_.stage < cfg_.generator.max_stage())
                state_ = grow(gen_, state_, cfg_.train.seed);
            state_.fade_alpha = 1.0;
        }
    }

    const RunConfig& config() const { return cfg_; }
    GeneratorParams& generator() { return gen_; }
    DiscriminatorParams& discriminators() { return disc_; }
    const ProgressiveState& state() const { return state_; }
    int epoch() const { return epoch_; }
    long global_step() const { return global_step_; }
    RngBank& rng() { return rng_; }

    // Moves the clock to an epoch, growing the generator when the schedule
    // crosses a stage boundary.
    void set_epoch(int epoch) {
        epoch_ = epoch;
        if (!cfg_.progressive) return;
        ProgressiveState target = progressive_schedule(epoch, cfg_.train, cfg_.generator);
        while (state_.stage < target.stage) {
            state_.fade_alpha = 1.0;  // schedule guarantees full fade at the boundary
            state_ = grow(gen_, state_, cfg_.train.seed);
        }
        state_ = target;
    }

    Scalar current_lr() const { return lr_at(epoch_ + 1, cfg_.train); }

    StepResult train_step(const PairBatch& batch) {
        StepResult res;
        if (batch.empty()) {
            res.error = "empty batch";
            return res;
        }
        try {
            LossWeights w = cfg_.losses;
            Tensor y_un;
            if (w.flags.unassociated && batch.size() >= 2) {
                PairBatch un = sample_unassociated(batch, rng_.stream("unassociated"));
                y_un = stack_y(un);
            } else {
                w.flags.unassociated = false;
            }
            const Tensor x = stack_x(batch);
            const Tensor y = stack_y(batch);
            if (x.dim(2) != state_.resolution)
                throw std::invalid_argument("train_step: batch resolution " +
                                            std::to_string(x.dim(2)) +
                                            " does not match stage resolution " +
                                            std::to_string(state_.resolution));

            if (cfg_.discriminator.spectral) update_spectral_state(disc_.store, 1);

            LossBundle bundle = total_losses(gen_, disc_, state_, x, y, y_un, w);
            if (!std::isfinite(bundle.record.generator_total) ||
                !std::isfinite(bundle.record.domain_disc_total) ||
                !std::isfinite(bundle.record.realfake_disc_total)) {
                res.error = "non-finite loss; step aborted";
                res.record = bundle.record;
                return res;
            }
            const Scalar lr = current_lr();

            if (w.flags.adv_domain) {
                zero_grads(disc_.store);
                backward(bundle.domain_disc_loss);
                harvest_gradients(bundle.domain_disc_binds);
                opt_dd_.step(disc_.store, lr,
                             [](const std::string& n) { return n.rfind("Dd", 0) == 0; });
            }
            if (w.flags.adv_realfake) {
                zero_grads(disc_.store);
                backward(bundle.realfake_disc_loss);
                harvest_gradients(bundle.realfake_disc_binds);
                opt_dr_.step(disc_.store, lr,
                             [](const std::string& n) { return n.rfind("Dr", 0) == 0; });
            }
            zero_grads(gen_.store);
            backward(bundle.generator_loss);
            harvest_gradients(bundle.generator_binds);
            opt_g_.step(gen_.store, lr,
                        [](const std::string& n) { return n.rfind("G.", 0) == 0; });

            ++global_step_;
            res.ok = true;
            res.record = bundle.record;
            return res;
        } catch (const std::exception& e) {
            res.error = e.what();
            return res;
        }
    }

    Checkpoint make_checkpoint() const {
        Checkpoint ck;
        ck.config = cfg_;
        ck.generator = gen_.store;
        ck.generator_built_stage = gen_.built_stage;
        ck.discriminator = disc_.store;
        ck.state = state_;
        ck.adam_steps_g = opt_g_.step_count();
        ck.adam_steps_dd = opt_dd_.step_count();
        ck.adam_steps_dr = opt_dr_.step_count();
        ck.global_step = global_step_;
        ck.epoch = epoch_;
        ck.rng_blob = rng_.serialize();
        return ck;
    }

    static Trainer from_checkpoint(const Checkpoint& ck) {
        Trainer t(ck.config);
        t.gen_.store = ck.generator;
        t.gen_.built_stage = ck.generator_built_stage;
        t.disc_.store = ck.discriminator;
        t.state_ = ck.state;
        t.opt_g_.set_step_count(ck.adam_steps_g);
        t.opt_dd_.set_step_count(ck.adam_steps_dd);
        t.opt_dr_.set_step_count(ck.adam_steps_dr);
        t.global_step_ = ck.global_step;
        t.epoch_ = ck.epoch;
        t.rng_ = RngBank::deserialize(ck.rng_blob);
        return t;
    }

private:
    RunConfig cfg_;
    GeneratorParams gen_;
    DiscriminatorParams disc_;
    ProgressiveState state_;
    Adam opt_g_, opt_dd_, opt_dr_;
    RngBank rng_;
    long global_step_ = 0;
    int epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Deterministic batch assembly

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RngEngine rng = make_rng(seed, "data_order/" + std::to_string(epoch));
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    return idx;
}

inline PairBatch assemble_batch(const std::vector<ImagePair>& data,
                                const std::vector<std::size_t>& indices,
                                const AugmentConfig& acfg, std::uint64_t seed, int epoch,
                                int resolution, bool do_augment = true) {
    PairBatch batch;
    for (std::size_t idx : indices) {
        const ImagePair& raw = data.at(idx);
        ImagePair pair = raw;
        if (do_augment) {
            RngEngine rng = augment_rng(seed, epoch, idx);
            pair = augment(raw, acfg, rng);
        }
        PairSample s;
        s.x = mat_to_tensor(resize_to(pair.anime, resolution));
        s.y = mat_to_tensor(resize_to(pair.clothing, resolution));
        batch.push_back(std::move(s));
    }
    return batch;
}

}  // namespace cosgan
