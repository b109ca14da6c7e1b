#pragma once

#include <cmath>
#include <string>

#include "cosgan/layers.hpp"

namespace cosgan {

// Adam over a ParamStore; moments live on the parameters themselves so they
// travel with checkpoints. A name predicate scopes the update to one network.
class Adam {
public:
    Adam(Scalar beta1 = 0.5, Scalar beta2 = 0.99, Scalar eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    template <typename Pred>
    void step(ParamStore& store, Scalar lr, Pred include) {
        ++t_;
        const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
        const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
        for (auto& [name, p] : store.all()) {
            if (!p.trainable || !include(name)) continue;
            if (p.grad.numel() != p.value.numel()) continue;  // untouched this step
            if (p.adam_m.numel() != p.value.numel()) {
                p.adam_m = Tensor(p.value.shape());
                p.adam_v = Tensor(p.value.shape());
            }
            for (std::size_t i = 0; i < p.value.numel(); ++i) {
                const Scalar g = p.grad[i];
                p.adam_m[i] = beta1_ * p.adam_m[i] + (1.0 - beta1_) * g;
                p.adam_v[i] = beta2_ * p.adam_v[i] + (1.0 - beta2_) * g * g;
                const Scalar mhat = p.adam_m[i] / bc1;
                const Scalar vhat = p.adam_v[i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }
    Scalar beta1() const { return beta1_; }
    Scalar beta2() const { return beta2_; }

private:
    Scalar beta1_;
    Scalar beta2_;
    Scalar eps_;
    long t_ = 0;
};

inline void zero_grads(ParamStore& store) {
    for (auto& [name, p] : store.all()) p.grad = Tensor();
}

}  // namespace cosgan
