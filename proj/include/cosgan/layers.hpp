#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/autodiff.hpp"
#include "cosgan/rng.hpp"
#include "cosgan/tensor.hpp"

namespace cosgan {

struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    bool trainable = true;
};

// Named parameter registry. Iteration order is the lexicographic name order,
// which keeps init, checkpointing and optimizer sweeps deterministic.
class ParamStore {
public:
    bool has(const std::string& name) const { return params_.count(name) > 0; }

    Parameter& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end())
            throw std::invalid_argument("ParamStore: unknown parameter " + name);
        return it->second;
    }
    const Parameter& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end())
            throw std::invalid_argument("ParamStore: unknown parameter " + name);
        return it->second;
    }

    Parameter& create(const std::string& name, Tensor value, bool trainable = true) {
        if (has(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
        Parameter p;
        p.value = std::move(value);
        p.trainable = trainable;
        return params_.emplace(name, std::move(p)).first->second;
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& [k, p] : params_) n += p.value.numel();
        return n;
    }

    std::map<std::string, Parameter>& all() { return params_; }
    const std::map<std::string, Parameter>& all() const { return params_; }

    bool all_finite() const {
        for (const auto& [k, p] : params_)
            if (!p.value.all_finite()) return false;
        return true;
    }

private:
    std::map<std::string, Parameter> params_;
};

inline Tensor gaussian_tensor(std::vector<int> shape, RngEngine& rng, Scalar stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stddev * gaussian(rng);
    return t;
}

// One forward pass's view onto a ParamStore. Each parameter maps to exactly
// one leaf node so reuse across sub-graphs accumulates gradients correctly.
class Graph {
public:
    explicit Graph(ParamStore& store, bool with_grad = true)
        : store_(&store), with_grad_(with_grad) {}

    Var use(const std::string& name) {
        Parameter& p = store_->at(name);
        auto it = leaves_.find(&p);
        if (it != leaves_.end()) return it->second;
        Var v = with_grad_ && p.trainable ? leaf(p.value) : constant(p.value);
        leaves_.emplace(&p, v);
        names_.emplace_back(&p, v);
        return v;
    }

    // Copy accumulated leaf gradients back into the store.
    void harvest_grads() {
        for (auto& [p, v] : names_) {
            if (!v->requires_grad || v->grad.numel() == 0) continue;
            if (p->grad.numel() != p->value.numel()) p->grad = Tensor(p->value.shape());
            for (std::size_t i = 0; i < v->grad.numel(); ++i) p->grad[i] += v->grad[i];
        }
    }

    ParamStore& store() { return *store_; }

    using Bindings = std::vector<std::pair<Parameter*, Var>>;
    const Bindings& bindings() const { return names_; }

private:
    ParamStore* store_;
    bool with_grad_;
    std::map<const Parameter*, Var> leaves_;
    std::vector<std::pair<Parameter*, Var>> names_;
};

// ---------------------------------------------------------------------------
// Convolution blocks

struct ConvSpec {
    int in_ch = 0;
    int out_ch = 0;
    int k = 3;
    int stride = 1;
    int pad = 1;
    bool spectral = false;
};

inline void ensure_conv(ParamStore& store, const std::string& name, const ConvSpec& spec,
                        RngEngine& rng, Scalar init_std = 0.02) {
    if (store.has(name + ".w")) return;
    store.create(name + ".w", gaussian_tensor({spec.out_ch, spec.in_ch, spec.k, spec.k}, rng, init_std));
    store.create(name + ".b", Tensor({spec.out_ch}));
    if (spec.spectral) {
        const int rows = spec.out_ch;
        const int cols = spec.in_ch * spec.k * spec.k;
        Parameter& u = store.create(name + ".u", gaussian_tensor({rows}, rng, 1.0), false);
        Parameter& v = store.create(name + ".v", gaussian_tensor({cols}, rng, 1.0), false);
        power_iteration(store.at(name + ".w").value, u.value, v.value, 1);
    }
}

// Applies a stored convolution; spectral normalization uses the stored u/v
// vectors statically (power iteration is a separate per-step mutation).
inline Var apply_conv(Graph& g, const std::string& name, const Var& x, const ConvSpec& spec) {
    Var w = g.use(name + ".w");
    if (spec.spectral)
        w = spectral_normalize(w, g.store().at(name + ".u").value, g.store().at(name + ".v").value);
    return conv2d(x, w, g.use(name + ".b"), spec.stride, spec.pad);
}

// Runs one power-iteration step on every spectrally normalized weight.
inline void update_spectral_state(ParamStore& store, int iters = 1) {
    for (auto& [name, p] : store.all()) {
        if (name.size() < 2 || name.compare(name.size() - 2, 2, ".u") != 0) continue;
        const std::string base = name.substr(0, name.size() - 2);
        power_iteration(store.at(base + ".w").value, p.value, store.at(base + ".v").value, iters);
    }
}

// Spec-level helper: normalize a 2-D-shaped weight by its estimated top
// singular value; u/v updated in place.
struct SpectralNormState {
    Tensor u;
    Tensor v;
    int iters_per_step = 1;
};

inline Tensor apply_spectral_norm(const Tensor& weight, SpectralNormState& state) {
    if (weight.rank() < 2) throw std::invalid_argument("apply_spectral_norm: need >= 2-D weight");
    const int rows = weight.dim(0);
    const int cols = static_cast<int>(weight.numel()) / rows;
    if (state.u.numel() != static_cast<std::size_t>(rows) ||
        state.v.numel() != static_cast<std::size_t>(cols)) {
        RngEngine rng = make_rng(0x5eed, "spectral_norm_state");
        state.u = gaussian_tensor({rows}, rng, 1.0);
        state.v = gaussian_tensor({cols}, rng, 1.0);
    }
    power_iteration(weight, state.u, state.v, state.iters_per_step);
    Scalar sigma = sigma_estimate(weight, state.u, state.v);
    if (sigma < 1e-12) sigma = 1e-12;
    Tensor out(weight.shape());
    for (std::size_t i = 0; i < weight.numel(); ++i) out[i] = weight[i] / sigma;
    return out;
}

}  // namespace cosgan
