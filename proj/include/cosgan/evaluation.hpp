#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/tensor.hpp"

namespace cosgan {

// ---------------------------------------------------------------------------
// Feature extractors
//
// Metrics are computed over feature embeddings supplied by a pluggable
// extractor so that an external pretrained network can be dropped in.  The
// built-in extractors are deliberately simple, deterministic stand-ins.

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    // Flat embedding of a single CHW image, fixed dimension per extractor.
    virtual std::vector<Scalar> embed(const Tensor& chw) const = 0;
};

// Per-channel mean/std plus coarse 2x2 spatial pooled means: 3*2 + 3*4 = 18 dims.
class MeanRgbExtractor : public FeatureExtractor {
public:
    std::string name() const override { return "mean_rgb"; }

    std::vector<Scalar> embed(const Tensor& chw) const override {
        if (chw.rank() != 3) throw std::invalid_argument("MeanRgbExtractor: expected CHW image");
        const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
        std::vector<Scalar> out;
        out.reserve(static_cast<std::size_t>(C) * 6);
        for (int c = 0; c < C; ++c) {
            const Scalar* p = chw.data() + static_cast<std::size_t>(c) * H * W;
            const std::size_t n = static_cast<std::size_t>(H) * W;
            Scalar mean = 0;
            for (std::size_t i = 0; i < n; ++i) mean += p[i];
            mean /= static_cast<Scalar>(n);
            Scalar var = 0;
            for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
            var /= static_cast<Scalar>(n);
            out.push_back(mean);
            out.push_back(std::sqrt(var));
        }
        // 2x2 quadrant means per channel
        for (int c = 0; c < C; ++c) {
            const Scalar* p = chw.data() + static_cast<std::size_t>(c) * H * W;
            for (int qy = 0; qy < 2; ++qy)
                for (int qx = 0; qx < 2; ++qx) {
                    const int y0 = qy * H / 2, y1 = (qy + 1) * H / 2;
                    const int x0 = qx * W / 2, x1 = (qx + 1) * W / 2;
                    Scalar s = 0;
                    std::size_t cnt = 0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x, ++cnt) s += p[static_cast<std::size_t>(y) * W + x];
                    out.push_back(cnt ? s / static_cast<Scalar>(cnt) : 0.0);
                }
        }
        return out;
    }
};

// Raw pixels as the embedding; only sensible for tiny fixture images.
class IdentityExtractor : public FeatureExtractor {
public:
    std::string name() const override { return "identity"; }
    std::vector<Scalar> embed(const Tensor& chw) const override {
        return std::vector<Scalar>(chw.data(), chw.data() + chw.numel());
    }
};

// ---------------------------------------------------------------------------
// Frechet distance between Gaussian fits of two embedding sets

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::size_t count = 0;
};

inline GaussianStats gaussian_stats(const std::vector<std::vector<Scalar>>& feats) {
    if (feats.size() < 2)
        throw std::invalid_argument("gaussian_stats: need at least 2 samples");
    const Eigen::Index d = static_cast<Eigen::Index>(feats.front().size());
    for (const auto& f : feats)
        if (static_cast<Eigen::Index>(f.size()) != d)
            throw std::invalid_argument("gaussian_stats: inconsistent feature dimension");

    GaussianStats st;
    st.count = feats.size();
    st.mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : feats)
        st.mean += Eigen::Map<const Eigen::VectorXd>(f.data(), d);
    st.mean /= static_cast<double>(feats.size());

    st.cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : feats) {
        Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(f.data(), d) - st.mean;
        st.cov.noalias() += c * c.transpose();
    }
    st.cov /= static_cast<double>(feats.size() - 1);  // unbiased
    return st;
}

namespace eval_detail {

// Principal square root of a symmetric positive semi-definite matrix.
// Small negative eigenvalues from round-off are clipped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace eval_detail

// d^2 = ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size())
        throw std::invalid_argument("frechet_distance: dimension mismatch");
    const Eigen::MatrixXd sa_half = eval_detail::psd_sqrt(a.cov);
    const Eigen::MatrixXd inner = eval_detail::psd_sqrt(sa_half * b.cov * sa_half);
    const double mean_term = (a.mean - b.mean).squaredNorm();
    const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * inner.trace();
    // exact value is non-negative; round-off may dip slightly below zero
    return std::max(0.0, mean_term + trace_term);
}

inline double fid(const std::vector<std::vector<Scalar>>& real,
                  const std::vector<std::vector<Scalar>>& fake) {
    return frechet_distance(gaussian_stats(real), gaussian_stats(fake));
}

inline double fid_images(const std::vector<Tensor>& real, const std::vector<Tensor>& fake,
                         const FeatureExtractor& ex) {
    std::vector<std::vector<Scalar>> fr, ff;
    fr.reserve(real.size());
    ff.reserve(fake.size());
    for (const auto& t : real) fr.push_back(ex.embed(t));
    for (const auto& t : fake) ff.push_back(ex.embed(t));
    return fid(fr, ff);
}

// ---------------------------------------------------------------------------
// LPIPS-style perceptual distance
//
// Feature stacks come from a pluggable backbone; each layer is a CHW map.  Per
// spatial location the channel vector is unit-normalized, the squared
// difference is weighted per channel, averaged over space and summed across
// layers.  Unit channel weights are the default when no calibrated weights
// are supplied.

class LayerFeatureExtractor {
public:
    virtual ~LayerFeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual std::vector<Tensor> layers(const Tensor& chw) const = 0;
};

// The image itself as a single 3-channel "layer", plus a 2x mean-pooled copy.
class PyramidLayerExtractor : public LayerFeatureExtractor {
public:
    explicit PyramidLayerExtractor(int levels = 2) : levels_(levels) {}
    std::string name() const override { return "pyramid"; }

    std::vector<Tensor> layers(const Tensor& chw) const override {
        if (chw.rank() != 3) throw std::invalid_argument("PyramidLayerExtractor: expected CHW");
        std::vector<Tensor> out;
        Tensor cur = chw;
        out.push_back(cur);
        for (int l = 1; l < levels_; ++l) {
            const int C = cur.dim(0), H = cur.dim(1), W = cur.dim(2);
            if (H < 2 || W < 2) break;
            Tensor next({C, H / 2, W / 2});
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H / 2; ++y)
                    for (int x = 0; x < W / 2; ++x) {
                        const Scalar* p = cur.data() + (static_cast<std::size_t>(c) * H + 2 * y) * W + 2 * x;
                        next[(static_cast<std::size_t>(c) * (H / 2) + y) * (W / 2) + x] =
                            0.25 * (p[0] + p[1] + p[W] + p[W + 1]);
                    }
            out.push_back(std::move(next));
            cur = out.back();
        }
        return out;
    }

private:
    int levels_;
};

namespace eval_detail {

inline void unit_normalize_channels(Tensor& layer, Scalar eps = 1e-10) {
    const int C = layer.dim(0), H = layer.dim(1), W = layer.dim(2);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Scalar norm2 = 0;
            for (int c = 0; c < C; ++c) {
                const Scalar v = layer[(static_cast<std::size_t>(c) * H + y) * W + x];
                norm2 += v * v;
            }
            const Scalar inv = 1.0 / std::sqrt(norm2 + eps);
            for (int c = 0; c < C; ++c)
                layer[(static_cast<std::size_t>(c) * H + y) * W + x] *= inv;
        }
}

}  // namespace eval_detail

// Optional per-layer channel weights; empty means unit weights everywhere.
inline double lpips(const Tensor& a, const Tensor& b, const LayerFeatureExtractor& ex,
                    const std::vector<std::vector<Scalar>>& channel_weights = {}) {
    if (!a.same_shape(b)) throw std::invalid_argument("lpips: image shape mismatch");
    std::vector<Tensor> la = ex.layers(a), lb = ex.layers(b);
    if (la.size() != lb.size()) throw std::logic_error("lpips: extractor layer count mismatch");
    if (!channel_weights.empty() && channel_weights.size() != la.size())
        throw std::invalid_argument("lpips: weight/layer count mismatch");

    double total = 0;
    for (std::size_t l = 0; l < la.size(); ++l) {
        Tensor fa = la[l], fb = lb[l];
        if (!fa.same_shape(fb)) throw std::logic_error("lpips: layer shape mismatch");
        eval_detail::unit_normalize_channels(fa);
        eval_detail::unit_normalize_channels(fb);
        const int C = fa.dim(0), H = fa.dim(1), W = fa.dim(2);
        const std::vector<Scalar>* wl = channel_weights.empty() ? nullptr : &channel_weights[l];
        if (wl && static_cast<int>(wl->size()) != C)
            throw std::invalid_argument("lpips: channel weight size mismatch");
        double layer_sum = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double loc = 0;
                for (int c = 0; c < C; ++c) {
                    const std::size_t i = (static_cast<std::size_t>(c) * H + y) * W + x;
                    const double d = fa[i] - fb[i];
                    loc += (wl ? (*wl)[c] : 1.0) * d * d;
                }
                layer_sum += loc;
            }
        total += layer_sum / (static_cast<double>(H) * W);
    }
    return total;
}

// Mean pairwise LPIPS over matched image lists.
inline double mean_lpips(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                         const LayerFeatureExtractor& ex) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("mean_lpips: need equal non-empty lists");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += lpips(a[i], b[i], ex);
    return s / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Evaluation report

struct EvalReport {
    double fid = 0;
    double lpips_mean = 0;
    std::size_t n_real = 0, n_fake = 0;
    std::string fid_extractor, lpips_extractor;
};

inline EvalReport evaluate_sets(const std::vector<Tensor>& real,
                                const std::vector<Tensor>& fake,
                                const FeatureExtractor& fid_ex,
                                const LayerFeatureExtractor& lpips_ex) {
    EvalReport r;
    r.n_real = real.size();
    r.n_fake = fake.size();
    r.fid = fid_images(real, fake, fid_ex);
    r.lpips_mean = mean_lpips(real, fake, lpips_ex);
    r.fid_extractor = fid_ex.name();
    r.lpips_extractor = lpips_ex.name();
    return r;
}

}  // namespace cosgan
