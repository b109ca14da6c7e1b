#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cosgan/tensor.hpp"

namespace cosgan {

using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;

// Reverse-mode tape node. Graphs are built eagerly; backward() walks the
// topological order once.
struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // scatter this->grad into parents

    Tensor& ensure_grad() {
        if (grad.numel() != val.numel()) grad = Tensor(val.shape());
        return grad;
    }
};

using Var = std::shared_ptr<Node>;

inline Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = false;
    return n;
}

inline Var leaf(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    return n;
}

inline void accumulate(Var& p, const Tensor& g) {
    if (!p->requires_grad) return;
    Tensor& pg = p->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) pg[i] += g[i];
}

inline void backward(const Var& root) {
    if (root->val.numel() != 1)
        throw std::invalid_argument("backward: root must be a scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& top = stack.back();
        Node* n = top.first;
        if (seen.count(n)) {
            stack.pop_back();
            continue;
        }
        if (top.second < n->parents.size()) {
            Node* c = n->parents[top.second++].get();
            if (!seen.count(c)) stack.push_back({c, 0});
        } else {
            seen.insert(n);
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order)
        if (n != root.get()) n->grad = Tensor();  // reset stale grads in this graph
    root->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.numel()) n->backprop(*n);
    }
}

inline Var detach(const Var& x) {
    return constant(x->val);
}

// ---------------------------------------------------------------------------
// Elementwise ops

inline Var leaky_relu(const Var& x, Scalar slope = 0.2) {
    auto n = std::make_shared<Node>();
    n->val = Tensor(x->val.shape());
    for (std::size_t i = 0; i < x->val.numel(); ++i) {
        Scalar v = x->val[i];
        n->val[i] = v > 0 ? v : slope * v;
    }
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [slope](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        for (std::size_t i = 0; i < pg.numel(); ++i)
            pg[i] += self.grad[i] * (p->val[i] > 0 ? 1.0 : slope);
    };
    return n;
}

inline Var tanh_act(const Var& x) {
    auto n = std::make_shared<Node>();
    n->val = Tensor(x->val.shape());
    for (std::size_t i = 0; i < x->val.numel(); ++i) n->val[i] = std::tanh(x->val[i]);
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        for (std::size_t i = 0; i < pg.numel(); ++i)
            pg[i] += self.grad[i] * (1.0 - self.val[i] * self.val[i]);
    };
    return n;
}

// ca*a + cb*b, same shapes
inline Var lincomb(const Var& a, Scalar ca, const Var& b, Scalar cb) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument("lincomb: shape mismatch");
    auto n = std::make_shared<Node>();
    n->val = Tensor(a->val.shape());
    for (std::size_t i = 0; i < n->val.numel(); ++i)
        n->val[i] = ca * a->val[i] + cb * b->val[i];
    n->requires_grad = a->requires_grad || b->requires_grad;
    n->parents = {a, b};
    n->backprop = [ca, cb](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Var& p = self.parents[k];
            if (!p->requires_grad) continue;
            Scalar c = k == 0 ? ca : cb;
            Tensor& pg = p->ensure_grad();
            for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += c * self.grad[i];
        }
    };
    return n;
}

// ---------------------------------------------------------------------------
// Spatial ops (NCHW)

inline Var upsample_nearest2(const Var& x) {
    const auto& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("upsample_nearest2: NCHW required");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    auto n = std::make_shared<Node>();
    n->val = Tensor({N, C, 2 * H, 2 * W});
    const Scalar* in = x->val.data();
    Scalar* out = n->val.data();
    for (int nc = 0; nc < N * C; ++nc)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                Scalar v = in[(static_cast<std::size_t>(nc) * H + y) * W + xx];
                std::size_t base = (static_cast<std::size_t>(nc) * 2 * H + 2 * y) * 2 * W + 2 * xx;
                out[base] = v;
                out[base + 1] = v;
                out[base + 2 * W] = v;
                out[base + 2 * W + 1] = v;
            }
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [N, C, H, W](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        const Scalar* g = self.grad.data();
        for (int nc = 0; nc < N * C; ++nc)
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) {
                    std::size_t base = (static_cast<std::size_t>(nc) * 2 * H + 2 * y) * 2 * W + 2 * xx;
                    pg[(static_cast<std::size_t>(nc) * H + y) * W + xx] +=
                        g[base] + g[base + 1] + g[base + 2 * W] + g[base + 2 * W + 1];
                }
    };
    return n;
}

inline Var avgpool2(const Var& x) {
    const auto& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("avgpool2: NCHW required");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    if (H % 2 || W % 2) throw std::invalid_argument("avgpool2: odd spatial size");
    auto n = std::make_shared<Node>();
    n->val = Tensor({N, C, H / 2, W / 2});
    const Scalar* in = x->val.data();
    Scalar* out = n->val.data();
    for (int nc = 0; nc < N * C; ++nc)
        for (int y = 0; y < H / 2; ++y)
            for (int xx = 0; xx < W / 2; ++xx) {
                std::size_t base = (static_cast<std::size_t>(nc) * H + 2 * y) * W + 2 * xx;
                out[(static_cast<std::size_t>(nc) * (H / 2) + y) * (W / 2) + xx] =
                    0.25 * (in[base] + in[base + 1] + in[base + W] + in[base + W + 1]);
            }
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [N, C, H, W](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        const Scalar* g = self.grad.data();
        for (int nc = 0; nc < N * C; ++nc)
            for (int y = 0; y < H / 2; ++y)
                for (int xx = 0; xx < W / 2; ++xx) {
                    Scalar gv = 0.25 * g[(static_cast<std::size_t>(nc) * (H / 2) + y) * (W / 2) + xx];
                    std::size_t base = (static_cast<std::size_t>(nc) * H + 2 * y) * W + 2 * xx;
                    pg[base] += gv;
                    pg[base + 1] += gv;
                    pg[base + W] += gv;
                    pg[base + W + 1] += gv;
                }
    };
    return n;
}

inline Var concat_channels(const Var& a, const Var& b) {
    const auto& sa = a->val.shape();
    const auto& sb = b->val.shape();
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
        throw std::invalid_argument("concat_channels: incompatible shapes");
    const int N = sa[0], Ca = sa[1], Cb = sb[1], H = sa[2], W = sa[3];
    auto n = std::make_shared<Node>();
    n->val = Tensor({N, Ca + Cb, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int b0 = 0; b0 < N; ++b0) {
        std::copy_n(a->val.data() + b0 * Ca * plane, Ca * plane,
                    n->val.data() + static_cast<std::size_t>(b0) * (Ca + Cb) * plane);
        std::copy_n(b->val.data() + b0 * Cb * plane, Cb * plane,
                    n->val.data() + static_cast<std::size_t>(b0) * (Ca + Cb) * plane + Ca * plane);
    }
    n->requires_grad = a->requires_grad || b->requires_grad;
    n->parents = {a, b};
    n->backprop = [N, Ca, Cb, plane](Node& self) {
        Var& pa = self.parents[0];
        Var& pb = self.parents[1];
        for (int b0 = 0; b0 < N; ++b0) {
            const Scalar* g = self.grad.data() + static_cast<std::size_t>(b0) * (Ca + Cb) * plane;
            if (pa->requires_grad) {
                Tensor& ga = pa->ensure_grad();
                for (std::size_t i = 0; i < Ca * plane; ++i) ga[b0 * Ca * plane + i] += g[i];
            }
            if (pb->requires_grad) {
                Tensor& gb = pb->ensure_grad();
                for (std::size_t i = 0; i < Cb * plane; ++i) gb[b0 * Cb * plane + i] += g[Ca * plane + i];
            }
        }
    };
    return n;
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)

namespace detail {

inline void im2col(const Scalar* img, int C, int H, int W, int kh, int kw, int stride,
                   int pad, int Ho, int Wo, Scalar* col) {
    // col is (C*kh*kw) x (Ho*Wo), row-major
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                Scalar* row = col + (static_cast<std::size_t>((c * kh + ky) * kw + kx)) * Ho * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) {
                        std::fill_n(row + static_cast<std::size_t>(oy) * Wo, Wo, 0.0);
                        continue;
                    }
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[static_cast<std::size_t>(oy) * Wo + ox] =
                            (ix >= 0 && ix < W) ? img[(static_cast<std::size_t>(c) * H + iy) * W + ix] : 0.0;
                    }
                }
            }
}

inline void col2im_add(const Scalar* col, int C, int H, int W, int kh, int kw, int stride,
                       int pad, int Ho, int Wo, Scalar* img) {
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const Scalar* row = col + (static_cast<std::size_t>((c * kh + ky) * kw + kx)) * Ho * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W)
                            img[(static_cast<std::size_t>(c) * H + iy) * W + ix] +=
                                row[static_cast<std::size_t>(oy) * Wo + ox];
                    }
                }
            }
}

}  // namespace detail

inline int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// x: NxCinxHxW, w: CoutxCinxkhxkw, b: Cout
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const auto& xs = x->val.shape();
    const auto& ws = w->val.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: rank mismatch");
    const int N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const int Cout = ws[0], kh = ws[2], kw = ws[3];
    if (ws[1] != Cin)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(Cin) +
                                    " do not match weight " + std::to_string(ws[1]));
    if (b->val.numel() != static_cast<std::size_t>(Cout))
        throw std::invalid_argument("conv2d: bias size mismatch");
    const int Ho = conv_out_size(H, kh, stride, pad);
    const int Wo = conv_out_size(W, kw, stride, pad);
    if (Ho < 1 || Wo < 1)
        throw std::invalid_argument("conv2d: output collapsed to zero size");
    const int K = Cin * kh * kw;

    auto n = std::make_shared<Node>();
    n->val = Tensor({N, Cout, Ho, Wo});
    Tensor colbuf({N, K, Ho * Wo});
    CMapRM Wm(w->val.data(), Cout, K);
    for (int b0 = 0; b0 < N; ++b0) {
        Scalar* col = colbuf.data() + static_cast<std::size_t>(b0) * K * Ho * Wo;
        detail::im2col(x->val.data() + static_cast<std::size_t>(b0) * Cin * H * W, Cin, H, W,
                       kh, kw, stride, pad, Ho, Wo, col);
        CMapRM colm(col, K, Ho * Wo);
        MapRM out(n->val.data() + static_cast<std::size_t>(b0) * Cout * Ho * Wo, Cout, Ho * Wo);
        out.noalias() = Wm * colm;
        for (int c = 0; c < Cout; ++c) out.row(c).array() += b->val[c];
    }
    n->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;
    n->parents = {x, w, b};
    auto cols = std::make_shared<Tensor>(std::move(colbuf));
    n->backprop = [N, Cin, H, W, Cout, kh, kw, K, Ho, Wo, stride, pad, cols](Node& self) {
        Var& px = self.parents[0];
        Var& pw = self.parents[1];
        Var& pb = self.parents[2];
        CMapRM Wm(pw->val.data(), Cout, K);
        for (int b0 = 0; b0 < N; ++b0) {
            CMapRM gy(self.grad.data() + static_cast<std::size_t>(b0) * Cout * Ho * Wo, Cout, Ho * Wo);
            CMapRM colm(cols->data() + static_cast<std::size_t>(b0) * K * Ho * Wo, K, Ho * Wo);
            if (pw->requires_grad) {
                MapRM gw(pw->ensure_grad().data(), Cout, K);
                gw.noalias() += gy * colm.transpose();
            }
            if (pb->requires_grad) {
                Tensor& gb = pb->ensure_grad();
                for (int c = 0; c < Cout; ++c) gb[c] += gy.row(c).sum();
            }
            if (px->requires_grad) {
                MatrixRM gcol = Wm.transpose() * gy;
                detail::col2im_add(gcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                                   px->ensure_grad().data() + static_cast<std::size_t>(b0) * Cin * H * W);
            }
        }
    };
    return n;
}

// ---------------------------------------------------------------------------
// Spectral normalization (power-iteration state held by the caller)

inline Scalar sigma_estimate(const Tensor& w, const Tensor& u, const Tensor& v) {
    const int rows = w.dim(0);
    const int cols = static_cast<int>(w.numel()) / rows;
    CMapRM Wm(w.data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> um(u.data(), rows);
    Eigen::Map<const Eigen::VectorXd> vm(v.data(), cols);
    return um.dot(Wm * vm);
}

inline void power_iteration(const Tensor& w, Tensor& u, Tensor& v, int iters = 1) {
    const int rows = w.dim(0);
    const int cols = static_cast<int>(w.numel()) / rows;
    CMapRM Wm(w.data(), rows, cols);
    Eigen::Map<Eigen::VectorXd> um(u.data(), rows);
    Eigen::Map<Eigen::VectorXd> vm(v.data(), cols);
    for (int i = 0; i < iters; ++i) {
        vm = Wm.transpose() * um;
        Scalar nv = vm.norm();
        if (nv > 1e-300) vm /= nv;
        um = Wm * vm;
        Scalar nu = um.norm();
        if (nu > 1e-300) um /= nu;
    }
}

// w / sigma with sigma = u^T w v, u and v treated as constants.
inline Var spectral_normalize(const Var& w, const Tensor& u, const Tensor& v) {
    constexpr Scalar kSigmaFloor = 1e-12;
    Scalar sigma = sigma_estimate(w->val, u, v);
    if (sigma < kSigmaFloor) sigma = kSigmaFloor;
    auto n = std::make_shared<Node>();
    n->val = Tensor(w->val.shape());
    for (std::size_t i = 0; i < w->val.numel(); ++i) n->val[i] = w->val[i] / sigma;
    n->requires_grad = w->requires_grad;
    n->parents = {w};
    Tensor uc = u, vc = v;
    n->backprop = [sigma, uc, vc](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        const int rows = p->val.dim(0);
        const int cols = static_cast<int>(p->val.numel()) / rows;
        Scalar gw_dot_w = 0;
        for (std::size_t i = 0; i < p->val.numel(); ++i) gw_dot_w += self.grad[i] * p->val[i];
        const Scalar c = gw_dot_w / (sigma * sigma);
        Tensor& pg = p->ensure_grad();
        for (int r = 0; r < rows; ++r)
            for (int k = 0; k < cols; ++k)
                pg[static_cast<std::size_t>(r) * cols + k] +=
                    self.grad[static_cast<std::size_t>(r) * cols + k] / sigma - c * uc[r] * vc[k];
    };
    return n;
}

// ---------------------------------------------------------------------------
// Reductions

// mean over all elements of |a - b|
inline Var mean_abs_diff(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument("mean_abs_diff: shape mismatch");
    const std::size_t nelem = a->val.numel();
    if (nelem == 0) throw std::invalid_argument("mean_abs_diff: empty input");
    Scalar acc = 0;
    for (std::size_t i = 0; i < nelem; ++i) acc += std::abs(a->val[i] - b->val[i]);
    auto n = std::make_shared<Node>();
    n->val = Tensor({1}, {acc / static_cast<Scalar>(nelem)});
    n->requires_grad = a->requires_grad || b->requires_grad;
    n->parents = {a, b};
    n->backprop = [nelem](Node& self) {
        Var& pa = self.parents[0];
        Var& pb = self.parents[1];
        const Scalar g = self.grad[0] / static_cast<Scalar>(nelem);
        for (std::size_t i = 0; i < nelem; ++i) {
            Scalar d = pa->val[i] - pb->val[i];
            Scalar s = d > 0 ? g : (d < 0 ? -g : 0.0);
            if (pa->requires_grad) pa->ensure_grad()[i] += s;
            if (pb->requires_grad) pb->ensure_grad()[i] -= s;
        }
    };
    return n;
}

// mean over the pooled elements of several maps of (x - target)^2
inline Var mean_squared_to(const std::vector<Var>& maps, Scalar target) {
    if (maps.empty()) throw std::invalid_argument("mean_squared_to: no maps");
    std::size_t total = 0;
    for (const auto& m : maps) total += m->val.numel();
    if (total == 0) throw std::invalid_argument("mean_squared_to: empty maps");
    Scalar acc = 0;
    bool rg = false;
    for (const auto& m : maps) {
        rg = rg || m->requires_grad;
        for (std::size_t i = 0; i < m->val.numel(); ++i) {
            Scalar d = m->val[i] - target;
            acc += d * d;
        }
    }
    auto n = std::make_shared<Node>();
    n->val = Tensor({1}, {acc / static_cast<Scalar>(total)});
    n->requires_grad = rg;
    n->parents.assign(maps.begin(), maps.end());
    n->backprop = [total, target](Node& self) {
        const Scalar g = 2.0 * self.grad[0] / static_cast<Scalar>(total);
        for (Var& p : self.parents) {
            if (!p->requires_grad) continue;
            Tensor& pg = p->ensure_grad();
            for (std::size_t i = 0; i < pg.numel(); ++i)
                pg[i] += g * (p->val[i] - target);
        }
    };
    return n;
}

// weighted sum of scalar variables
inline Var scalar_comb(const std::vector<Var>& xs, const std::vector<Scalar>& ws) {
    if (xs.size() != ws.size() || xs.empty())
        throw std::invalid_argument("scalar_comb: size mismatch");
    Scalar acc = 0;
    bool rg = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i]->val.numel() != 1) throw std::invalid_argument("scalar_comb: non-scalar term");
        acc += ws[i] * xs[i]->val[0];
        rg = rg || xs[i]->requires_grad;
    }
    auto n = std::make_shared<Node>();
    n->val = Tensor({1}, {acc});
    n->requires_grad = rg;
    n->parents.assign(xs.begin(), xs.end());
    std::vector<Scalar> wcopy = ws;
    n->backprop = [wcopy](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            Var& p = self.parents[i];
            if (p->requires_grad) p->ensure_grad()[0] += wcopy[i] * self.grad[0];
        }
    };
    return n;
}

// spatial mean per image, reduced to the batch mean of |mean|? -- not needed;
// kept minimal: mean of all elements (used by diagnostics)
inline Var mean_all(const Var& x) {
    const std::size_t nelem = x->val.numel();
    auto n = std::make_shared<Node>();
    n->val = Tensor({1}, {x->val.sum() / static_cast<Scalar>(nelem)});
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [nelem](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        const Scalar g = self.grad[0] / static_cast<Scalar>(nelem);
        for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += g;
    };
    return n;
}

// global average pool to 1x1 (keeps channels)
inline Var global_avgpool(const Var& x) {
    const auto& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("global_avgpool: NCHW required");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    auto n = std::make_shared<Node>();
    n->val = Tensor({N, C, 1, 1});
    for (int nc = 0; nc < N * C; ++nc) {
        Scalar acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += x->val[nc * plane + i];
        n->val[nc] = acc / static_cast<Scalar>(plane);
    }
    n->requires_grad = x->requires_grad;
    n->parents = {x};
    n->backprop = [N, C, plane](Node& self) {
        Var& p = self.parents[0];
        if (!p->requires_grad) return;
        Tensor& pg = p->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
            const Scalar g = self.grad[nc] / static_cast<Scalar>(plane);
            for (std::size_t i = 0; i < plane; ++i) pg[nc * plane + i] += g;
        }
    };
    return n;
}

}  // namespace cosgan
