#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosgan {

using Scalar = double;

// Dense row-major tensor. Convention for image data is NCHW.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, Scalar fill = 0.0)
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    Tensor(std::vector<int> shape, std::vector<Scalar> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_numel(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    Scalar& operator[](std::size_t i) { return data_[i]; }
    Scalar operator[](std::size_t i) const { return data_[i]; }

    std::vector<Scalar>& vec() { return data_; }
    const std::vector<Scalar>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (Scalar v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Scalar min() const { return *std::min_element(data_.begin(), data_.end()); }
    Scalar max() const { return *std::max_element(data_.begin(), data_.end()); }

    Scalar sum() const { return std::accumulate(data_.begin(), data_.end(), Scalar(0)); }
    Scalar mean() const { return data_.empty() ? Scalar(0) : sum() / static_cast<Scalar>(data_.size()); }

    static std::string shape_str(const std::vector<int>& s) {
        std::string r = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(s[i]);
        }
        return r + "]";
    }

private:
    static std::size_t checked_numel(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    std::vector<Scalar> data_;
};

// An image batch is a rank-4 NCHW tensor with values expected in [-1, 1].
inline void check_image_batch(const Tensor& t, const char* what = "image") {
    if (t.rank() != 4)
        throw std::invalid_argument(std::string(what) + ": expected NCHW tensor, got rank " +
                                    std::to_string(t.rank()));
    if (!t.all_finite())
        throw std::invalid_argument(std::string(what) + ": non-finite values");
}

inline void check_square_pow2(const Tensor& t, const char* what = "image") {
    check_image_batch(t, what);
    const int h = t.dim(2), w = t.dim(3);
    if (h != w)
        throw std::invalid_argument(std::string(what) + ": expected square image, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    if (h <= 0 || (h & (h - 1)) != 0)
        throw std::invalid_argument(std::string(what) + ": side must be a power of two");
}

}  // namespace cosgan
