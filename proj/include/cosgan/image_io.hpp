#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/tensor.hpp"

namespace cosgan {

// One aligned training/eval sample. Images are 8-bit BGR mats as decoded
// from disk; conversion to [-1,1] tensors happens at the training boundary.
struct ImagePair {
    cv::Mat anime;
    cv::Mat clothing;
    std::string id;
};

inline cv::Mat load_image(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot decode image: " + path);
    return img;
}

inline void save_image(const cv::Mat& img, const std::string& path) {
    if (!cv::imwrite(path, img))
        throw std::runtime_error("cannot write image: " + path);
}

// 8-bit BGR HxW -> 3xHxW RGB tensor in [-1,1]
inline Tensor mat_to_tensor(const cv::Mat& m) {
    if (m.type() != CV_8UC3) throw std::invalid_argument("mat_to_tensor: expected CV_8UC3");
    const int h = m.rows, w = m.cols;
    Tensor t({3, h, w});
    for (int y = 0; y < h; ++y) {
        const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < w; ++x) {
            // BGR -> RGB
            t[(0 * h + y) * static_cast<std::size_t>(w) + x] = row[x][2] / 127.5 - 1.0;
            t[(1 * h + y) * static_cast<std::size_t>(w) + x] = row[x][1] / 127.5 - 1.0;
            t[(2 * h + y) * static_cast<std::size_t>(w) + x] = row[x][0] / 127.5 - 1.0;
        }
    }
    return t;
}

// 3xHxW RGB tensor in [-1,1] -> 8-bit BGR
inline cv::Mat tensor_to_mat(const Tensor& t) {
    if (t.rank() != 3 || t.dim(0) != 3)
        throw std::invalid_argument("tensor_to_mat: expected 3xHxW");
    const int h = t.dim(1), w = t.dim(2);
    cv::Mat m(h, w, CV_8UC3);
    auto to_u8 = [](Scalar v) {
        int p = static_cast<int>(std::lround((v + 1.0) * 127.5));
        return static_cast<unsigned char>(std::clamp(p, 0, 255));
    };
    for (int y = 0; y < h; ++y) {
        cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < w; ++x) {
            row[x][2] = to_u8(t[(0 * h + y) * static_cast<std::size_t>(w) + x]);
            row[x][1] = to_u8(t[(1 * h + y) * static_cast<std::size_t>(w) + x]);
            row[x][0] = to_u8(t[(2 * h + y) * static_cast<std::size_t>(w) + x]);
        }
    }
    return m;
}

// slice one CHW sample out of an NCHW batch
inline Tensor batch_slice(const Tensor& batch, int index) {
    if (batch.rank() != 4) throw std::invalid_argument("batch_slice: NCHW required");
    const std::size_t n = batch.numel() / batch.dim(0);
    Tensor out({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::copy_n(batch.data() + index * n, n, out.data());
    return out;
}

inline cv::Mat resize_to(const cv::Mat& img, int side) {
    cv::Mat out;
    cv::resize(img, out, cv::Size(side, side), 0, 0,
               side < img.cols ? cv::INTER_AREA : cv::INTER_CUBIC);
    return out;
}

// Two-row contact sheet: inputs on top, outputs below.
inline cv::Mat contact_sheet(const std::vector<cv::Mat>& inputs,
                             const std::vector<cv::Mat>& outputs) {
    if (inputs.empty() || inputs.size() != outputs.size())
        throw std::invalid_argument("contact_sheet: need matching non-empty rows");
    std::vector<cv::Mat> top, bottom;
    const int side = inputs[0].rows;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        top.push_back(resize_to(inputs[i], side));
        bottom.push_back(resize_to(outputs[i], side));
    }
    cv::Mat row1, row2, sheet;
    cv::hconcat(top, row1);
    cv::hconcat(bottom, row2);
    cv::vconcat(std::vector<cv::Mat>{row1, row2}, sheet);
    return sheet;
}

}  // namespace cosgan
