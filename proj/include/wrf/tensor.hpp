#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wrf {

// Library-wide error type. Everything that violates a shape or format
// contract throws one of these with a message naming the offending field.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major float32 tensor. Rank 4 (N,C,H,W) for feature maps,
// rank 2 (rows,cols) for token matrices, rank 1 for per-channel vectors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float value);

    int rank() const { return static_cast<int>(shape_.size()); }
    int size(int dim) const { return shape_[static_cast<size_t>(dim)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(int i) { return data_[static_cast<size_t>(i)]; }
    float at(int i) const { return data_[static_cast<size_t>(i)]; }

    float& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    float at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    float& at(int n, int c, int h, int w) {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    float at(int n, int c, int h, int w) const {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

std::string shape_str(const std::vector<int>& shape);

// True when every element is finite (no NaN/Inf).
bool all_finite(const Tensor& t);

// Max/mean absolute difference between same-shaped tensors.
float max_abs_diff(const Tensor& a, const Tensor& b);
float mean_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace wrf
