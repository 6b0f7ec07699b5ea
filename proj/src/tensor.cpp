#include "wrf/tensor.hpp"

#include <cmath>
#include <sstream>

namespace wrf {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
        if (d <= 0) throw Error("tensor dimension must be positive, got " + shape_str(shape_));
        n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0f);
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = value;
    return t;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

bool all_finite(const Tensor& t) {
    const float* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw Error("max_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    float m = 0.0f;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

float mean_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw Error("mean_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.numel() == 0) return 0.0f;
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        s += std::fabs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    return static_cast<float>(s / static_cast<double>(a.numel()));
}

}  // namespace wrf
