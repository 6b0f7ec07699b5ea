#include "wrf/ref_ops.hpp"

#include <algorithm>
#include <cmath>

namespace wrf::ref {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvSpec& spec) {
    const int n_batch = x.size(0), in_h = x.size(2), in_w = x.size(3);
    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    const int ic_g = spec.in_channels / spec.groups;
    const int oc_g = spec.out_channels / spec.groups;
    const int out_h = conv_out_dim(in_h, k, s, p);
    const int out_w = conv_out_dim(in_w, k, s, p);

    Tensor y({n_batch, spec.out_channels, out_h, out_w});
    for (int n = 0; n < n_batch; ++n)
        for (int oc = 0; oc < spec.out_channels; ++oc) {
            const int g = oc / oc_g;
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    double acc = bias ? bias->data()[oc] : 0.0;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * s - p + ky;
                            const int ix = ox * s - p + kx;
                            if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                            for (int ci = 0; ci < ic_g; ++ci)
                                acc += static_cast<double>(x.at(n, g * ic_g + ci, iy, ix)) *
                                       static_cast<double>(weight.at(oc, ci, ky, kx));
                        }
                    y.at(n, oc, oy, ox) = static_cast<float>(acc);
                }
        }
    return y;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const Tensor& mean, const Tensor& var, float eps) {
    Tensor y(x.shape());
    for (int n = 0; n < x.size(0); ++n)
        for (int c = 0; c < x.size(1); ++c)
            for (int h = 0; h < x.size(2); ++h)
                for (int w = 0; w < x.size(3); ++w) {
                    const double v = (static_cast<double>(x.at(n, c, h, w)) - mean.at(c)) /
                                         std::sqrt(static_cast<double>(var.at(c)) + eps) * gamma.at(c) +
                                     beta.at(c);
                    y.at(n, c, h, w) = static_cast<float>(v);
                }
    return y;
}

Tensor global_avg_pool(const Tensor& x) {
    Tensor y({x.size(0), x.size(1), 1, 1});
    for (int n = 0; n < x.size(0); ++n)
        for (int c = 0; c < x.size(1); ++c) {
            double s = 0.0;
            long count = 0;
            for (int h = 0; h < x.size(2); ++h)
                for (int w = 0; w < x.size(3); ++w) {
                    s += x.at(n, c, h, w);
                    ++count;
                }
            y.at(n, c, 0, 0) = static_cast<float>(s / count);
        }
    return y;
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    const int in_h = x.size(2), in_w = x.size(3);
    Tensor y({x.size(0), x.size(1), out_h, out_w});
    for (int n = 0; n < x.size(0); ++n)
        for (int c = 0; c < x.size(1); ++c)
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    double fy = (oy + 0.5) * in_h / out_h - 0.5;
                    double fx = (ox + 0.5) * in_w / out_w - 0.5;
                    fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
                    fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
                    const int y0 = static_cast<int>(std::floor(fy));
                    const int x0 = static_cast<int>(std::floor(fx));
                    const int y1 = std::min(y0 + 1, in_h - 1);
                    const int x1 = std::min(x0 + 1, in_w - 1);
                    const double wy = fy - y0, wx = fx - x0;
                    const double v = (1.0 - wy) * ((1.0 - wx) * x.at(n, c, y0, x0) + wx * x.at(n, c, y0, x1)) +
                                     wy * ((1.0 - wx) * x.at(n, c, y1, x0) + wx * x.at(n, c, y1, x1));
                    y.at(n, c, oy, ox) = static_cast<float>(v);
                }
    return y;
}

Tensor layernorm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta, float eps) {
    const int rows = tokens.size(0), dim = tokens.size(1);
    Tensor y({rows, dim});
    for (int r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (int i = 0; i < dim; ++i) mu += tokens.at(r, i);
        mu /= dim;
        double var = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double d = tokens.at(r, i) - mu;
            var += d * d;
        }
        var /= dim;
        for (int i = 0; i < dim; ++i)
            y.at(r, i) = static_cast<float>((tokens.at(r, i) - mu) / std::sqrt(var + eps) * gamma.at(i) +
                                            beta.at(i));
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int rows = a.size(0), inner = a.size(1), cols = b.size(1);
    Tensor y({rows, cols});
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < inner; ++k)
                acc += static_cast<double>(a.at(r, k)) * static_cast<double>(b.at(k, j));
            y.at(r, j) = static_cast<float>(acc);
        }
    return y;
}

Tensor softmax_rows(const Tensor& a) {
    const int rows = a.size(0), cols = a.size(1);
    Tensor y({rows, cols});
    for (int r = 0; r < rows; ++r) {
        double m = a.at(r, 0);
        for (int j = 1; j < cols; ++j) m = std::max(m, static_cast<double>(a.at(r, j)));
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += std::exp(a.at(r, j) - m);
        for (int j = 0; j < cols; ++j)
            y.at(r, j) = static_cast<float>(std::exp(a.at(r, j) - m) / s);
    }
    return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace wrf::ref
