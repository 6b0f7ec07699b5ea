#include "wrf/ops.hpp"

#include <algorithm>
#include <cmath>

namespace wrf {

int conv_out_dim(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

static void check_rank4(const Tensor& x, const char* op) {
    if (x.rank() != 4) throw Error(std::string(op) + ": expected rank-4 input, got " + shape_str(x.shape()));
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvSpec& spec) {
    check_rank4(x, "conv2d");
    if (weight.rank() != 4)
        throw Error("conv2d: expected rank-4 weight, got " + shape_str(weight.shape()));
    if (spec.groups <= 0 || spec.in_channels % spec.groups || spec.out_channels % spec.groups)
        throw Error("conv2d: channels not divisible by groups (in=" + std::to_string(spec.in_channels) +
                    ", out=" + std::to_string(spec.out_channels) + ", groups=" + std::to_string(spec.groups) + ")");
    if (x.size(1) != spec.in_channels)
        throw Error("conv2d: input channel dim is " + std::to_string(x.size(1)) +
                    ", spec.in_channels is " + std::to_string(spec.in_channels));
    const int ic_g = spec.in_channels / spec.groups;
    const int oc_g = spec.out_channels / spec.groups;
    if (weight.size(0) != spec.out_channels || weight.size(1) != ic_g ||
        weight.size(2) != spec.kernel || weight.size(3) != spec.kernel)
        throw Error("conv2d: weight shape " + shape_str(weight.shape()) + " inconsistent with spec (out=" +
                    std::to_string(spec.out_channels) + ", in/groups=" + std::to_string(ic_g) +
                    ", k=" + std::to_string(spec.kernel) + ")");
    if (bias && (bias->rank() != 1 || bias->size(0) != spec.out_channels))
        throw Error("conv2d: bias length " + std::to_string(bias ? bias->size(0) : 0) +
                    " != out_channels " + std::to_string(spec.out_channels));

    const int n_batch = x.size(0), in_h = x.size(2), in_w = x.size(3);
    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    const int out_h = conv_out_dim(in_h, k, s, p);
    const int out_w = conv_out_dim(in_w, k, s, p);
    if (out_h <= 0 || out_w <= 0)
        throw Error("conv2d: non-positive output size for input " + shape_str(x.shape()));

    Tensor y({n_batch, spec.out_channels, out_h, out_w});
    const float* src = x.data();
    const float* wts = weight.data();
    float* dst = y.data();

    const int64_t rows = static_cast<int64_t>(n_batch) * spec.out_channels * out_h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int oy = static_cast<int>(row % out_h);
        const int oc = static_cast<int>((row / out_h) % spec.out_channels);
        const int n = static_cast<int>(row / (static_cast<int64_t>(out_h) * spec.out_channels));
        const int g = oc / oc_g;

        float* out_row = dst + ((static_cast<int64_t>(n) * spec.out_channels + oc) * out_h + oy) * out_w;
        const float b = bias ? bias->data()[oc] : 0.0f;
        for (int ox = 0; ox < out_w; ++ox) out_row[ox] = b;

        // Fixed per-element accumulation order: ci, then ky, then kx.
        for (int ci = 0; ci < ic_g; ++ci) {
            const float* in_ch = src + ((static_cast<int64_t>(n) * spec.in_channels + g * ic_g + ci) * in_h) * in_w;
            const float* w_ch = wts + ((static_cast<int64_t>(oc) * ic_g + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * s - p + ky;
                if (iy < 0 || iy >= in_h) continue;
                const float* in_row = in_ch + static_cast<int64_t>(iy) * in_w;
                const float* w_row = w_ch + static_cast<int64_t>(ky) * k;
                for (int kx = 0; kx < k; ++kx) {
                    const float w = w_row[kx];
                    const int off = kx - p;
                    // valid ox range so that 0 <= ox*s + off < in_w
                    int ox0 = 0;
                    if (off < 0) ox0 = (-off + s - 1) / s;
                    int ox1 = (in_w - 1 - off >= 0) ? (in_w - 1 - off) / s + 1 : 0;  // exclusive
                    if (ox1 > out_w) ox1 = out_w;
                    const float* in_base = in_row + off;
                    if (s == 1) {
                        for (int ox = ox0; ox < ox1; ++ox) out_row[ox] += w * in_base[ox];
                    } else {
                        for (int ox = ox0; ox < ox1; ++ox) out_row[ox] += w * in_base[static_cast<int64_t>(ox) * s];
                    }
                }
            }
        }
    }
    return y;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const Tensor& mean, const Tensor& var, float eps) {
    check_rank4(x, "batchnorm2d");
    const int c = x.size(1);
    for (const auto* v : {&gamma, &beta, &mean, &var}) {
        if (v->rank() != 1 || v->size(0) != c)
            throw Error("batchnorm2d: stat vector length " + std::to_string(v->size(0)) +
                        " != channel count " + std::to_string(c));
    }
    if (eps < 0.0f) throw Error("batchnorm2d: eps must be non-negative");
    for (int i = 0; i < c; ++i)
        if (var.at(i) < 0.0f) throw Error("batchnorm2d: negative variance at channel " + std::to_string(i));

    std::vector<float> scale(static_cast<size_t>(c)), shift(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) {
        scale[i] = gamma.at(i) / std::sqrt(var.at(i) + eps);
        shift[i] = beta.at(i) - mean.at(i) * scale[i];
    }

    Tensor y(x.shape());
    const int64_t plane = static_cast<int64_t>(x.size(2)) * x.size(3);
    const int64_t planes = static_cast<int64_t>(x.size(0)) * c;
#pragma omp parallel for schedule(static)
    for (int64_t pc = 0; pc < planes; ++pc) {
        const int ch = static_cast<int>(pc % c);
        const float* in = x.data() + pc * plane;
        float* out = y.data() + pc * plane;
        const float sc = scale[ch], sh = shift[ch];
        for (int64_t i = 0; i < plane; ++i) out[i] = in[i] * sc + sh;
    }
    return y;
}

static float gelu_exact(float v) {
    const double xd = static_cast<double>(v);
    return static_cast<float>(0.5 * xd * (1.0 + std::erf(xd / std::sqrt(2.0))));
}

static float sigmoid_stable(float v) {
    if (v >= 0.0f) {
        const float e = std::exp(-v);
        return 1.0f / (1.0f + e);
    }
    const float e = std::exp(v);
    return e / (1.0f + e);
}

Tensor activation(const Tensor& x, Act kind) {
    Tensor y(x.shape());
    const float* in = x.data();
    float* out = y.data();
    const int64_t n = x.numel();
    switch (kind) {
        case Act::gelu:
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) out[i] = gelu_exact(in[i]);
            break;
        case Act::relu:
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
            break;
        case Act::sigmoid:
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) out[i] = sigmoid_stable(in[i]);
            break;
    }
    return y;
}

Tensor global_avg_pool(const Tensor& x) {
    check_rank4(x, "global_avg_pool");
    const int64_t plane = static_cast<int64_t>(x.size(2)) * x.size(3);
    const int64_t planes = static_cast<int64_t>(x.size(0)) * x.size(1);
    Tensor y({x.size(0), x.size(1), 1, 1});
#pragma omp parallel for schedule(static)
    for (int64_t pc = 0; pc < planes; ++pc) {
        const float* in = x.data() + pc * plane;
        double s = 0.0;
        for (int64_t i = 0; i < plane; ++i) s += in[i];
        y.data()[pc] = static_cast<float>(s / static_cast<double>(plane));
    }
    return y;
}

static Tensor bilinear_impl(const Tensor& x, int out_h, int out_w) {
    check_rank4(x, "bilinear");
    if (out_h <= 0 || out_w <= 0)
        throw Error("bilinear: target size must be positive, got " +
                    std::to_string(out_h) + "x" + std::to_string(out_w));
    const int in_h = x.size(2), in_w = x.size(3);

    // source coordinate = (dst + 0.5) * scale - 0.5, clamped
    std::vector<int> x0(static_cast<size_t>(out_w)), x1(static_cast<size_t>(out_w));
    std::vector<float> wx(static_cast<size_t>(out_w));
    const double sx = static_cast<double>(in_w) / out_w;
    for (int ox = 0; ox < out_w; ++ox) {
        double src = (ox + 0.5) * sx - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in_w - 1) i0 = in_w - 1;
        x0[ox] = i0;
        x1[ox] = std::min(i0 + 1, in_w - 1);
        wx[ox] = static_cast<float>(src - i0);
    }
    std::vector<int> y0(static_cast<size_t>(out_h)), y1(static_cast<size_t>(out_h));
    std::vector<float> wy(static_cast<size_t>(out_h));
    const double sy = static_cast<double>(in_h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        double src = (oy + 0.5) * sy - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in_h - 1) i0 = in_h - 1;
        y0[oy] = i0;
        y1[oy] = std::min(i0 + 1, in_h - 1);
        wy[oy] = static_cast<float>(src - i0);
    }

    Tensor y({x.size(0), x.size(1), out_h, out_w});
    const int64_t planes = static_cast<int64_t>(x.size(0)) * x.size(1);
#pragma omp parallel for schedule(static)
    for (int64_t pc = 0; pc < planes; ++pc) {
        const float* in = x.data() + pc * in_h * in_w;
        float* out = y.data() + pc * static_cast<int64_t>(out_h) * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const float* r0 = in + static_cast<int64_t>(y0[oy]) * in_w;
            const float* r1 = in + static_cast<int64_t>(y1[oy]) * in_w;
            const float fy = wy[oy];
            float* orow = out + static_cast<int64_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const float fx = wx[ox];
                const float top = r0[x0[ox]] * (1.0f - fx) + r0[x1[ox]] * fx;
                const float bot = r1[x0[ox]] * (1.0f - fx) + r1[x1[ox]] * fx;
                orow[ox] = top * (1.0f - fy) + bot * fy;
            }
        }
    }
    return y;
}

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
    check_rank4(x, "bilinear_upsample");
    if (out_h < x.size(2) || out_w < x.size(3))
        throw Error("bilinear_upsample: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                    " smaller than input " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
    return bilinear_impl(x, out_h, out_w);
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    return bilinear_impl(x, out_h, out_w);
}

Tensor layernorm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta, float eps) {
    if (tokens.rank() != 2)
        throw Error("layernorm: expected rank-2 tokens, got " + shape_str(tokens.shape()));
    const int rows = tokens.size(0), dim = tokens.size(1);
    if (gamma.rank() != 1 || gamma.size(0) != dim || beta.rank() != 1 || beta.size(0) != dim)
        throw Error("layernorm: affine vector length != dim " + std::to_string(dim));

    Tensor y({rows, dim});
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* in = tokens.data() + static_cast<int64_t>(r) * dim;
        float* out = y.data() + static_cast<int64_t>(r) * dim;
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += in[i];
        const double mu = s / dim;
        double v = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double d = in[i] - mu;
            v += d * d;
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(v / dim + eps));
        const float mean_f = static_cast<float>(mu);
        for (int i = 0; i < dim; ++i)
            out[i] = (in[i] - mean_f) * inv * gamma.at(i) + beta.at(i);
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw Error("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    if (a.size(1) != b.size(0))
        throw Error("matmul: inner dimensions differ, " + std::to_string(a.size(1)) + " vs " + std::to_string(b.size(0)));
    const int rows = a.size(0), inner = a.size(1), cols = b.size(1);
    Tensor y({rows, cols});
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* arow = a.data() + static_cast<int64_t>(r) * inner;
        float* orow = y.data() + static_cast<int64_t>(r) * cols;
        for (int j = 0; j < cols; ++j) orow[j] = 0.0f;
        for (int k = 0; k < inner; ++k) {
            const float av = arow[k];
            const float* brow = b.data() + static_cast<int64_t>(k) * cols;
            for (int j = 0; j < cols; ++j) orow[j] += av * brow[j];
        }
    }
    return y;
}

Tensor softmax_rows(const Tensor& a) {
    if (a.rank() != 2)
        throw Error("softmax_rows: expected rank-2 input, got " + shape_str(a.shape()));
    const int rows = a.size(0), cols = a.size(1);
    Tensor y({rows, cols});
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* in = a.data() + static_cast<int64_t>(r) * cols;
        float* out = y.data() + static_cast<int64_t>(r) * cols;
        float m = in[0];
        for (int j = 1; j < cols; ++j) m = std::max(m, in[j]);
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
            out[j] = std::exp(in[j] - m);
            s += out[j];
        }
        const float inv = static_cast<float>(1.0 / s);
        for (int j = 0; j < cols; ++j) out[j] *= inv;
    }
    return y;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw Error("concat_channels: no inputs");
    const Tensor& first = *parts[0];
    check_rank4(first, "concat_channels");
    int total_c = 0;
    for (const Tensor* t : parts) {
        check_rank4(*t, "concat_channels");
        if (t->size(0) != first.size(0) || t->size(2) != first.size(2) || t->size(3) != first.size(3))
            throw Error("concat_channels: spatial/batch mismatch " + shape_str(t->shape()) +
                        " vs " + shape_str(first.shape()));
        total_c += t->size(1);
    }
    const int n = first.size(0), h = first.size(2), w = first.size(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    Tensor y({n, total_c, h, w});
    for (int bi = 0; bi < n; ++bi) {
        int c_off = 0;
        for (const Tensor* t : parts) {
            const int c = t->size(1);
            const float* src = t->data() + static_cast<int64_t>(bi) * c * plane;
            float* dst = y.data() + (static_cast<int64_t>(bi) * total_c + c_off) * plane;
            std::copy(src, src + static_cast<int64_t>(c) * plane, dst);
            c_off += c;
        }
    }
    return y;
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw Error("transpose: expected rank-2 input, got " + shape_str(m.shape()));
    const int rows = m.size(0), cols = m.size(1);
    Tensor y({cols, rows});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) y.at(c, r) = m.at(r, c);
    return y;
}

Tensor linear(const Tensor& rows, const Tensor& weight, const Tensor& bias) {
    if (rows.rank() != 2)
        throw Error("linear: expected rank-2 input, got " + shape_str(rows.shape()));
    if (weight.rank() != 2 || weight.size(1) != rows.size(1))
        throw Error("linear: weight shape " + shape_str(weight.shape()) + " incompatible with input " +
                    shape_str(rows.shape()));
    const int out_f = weight.size(0);
    if (bias.rank() != 1 || bias.size(0) != out_f)
        throw Error("linear: bias length != out features " + std::to_string(out_f));
    Tensor y = matmul(rows, transpose(weight));
#pragma omp parallel for schedule(static)
    for (int r = 0; r < y.size(0); ++r)
        for (int j = 0; j < out_f; ++j) y.at(r, j) += bias.at(j);
    return y;
}

Tensor map_to_tokens(const Tensor& x) {
    check_rank4(x, "map_to_tokens");
    const int n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
    Tensor tok({n * h * w, c});
    for (int bi = 0; bi < n; ++bi)
        for (int ch = 0; ch < c; ++ch) {
            const float* plane = x.data() + (static_cast<int64_t>(bi) * c + ch) * h * w;
            for (int i = 0; i < h * w; ++i)
                tok.at(bi * h * w + i, ch) = plane[i];
        }
    return tok;
}

Tensor tokens_to_map(const Tensor& tokens, int n, int c, int h, int w) {
    if (tokens.rank() != 2 || tokens.size(0) != n * h * w || tokens.size(1) != c)
        throw Error("tokens_to_map: token shape " + shape_str(tokens.shape()) + " does not match (" +
                    std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
                    std::to_string(w) + ")");
    Tensor x({n, c, h, w});
    for (int bi = 0; bi < n; ++bi)
        for (int ch = 0; ch < c; ++ch) {
            float* plane = x.data() + (static_cast<int64_t>(bi) * c + ch) * h * w;
            for (int i = 0; i < h * w; ++i)
                plane[i] = tokens.at(bi * h * w + i, ch);
        }
    return x;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw Error("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor y(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
    return y;
}

}  // namespace wrf
