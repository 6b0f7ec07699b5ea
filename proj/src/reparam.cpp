#include "wrf/reparam.hpp"

#include <cmath>

#include "wrf/rng.hpp"

namespace wrf {

void BranchedConvBlock::validate() const {
    if (target_kernel <= 0 || target_kernel % 2 == 0)
        throw Error("BranchedConvBlock: target kernel must be odd, got " + std::to_string(target_kernel));
    if (in_channels % groups || out_channels % groups)
        throw Error("BranchedConvBlock: channels not divisible by groups");
    if (branches.empty() && !identity_bn)
        throw Error("BranchedConvBlock: block has no branches");
    for (const ConvBranch& br : branches) {
        const int kb = br.weight.size(2);
        if (kb % 2 == 0 || kb > target_kernel)
            throw Error("BranchedConvBlock: branch kernel " + std::to_string(kb) +
                        " invalid for target " + std::to_string(target_kernel));
        if (br.weight.size(0) != out_channels || br.weight.size(1) != in_channels / groups)
            throw Error("BranchedConvBlock: branch weight shape " + shape_str(br.weight.shape()) +
                        " inconsistent with block channels");
    }
    if (identity_bn && (in_channels != out_channels || stride != 1))
        throw Error("BranchedConvBlock: identity branch requires in==out channels and stride 1");
    if (layer_scale && layer_scale->size(0) != out_channels)
        throw Error("BranchedConvBlock: layer scale length != out_channels");
}

Tensor BranchedConvBlock::forward(const Tensor& x) const {
    validate();
    Tensor acc;
    for (const ConvBranch& br : branches) {
        const int kb = br.weight.size(2);
        ConvSpec spec{in_channels, out_channels, kb, stride, (kb - 1) / 2, groups};
        Tensor y = conv2d(x, br.weight, br.bias ? &*br.bias : nullptr, spec);
        y = batchnorm2d(y, br.bn.gamma, br.bn.beta, br.bn.mean, br.bn.var, br.bn.eps);
        acc = acc.empty() ? std::move(y) : add(acc, y);
    }
    if (identity_bn) {
        Tensor y = batchnorm2d(x, identity_bn->gamma, identity_bn->beta, identity_bn->mean,
                               identity_bn->var, identity_bn->eps);
        acc = acc.empty() ? std::move(y) : add(acc, y);
    }
    if (layer_scale) {
        const int c = out_channels;
        const int64_t plane = static_cast<int64_t>(acc.size(2)) * acc.size(3);
        for (int n = 0; n < acc.size(0); ++n)
            for (int ch = 0; ch < c; ++ch) {
                float* p = acc.data() + (static_cast<int64_t>(n) * c + ch) * plane;
                const float g = layer_scale->at(ch);
                for (int64_t i = 0; i < plane; ++i) p[i] *= g;
            }
    }
    return acc;
}

Tensor FusedConv::forward(const Tensor& x) const {
    const ConvSpec spec{weight.size(1) * groups, weight.size(0), weight.size(2), stride, padding, groups};
    return conv2d(x, weight, &bias, spec);
}

std::pair<Tensor, Tensor> fuse_conv_bn(const Tensor& weight, const Tensor* bias,
                                       const BatchNormParams& bn) {
    const int out_c = weight.size(0);
    for (const Tensor* v : {&bn.gamma, &bn.beta, &bn.mean, &bn.var})
        if (v->rank() != 1 || v->size(0) != out_c)
            throw Error("fuse_conv_bn: bn vector length " + std::to_string(v->size(0)) +
                        " != out_channels " + std::to_string(out_c));
    if (bias && bias->size(0) != out_c)
        throw Error("fuse_conv_bn: bias length != out_channels");

    Tensor w(weight.shape());
    Tensor b({out_c});
    const int64_t per_out = weight.numel() / out_c;
    for (int o = 0; o < out_c; ++o) {
        const float scale = bn.gamma.at(o) / std::sqrt(bn.var.at(o) + bn.eps);
        const float* src = weight.data() + static_cast<int64_t>(o) * per_out;
        float* dst = w.data() + static_cast<int64_t>(o) * per_out;
        for (int64_t i = 0; i < per_out; ++i) dst[i] = src[i] * scale;
        const float b0 = bias ? bias->at(o) : 0.0f;
        b.at(o) = (b0 - bn.mean.at(o)) * scale + bn.beta.at(o);
    }
    return {std::move(w), std::move(b)};
}

Tensor embed_kernel(const Tensor& weight, int target_kernel) {
    const int ks = weight.size(2);
    if (ks % 2 == 0 || target_kernel % 2 == 0)
        throw Error("embed_kernel: kernels must be odd (" + std::to_string(ks) + " -> " +
                    std::to_string(target_kernel) + ")");
    if (ks > target_kernel)
        throw Error("embed_kernel: source kernel " + std::to_string(ks) + " exceeds target " +
                    std::to_string(target_kernel));
    const int off = (target_kernel - ks) / 2;
    Tensor out({weight.size(0), weight.size(1), target_kernel, target_kernel});
    for (int o = 0; o < weight.size(0); ++o)
        for (int i = 0; i < weight.size(1); ++i)
            for (int y = 0; y < ks; ++y)
                for (int x = 0; x < ks; ++x)
                    out.at(o, i, y + off, x + off) = weight.at(o, i, y, x);
    return out;
}

Tensor identity_to_kernel(int channels, int groups, int target_kernel) {
    if (channels % groups)
        throw Error("identity_to_kernel: channels not divisible by groups");
    const int in_g = channels / groups;
    const int c = (target_kernel - 1) / 2;
    Tensor w({channels, in_g, target_kernel, target_kernel});
    for (int o = 0; o < channels; ++o) {
        const int group = o / in_g;
        w.at(o, o - group * in_g, c, c) = 1.0f;
    }
    return w;
}

std::pair<Tensor, Tensor> fold_layer_scale(const Tensor& weight, const Tensor& bias,
                                           const Tensor& gamma_ls) {
    const int out_c = weight.size(0);
    if (gamma_ls.rank() != 1 || gamma_ls.size(0) != out_c)
        throw Error("fold_layer_scale: gamma length " + std::to_string(gamma_ls.size(0)) +
                    " != out_channels " + std::to_string(out_c));
    Tensor w(weight.shape());
    Tensor b({out_c});
    const int64_t per_out = weight.numel() / out_c;
    for (int o = 0; o < out_c; ++o) {
        const float g = gamma_ls.at(o);
        const float* src = weight.data() + static_cast<int64_t>(o) * per_out;
        float* dst = w.data() + static_cast<int64_t>(o) * per_out;
        for (int64_t i = 0; i < per_out; ++i) dst[i] = src[i] * g;
        b.at(o) = bias.at(o) * g;
    }
    return {std::move(w), std::move(b)};
}

FusedConv fuse_block(const BranchedConvBlock& block) {
    block.validate();
    const int kt = block.target_kernel;
    Tensor w({block.out_channels, block.in_channels / block.groups, kt, kt});
    Tensor b({block.out_channels});

    for (const ConvBranch& br : block.branches) {
        auto [bw, bb] = fuse_conv_bn(br.weight, br.bias ? &*br.bias : nullptr, br.bn);
        Tensor embedded = embed_kernel(bw, kt);
        for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] += embedded.data()[i];
        for (int o = 0; o < block.out_channels; ++o) b.at(o) += bb.at(o);
    }
    if (block.identity_bn) {
        Tensor id = identity_to_kernel(block.in_channels, block.groups, kt);
        auto [iw, ib] = fuse_conv_bn(id, nullptr, *block.identity_bn);
        for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] += iw.data()[i];
        for (int o = 0; o < block.out_channels; ++o) b.at(o) += ib.at(o);
    }
    if (block.layer_scale) {
        auto [sw, sb] = fold_layer_scale(w, b, *block.layer_scale);
        w = std::move(sw);
        b = std::move(sb);
    }
    return FusedConv{std::move(w), std::move(b), block.stride, block.padding(), block.groups};
}

Tensor random_uniform(const std::vector<int>& shape, uint64_t seed) {
    Tensor t(shape);
    SplitMix64 rng(seed);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1.0f, 1.0f);
    return t;
}

EquivalenceReport verify_equivalence(const std::function<Tensor(const Tensor&)>& branched_forward,
                                     const std::function<Tensor(const Tensor&)>& fused_forward,
                                     const std::vector<int>& input_shape, int trials, uint64_t seed,
                                     float tolerance) {
    EquivalenceReport report;
    report.tolerance = tolerance;
    double mean_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        Tensor x = random_uniform(input_shape, seed + static_cast<uint64_t>(t) * 0x51ed270b0029fc1fULL);
        Tensor a = branched_forward(x);
        Tensor f = fused_forward(x);
        if (!a.same_shape(f))
            throw Error("verify_equivalence: output shapes differ, " + shape_str(a.shape()) + " vs " +
                        shape_str(f.shape()));
        report.max_abs_diff = std::max(report.max_abs_diff, max_abs_diff(a, f));
        mean_sum += mean_abs_diff(a, f);
    }
    report.mean_abs_diff = trials > 0 ? static_cast<float>(mean_sum / trials) : 0.0f;
    report.pass = report.max_abs_diff <= tolerance;
    return report;
}

}  // namespace wrf
