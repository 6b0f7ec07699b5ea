#include <cmath>

#include "doctest.h"
#include "wrf/ops.hpp"
#include "wrf/reparam.hpp"
#include "wrf/rng.hpp"

using namespace wrf;

namespace {

BatchNormParams neutral_bn(int c) {
    return BatchNormParams{Tensor::full({c}, 1.0f), Tensor({c}), Tensor({c}), Tensor::full({c}, 1.0f),
                           0.0f};
}

BatchNormParams random_bn(int c, uint64_t seed) {
    SplitMix64 rng(seed);
    BatchNormParams bn;
    bn.gamma = Tensor({c});
    bn.beta = Tensor({c});
    bn.mean = Tensor({c});
    bn.var = Tensor({c});
    for (int i = 0; i < c; ++i) {
        bn.gamma.at(i) = rng.uniform(0.5f, 1.5f);
        bn.beta.at(i) = rng.uniform(-0.5f, 0.5f);
        bn.mean.at(i) = rng.uniform(-0.3f, 0.3f);
        bn.var.at(i) = rng.uniform(0.5f, 1.5f);
    }
    bn.eps = 1e-5f;
    return bn;
}

// random block with the given geometry; layer scale ~ U(0.5,1.5) when present
BranchedConvBlock random_block(int in_c, int out_c, int kt, int stride, int groups,
                               std::vector<int> kernels, bool identity, bool layer_scale, uint64_t seed) {
    BranchedConvBlock b;
    b.in_channels = in_c;
    b.out_channels = out_c;
    b.target_kernel = kt;
    b.stride = stride;
    b.groups = groups;
    uint64_t s = seed;
    for (int k : kernels)
        b.branches.push_back(ConvBranch{random_uniform({out_c, in_c / groups, k, k}, ++s), std::nullopt,
                                        random_bn(out_c, ++s)});
    if (identity) b.identity_bn = random_bn(out_c, ++s);
    if (layer_scale) {
        Tensor ls({out_c});
        SplitMix64 rng(++s);
        for (int i = 0; i < out_c; ++i) ls.at(i) = rng.uniform(0.5f, 1.5f);
        b.layer_scale = ls;
    }
    return b;
}

}  // namespace

TEST_CASE("fuse_conv_bn") {
    SUBCASE("neutral bn leaves weights untouched") {
        Tensor w = random_uniform({4, 3, 3, 3}, 1);
        auto [fw, fb] = fuse_conv_bn(w, nullptr, neutral_bn(4));
        CHECK(fw == w);
        for (int o = 0; o < 4; ++o) CHECK(fb.at(o) == 0.0f);
    }
    SUBCASE("scalar case") {
        Tensor w = Tensor::full({1, 1, 1, 1}, 2.0f);
        Tensor bias = Tensor::full({1}, 1.0f);
        BatchNormParams bn{Tensor::full({1}, 3.0f), Tensor::full({1}, -1.0f), Tensor::full({1}, 4.0f),
                           Tensor::full({1}, 4.0f), 0.0f};
        auto [fw, fb] = fuse_conv_bn(w, &bias, bn);
        CHECK(fw.at(0, 0, 0, 0) == doctest::Approx(3.0).epsilon(1e-7));
        CHECK(fb.at(0) == doctest::Approx(-5.5).epsilon(1e-7));
    }
    SUBCASE("bn(conv(x)) equals conv'(x) + bias' on random inputs") {
        const ConvSpec spec{3, 5, 3, 1, 1, 1};
        Tensor w = random_uniform({5, 3, 3, 3}, 2);
        BatchNormParams bn = random_bn(5, 3);
        auto [fw, fb] = fuse_conv_bn(w, nullptr, bn);
        for (int t = 0; t < 100; ++t) {
            Tensor x = random_uniform({1, 3, 6, 6}, 100 + t);
            Tensor a = batchnorm2d(conv2d(x, w, nullptr, spec), bn.gamma, bn.beta, bn.mean, bn.var, bn.eps);
            Tensor f = conv2d(x, fw, &fb, spec);
            CHECK(max_abs_diff(a, f) <= 1e-5f);
        }
    }
    SUBCASE("length mismatch") {
        Tensor w = random_uniform({4, 3, 3, 3}, 4);
        CHECK_THROWS_AS(fuse_conv_bn(w, nullptr, neutral_bn(3)), Error);
    }
}

TEST_CASE("embed_kernel") {
    SUBCASE("1x1 to 3x3 lands at the center") {
        Tensor w = Tensor::full({1, 1, 1, 1}, 0.5f);
        Tensor e = embed_kernel(w, 3);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) CHECK(e.at(0, 0, y, x) == ((y == 1 && x == 1) ? 0.5f : 0.0f));
    }
    SUBCASE("3x3 to 7x7 occupies rows/cols 2..4") {
        Tensor w = random_uniform({2, 2, 3, 3}, 5);
        Tensor e = embed_kernel(w, 7);
        for (int o = 0; o < 2; ++o)
            for (int i = 0; i < 2; ++i)
                for (int y = 0; y < 7; ++y)
                    for (int x = 0; x < 7; ++x) {
                        const bool inside = y >= 2 && y <= 4 && x >= 2 && x <= 4;
                        CHECK(e.at(o, i, y, x) == (inside ? w.at(o, i, y - 2, x - 2) : 0.0f));
                    }
    }
    SUBCASE("center embedding preserves the conv result under zero padding") {
        const int triples[][3] = {{1, 3, 1}, {3, 7, 4}, {1, 7, 4}};
        for (const auto& t : triples) {
            const int ks = t[0], kt = t[1], stride = t[2];
            Tensor w = random_uniform({3, 2, ks, ks}, 50 + ks + kt);
            Tensor e = embed_kernel(w, kt);
            for (int trial = 0; trial < 10; ++trial) {
                Tensor x = random_uniform({1, 2, 16, 16}, 500 + trial);
                Tensor small = conv2d(x, w, nullptr, ConvSpec{2, 3, ks, stride, (ks - 1) / 2, 1});
                Tensor big = conv2d(x, e, nullptr, ConvSpec{2, 3, kt, stride, (kt - 1) / 2, 1});
                CHECK(max_abs_diff(small, big) <= 1e-6f);
            }
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(embed_kernel(Tensor({1, 1, 2, 2}), 3), Error);
        CHECK_THROWS_AS(embed_kernel(Tensor({1, 1, 5, 5}), 3), Error);
    }
}

TEST_CASE("identity_to_kernel") {
    SUBCASE("depthwise: each channel has a center one") {
        Tensor w = identity_to_kernel(3, 3, 3);
        CHECK(w.shape() == std::vector<int>{3, 1, 3, 3});
        for (int c = 0; c < 3; ++c) {
            CHECK(w.at(c, 0, 1, 1) == 1.0f);
            float sum = 0.0f;
            for (int i = 0; i < 9; ++i) sum += w.data()[c * 9 + i];
            CHECK(sum == 1.0f);
        }
    }
    SUBCASE("dense: Kronecker delta on the center plane") {
        Tensor w = identity_to_kernel(2, 1, 3);
        CHECK(w.shape() == std::vector<int>{2, 2, 3, 3});
        for (int o = 0; o < 2; ++o)
            for (int i = 0; i < 2; ++i) CHECK(w.at(o, i, 1, 1) == (o == i ? 1.0f : 0.0f));
    }
    SUBCASE("forward identity check") {
        for (const auto& [c, g, k] : {std::tuple{4, 4, 3}, std::tuple{4, 1, 5}, std::tuple{6, 2, 3}}) {
            Tensor w = identity_to_kernel(c, g, k);
            Tensor x = random_uniform({2, c, 7, 7}, 60 + k);
            Tensor y = conv2d(x, w, nullptr, ConvSpec{c, c, k, 1, (k - 1) / 2, g});
            CHECK(max_abs_diff(x, y) == 0.0f);
        }
    }
}

TEST_CASE("fold_layer_scale") {
    Tensor w = random_uniform({4, 2, 3, 3}, 70);
    Tensor b = random_uniform({4}, 71);
    SUBCASE("ones leave everything unchanged") {
        auto [fw, fb] = fold_layer_scale(w, b, Tensor::full({4}, 1.0f));
        CHECK(fw == w);
        CHECK(fb == b);
    }
    SUBCASE("zeros annihilate") {
        auto [fw, fb] = fold_layer_scale(w, b, Tensor({4}));
        for (int64_t i = 0; i < fw.numel(); ++i) CHECK(fw.data()[i] == 0.0f);
        for (int i = 0; i < 4; ++i) CHECK(fb.at(i) == 0.0f);
    }
    SUBCASE("broadcast oracle") {
        Tensor ls = random_uniform({4}, 72);
        auto [fw, fb] = fold_layer_scale(w, b, ls);
        const ConvSpec spec{2, 4, 3, 1, 1, 1};
        for (int t = 0; t < 10; ++t) {
            Tensor x = random_uniform({1, 2, 5, 5}, 700 + t);
            Tensor base = conv2d(x, w, &b, spec);
            for (int n = 0; n < 1; ++n)
                for (int c = 0; c < 4; ++c)
                    for (int yy = 0; yy < 5; ++yy)
                        for (int xx = 0; xx < 5; ++xx) base.at(n, c, yy, xx) *= ls.at(c);
            CHECK(max_abs_diff(base, conv2d(x, fw, &fb, spec)) <= 1e-6f);
        }
    }
    SUBCASE("length mismatch") { CHECK_THROWS_AS(fold_layer_scale(w, b, Tensor({3})), Error); }
}

TEST_CASE("fuse_block") {
    SUBCASE("degenerate single branch equals fuse_conv_bn") {
        BranchedConvBlock blk = random_block(3, 5, 3, 1, 1, {3}, false, false, 80);
        FusedConv fused = fuse_block(blk);
        auto [fw, fb] = fuse_conv_bn(blk.branches[0].weight, nullptr, blk.branches[0].bn);
        CHECK(fused.weight == fw);
        CHECK(fused.bias == fb);
    }
    SUBCASE("single-branch neutral bn reproduces the branch weights bit-exactly") {
        Tensor w = random_uniform({4, 1, 3, 3}, 81);
        BranchedConvBlock blk;
        blk.in_channels = blk.out_channels = 4;
        blk.target_kernel = 3;
        blk.groups = 4;
        blk.branches.push_back(ConvBranch{w, std::nullopt, neutral_bn(4)});
        FusedConv fused = fuse_block(blk);
        CHECK(fused.weight == w);
    }
    SUBCASE("RepCPE-shaped block with zero weights and neutral bn fuses to the identity kernel") {
        const int c = 4;
        BranchedConvBlock blk;
        blk.in_channels = blk.out_channels = c;
        blk.target_kernel = 3;
        blk.groups = c;
        blk.branches.push_back(ConvBranch{Tensor({c, 1, 3, 3}), std::nullopt, neutral_bn(c)});
        blk.identity_bn = neutral_bn(c);
        FusedConv fused = fuse_block(blk);
        CHECK(fused.weight == identity_to_kernel(c, c, 3));
        for (int i = 0; i < c; ++i) CHECK(fused.bias.at(i) == 0.0f);
    }
    SUBCASE("K=2 depthwise block with 1x1, identity and layer scale") {
        BranchedConvBlock blk = random_block(8, 8, 3, 1, 8, {3, 3, 1}, true, true, 82);
        FusedConv fused = fuse_block(blk);
        float worst = 0.0f;
        for (int t = 0; t < 100; ++t) {
            Tensor x = random_uniform({1, 8, 16, 16}, 8000 + t);
            worst = std::max(worst, max_abs_diff(blk.forward(x), fused.forward(x)));
        }
        CHECK(worst <= 1e-4f);
    }
    SUBCASE("fused parameter count is below the branched count") {
        BranchedConvBlock blk = random_block(8, 8, 3, 1, 8, {3, 3, 1}, true, true, 83);
        int64_t branched_params = 0;
        for (const ConvBranch& br : blk.branches)
            branched_params += br.weight.numel() + 4 * blk.out_channels;
        branched_params += 4 * blk.out_channels + blk.out_channels;  // identity bn + layer scale
        FusedConv fused = fuse_block(blk);
        CHECK(fused.weight.numel() + fused.bias.numel() < branched_params);
    }
}

TEST_CASE("fusion exactness holds across 50 random block geometries") {
    SplitMix64 rng(4242);
    int checked = 0;
    while (checked < 50) {
        const int kt = 1 + 2 * static_cast<int>(rng.next() % 4);  // 1,3,5,7
        const bool depthwise = (rng.next() % 2) == 0;
        const int c = 2 + static_cast<int>(rng.next() % 6);
        const int in_c = depthwise ? c : 1 + static_cast<int>(rng.next() % 6);
        const int out_c = depthwise ? c : 1 + static_cast<int>(rng.next() % 6);
        const int groups = depthwise ? c : 1;
        const int strides[3] = {1, 2, 4};
        const int stride = strides[rng.next() % 3];
        std::vector<int> kernels;
        const int n_br = 1 + static_cast<int>(rng.next() % 3);
        for (int i = 0; i < n_br; ++i) {
            int k = 1 + 2 * static_cast<int>(rng.next() % ((kt + 1) / 2));
            kernels.push_back(std::min(k, kt));
        }
        const bool identity = stride == 1 && in_c == out_c && (rng.next() % 2) == 0;
        const bool layer_scale = (rng.next() % 2) == 0;
        BranchedConvBlock blk =
            random_block(in_c, out_c, kt, stride, groups, kernels, identity, layer_scale, rng.next());
        FusedConv fused = fuse_block(blk);
        const int side = stride * (2 + static_cast<int>(rng.next() % 5));
        Tensor x = random_uniform({1, in_c, side, side}, rng.next());
        CHECK(max_abs_diff(blk.forward(x), fused.forward(x)) <= 1e-4f);
        ++checked;
    }
}

TEST_CASE("stride invariance of fusion") {
    for (int stride : {1, 2, 4}) {
        BranchedConvBlock blk = random_block(3, 6, 7, stride, 1, {7, 3, 1}, false, false,
                                             900 + static_cast<uint64_t>(stride));
        FusedConv fused = fuse_block(blk);
        for (int t = 0; t < 5; ++t) {
            Tensor x = random_uniform({1, 3, 8 * stride, 8 * stride}, 950 + t);
            CHECK(max_abs_diff(blk.forward(x), fused.forward(x)) <= 1e-4f);
        }
    }
}

TEST_CASE("block validation errors") {
    SUBCASE("identity with mismatched channels") {
        BranchedConvBlock blk = random_block(3, 5, 3, 1, 1, {3}, false, false, 84);
        blk.identity_bn = neutral_bn(5);
        CHECK_THROWS_AS(blk.validate(), Error);
    }
    SUBCASE("identity with stride") {
        BranchedConvBlock blk = random_block(4, 4, 3, 2, 1, {3}, false, false, 85);
        blk.identity_bn = neutral_bn(4);
        CHECK_THROWS_AS(blk.validate(), Error);
    }
    SUBCASE("branch kernel above target") {
        BranchedConvBlock blk = random_block(3, 5, 3, 1, 1, {3}, false, false, 86);
        blk.branches[0].weight = random_uniform({5, 3, 5, 5}, 87);
        CHECK_THROWS_AS(blk.validate(), Error);
    }
}

TEST_CASE("verify_equivalence harness") {
    SUBCASE("identical callables give zero diff") {
        auto f = [](const Tensor& x) { return x; };
        EquivalenceReport r = verify_equivalence(f, f, {1, 2, 4, 4}, 3, 7);
        CHECK(r.max_abs_diff == 0.0f);
        CHECK(r.pass);
    }
    SUBCASE("a 1e-3 offset fails with max_abs_diff == 1e-3") {
        auto zero = [](const Tensor& x) { return Tensor(x.shape()); };
        auto offset = [](const Tensor& x) { return Tensor::full(x.shape(), 1e-3f); };
        EquivalenceReport r = verify_equivalence(zero, offset, {1, 1, 2, 2}, 2, 8);
        CHECK_FALSE(r.pass);
        CHECK(r.max_abs_diff == 1e-3f);
        CHECK(r.mean_abs_diff == doctest::Approx(1e-3).epsilon(1e-6));
    }
    SUBCASE("deterministic given the seed") {
        auto noisy = [](const Tensor& x) {
            Tensor y = x;
            for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] *= 1.00001f;
            return y;
        };
        auto id = [](const Tensor& x) { return x; };
        EquivalenceReport a = verify_equivalence(id, noisy, {1, 3, 5, 5}, 4, 99);
        EquivalenceReport b = verify_equivalence(id, noisy, {1, 3, 5, 5}, 4, 99);
        CHECK(a.max_abs_diff == b.max_abs_diff);
        CHECK(a.mean_abs_diff == b.mean_abs_diff);
    }
    SUBCASE("output shape mismatch is an error") {
        auto id = [](const Tensor& x) { return x; };
        auto bigger = [](const Tensor& x) { return bilinear_upsample(x, x.size(2) * 2, x.size(3) * 2); };
        CHECK_THROWS_AS(verify_equivalence(id, bigger, {1, 1, 3, 3}, 1, 1), Error);
    }
}
