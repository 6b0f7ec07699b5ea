#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "wrf/ops.hpp"
#include "wrf/tensor.hpp"

namespace wrf {

struct BatchNormParams {
    Tensor gamma, beta, mean, var;
    float eps = 1e-5f;
};

// One training-time branch: conv (optional bias) followed by its own BN.
struct ConvBranch {
    Tensor weight;               // (out, in/groups, k_b, k_b)
    std::optional<Tensor> bias;  // usually absent; BN supplies the shift
    BatchNormParams bn;
};

// Training-time multi-branch convolution block. Branched forward computes
//   layer_scale ⊙ ( Σ_b bn_b(conv_b(x)) + bn_id(x) )
// and fuse() collapses it into a single conv with identical output.
struct BranchedConvBlock {
    std::vector<ConvBranch> branches;
    std::optional<BatchNormParams> identity_bn;  // only when in==out, stride 1
    std::optional<Tensor> layer_scale;           // per-output-channel
    int in_channels = 0;
    int out_channels = 0;
    int target_kernel = 1;  // k_t, odd; every branch kernel <= k_t
    int stride = 1;
    int groups = 1;

    int padding() const { return (target_kernel - 1) / 2; }
    void validate() const;
    Tensor forward(const Tensor& x) const;  // training-graph semantics
};

// Deployment-time single-path convolution, padding (k-1)/2.
struct FusedConv {
    Tensor weight;  // (out, in/groups, k_t, k_t)
    Tensor bias;    // (out)
    int stride = 1;
    int padding = 0;
    int groups = 1;

    Tensor forward(const Tensor& x) const;
};

// Absorb inference-mode BN statistics into conv weight/bias:
//   scale = gamma / sqrt(var + eps)
//   w'[o] = w[o] * scale[o];  b'[o] = (b[o] - mean[o]) * scale[o] + beta[o]
std::pair<Tensor, Tensor> fuse_conv_bn(const Tensor& weight, const Tensor* bias,
                                       const BatchNormParams& bn);

// Zero-pad a k_s x k_s kernel to k_t x k_t, source copied at the center.
Tensor embed_kernel(const Tensor& weight, int target_kernel);

// Kernel that reproduces the identity map under padding (k-1)/2, stride 1.
Tensor identity_to_kernel(int channels, int groups, int target_kernel);

// Per-output-channel multiplier folded into weight and bias.
std::pair<Tensor, Tensor> fold_layer_scale(const Tensor& weight, const Tensor& bias,
                                           const Tensor& gamma_ls);

// Collapse the whole block. Branch order is fixed so fusion is deterministic.
FusedConv fuse_block(const BranchedConvBlock& block);

struct EquivalenceReport {
    float max_abs_diff = 0.0f;
    float mean_abs_diff = 0.0f;
    float tolerance = 1e-4f;
    bool pass = false;
};

// Drive both callables with the same random inputs (U(-1,1), seeded) and
// compare outputs. pass iff max_abs_diff <= tolerance over all trials.
EquivalenceReport verify_equivalence(const std::function<Tensor(const Tensor&)>& branched_forward,
                                     const std::function<Tensor(const Tensor&)>& fused_forward,
                                     const std::vector<int>& input_shape, int trials, uint64_t seed,
                                     float tolerance = 1e-4f);

// Random input tensor with entries ~ U(-1,1); shared by tests and verify.
Tensor random_uniform(const std::vector<int>& shape, uint64_t seed);

}  // namespace wrf
