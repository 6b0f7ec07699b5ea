#pragma once

#include <vector>

#include "wrf/tensor.hpp"

namespace wrf {

// Geometry of one convolution. Same-grid convolutions in this model use
// padding == (k-1)/2 with odd k; the attention reduction conv uses
// kernel == stride == sr with zero padding (sr may be even).
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

// Output side length: floor((in + 2p - k)/s) + 1.
int conv_out_dim(int in, int kernel, int stride, int padding);

enum class Act { gelu, relu, sigmoid };

// Direct cross-correlation (no kernel flip). Accumulation order per output
// element is fixed as (input channel, kernel row, kernel col) so parallel
// and serial runs are bit-identical.
// x: (N, in, H, W); weight: (out, in/groups, k, k); bias: (out) or null.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvSpec& spec);

// Inference-mode batchnorm with stored statistics.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const Tensor& mean, const Tensor& var, float eps = 1e-5f);

// Elementwise activation. GELU is the exact-erf form 0.5*x*(1+erf(x/sqrt(2))).
Tensor activation(const Tensor& x, Act kind);

// (N,C,H,W) -> (N,C,1,1) per-channel spatial mean.
Tensor global_avg_pool(const Tensor& x);

// Bilinear interpolation with half-pixel centers (align_corners=false).
// bilinear_upsample enforces out >= in; bilinear_resize also downscales.
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

// Per-row normalization of a (rows, dim) token matrix.
Tensor layernorm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

Tensor matmul(const Tensor& a, const Tensor& b);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& a);

// Concatenate (N,C_i,H,W) maps along the channel axis, in argument order.
Tensor concat_channels(const std::vector<const Tensor*>& parts);

// rows x in  @  weight(out, in)^T  + bias(out). Token-space linear layer.
Tensor linear(const Tensor& rows, const Tensor& weight, const Tensor& bias);

Tensor transpose(const Tensor& m);

// (N,C,H,W) <-> (N*H*W, C) token layout used by the transformer stages.
Tensor map_to_tokens(const Tensor& x);
Tensor tokens_to_map(const Tensor& tokens, int n, int c, int h, int w);

Tensor add(const Tensor& a, const Tensor& b);

}  // namespace wrf
