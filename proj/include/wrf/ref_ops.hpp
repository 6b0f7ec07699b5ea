#pragma once

#include "wrf/ops.hpp"
#include "wrf/tensor.hpp"

// Serial reference kernels. Straight-line loops, no OpenMP, double
// accumulation, and a different reduction order than wrf::* so they can
// serve as independent oracles. Also the baseline side of kernel_bench.
namespace wrf::ref {

// Five nested loops per output element, kernel-position-major reduction.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const ConvSpec& spec);

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const Tensor& mean, const Tensor& var, float eps = 1e-5f);

Tensor global_avg_pool(const Tensor& x);

// Per-pixel coordinate-formula evaluation in double precision.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

Tensor layernorm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax_rows(const Tensor& a);

double gelu(double x);
double sigmoid(double x);

}  // namespace wrf::ref
