#pragma once

#include <string>
#include <vector>

#include "wrf/config.hpp"
#include "wrf/ops.hpp"

namespace wrf {

// One reparameterizable conv block instance in the architecture.
struct RepBlockDesc {
    std::string prefix;
    int in_channels = 0;
    int out_channels = 0;
    int target_kernel = 1;
    int stride = 1;
    int groups = 1;
    std::vector<int> branch_kernels;  // conv branches, fixed order
    bool identity = false;
    bool layer_scale = false;
};

// Single-path conv present identically in both modes (weight + bias).
struct PlainConvDesc {
    std::string name;
    ConvSpec spec;
};

struct LinearDesc {
    std::string name;
    int in_features = 0;
    int out_features = 0;
};

struct NormDesc {  // layernorm gamma/beta pair
    std::string name;
    int dim = 0;
};

struct ModelDesc {
    std::vector<RepBlockDesc> rep_blocks;
    std::vector<PlainConvDesc> convs;
    std::vector<LinearDesc> linears;
    std::vector<NormDesc> norms;

    const RepBlockDesc* find_rep(const std::string& prefix) const;
};

ModelDesc describe_model(const RunConfig& config);

enum class ParamInit {
    conv_weight,
    linear_weight,
    zero_bias,
    bn_gamma,
    bn_beta,
    bn_mean,
    bn_var,
    ln_gamma,
    ln_beta,
    layer_scale,
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    ParamInit init = ParamInit::zero_bias;
    int fan_in = 0;  // for Kaiming-uniform bounds
};

// Every tensor record of the model for the given mode, in a fixed order.
std::vector<ParamSpec> parameter_manifest(const RunConfig& config, Mode mode);

// Records a branched-mode rep block contributes (they are replaced by
// <prefix>.weight / <prefix>.bias when fusing).
std::vector<ParamSpec> rep_block_branched_params(const RepBlockDesc& block, float layer_scale_init);

}  // namespace wrf
