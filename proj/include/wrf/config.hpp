#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "wrf/tensor.hpp"

namespace wrf {

enum class Mode : uint32_t { branched = 0, fused = 1 };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

// Architecture hyperparameters. Defaults are the selected configuration:
// K=2, CPE in stages 3-4, patch kernels (7,3,3,3), no SE.
struct ModelConfig {
    std::array<int, 4> embed_dims{32, 64, 160, 256};
    std::array<int, 4> depths{2, 2, 2, 2};
    std::array<int, 4> heads{1, 2, 5, 8};
    std::array<int, 4> mlp_ratios{4, 4, 4, 4};
    std::array<int, 4> sr_ratios{8, 4, 2, 1};
    std::array<int, 4> patch_kernels{7, 3, 3, 3};
    std::array<int, 4> patch_strides{4, 2, 2, 2};
    std::array<bool, 4> cpe_stages{false, false, true, true};
    int branch_count = 2;  // K: training-time parallel branches in Rep blocks
    bool use_se = false;
    bool rep_patch_embed = true;  // false: plain single-path patch conv
    bool rep_mix_ffn = true;      // false: plain depthwise conv in the FFN
    bool rep_cls_head = true;     // false: plain pool->MLP head, no refinement
    float lambda_cls = 0.5f;
    int num_seg_classes = 2;
    int num_cls_classes = 2;
    int cls_hidden = 256;
    float layer_scale_init = 1e-5f;
    float head_dropout = 0.5f;  // training-time rate; identity at inference
};

struct DecoderConfig {
    int fusion_channels = 128;
};

struct RunConfig {
    ModelConfig model;
    DecoderConfig decoder;
    uint64_t seed = 0;
    int input_size = 512;
    std::string weights_path;  // optional default for CLI subcommands

    void validate() const;
};

RunConfig default_run_config();

// JSON round-trip; unknown keys are rejected on load.
std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace wrf
