#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "wrf/config.hpp"
#include "wrf/model_desc.hpp"
#include "wrf/reparam.hpp"
#include "wrf/weights.hpp"

namespace wrf {

struct FeaturePyramid {
    Tensor f1, f2, f3, f4;  // (N, dims[i], H/4..H/32, W/4..W/32)
};

struct PredictionBundle {
    Tensor seg_logits;  // (N, num_seg_classes, H, W) at input resolution
    Tensor cls_logits;  // (N, num_cls_classes)
};

// Optional instrumentation: attention row-sum drift across all layers.
struct AttnStats {
    double max_rowsum_err = 0.0;
    int64_t rows_checked = 0;
};

// A reparameterizable conv bound to weights in one mode.
class RepUnit {
public:
    RepUnit() = default;
    explicit RepUnit(BranchedConvBlock block) : impl_(std::move(block)) {}
    explicit RepUnit(FusedConv conv) : impl_(std::move(conv)) {}

    Tensor forward(const Tensor& x) const;
    bool branched() const { return std::holds_alternative<BranchedConvBlock>(impl_); }
    const BranchedConvBlock& block() const { return std::get<BranchedConvBlock>(impl_); }
    const FusedConv& fused() const { return std::get<FusedConv>(impl_); }

private:
    std::variant<std::monostate, BranchedConvBlock, FusedConv> impl_;
};

RepUnit bind_rep_unit(const WeightContainer& weights, const RepBlockDesc& desc);

struct LayerNormW {
    Tensor gamma, beta;
};

struct LinearW {
    Tensor weight_t;  // stored (out,in), kept transposed for row-major matmul
    Tensor bias;
    Tensor apply(const Tensor& tokens) const;
};

struct AttentionWeights {
    LinearW q, k, v, proj;
    FusedConv sr;  // kernel == stride == sr_ratio, no padding
    LayerNormW sr_ln;
    int heads = 1;
};

// Scaled dot-product attention over (h*w, dim) tokens; keys/values come from
// the sr-reduced, layernormed map. scale = 1/sqrt(dim/heads).
Tensor efficient_self_attention(const AttentionWeights& w, const Tensor& tokens, int h, int w_,
                                AttnStats* stats = nullptr);

// The full network bound to one weight container (branched or fused mode).
class Model {
public:
    Model(RunConfig config, const WeightContainer& weights);

    Mode mode() const { return mode_; }
    const RunConfig& config() const { return config_; }
    const ModelDesc& desc() const { return desc_; }

    FeaturePyramid backbone_forward(const Tensor& image, AttnStats* stats = nullptr) const;
    Tensor decode_segmentation(const FeaturePyramid& pyramid, int out_h, int out_w) const;
    Tensor classify(const Tensor& f4) const;
    PredictionBundle forward(const Tensor& image, AttnStats* stats = nullptr) const;

private:
    struct Block {
        LayerNormW ln1, ln2;
        AttentionWeights attn;
        LinearW fc1, fc2;
        RepUnit dw;
    };
    struct Stage {
        RepUnit patch;
        LayerNormW patch_ln;
        std::optional<RepUnit> cpe;
        std::vector<Block> blocks;
        int dim = 0;
        int stride = 1;
    };
    struct Decoder {
        RepUnit gate_conv, gate_proj;
        RepUnit lat[3], fuse[3];  // index 0 -> F3 level, 2 -> F1 level
        FusedConv classifier;
    };
    struct ClsHead {
        std::optional<RepUnit> refine;
        bool use_se = false;
        LinearW se_fc1, se_fc2;
        LinearW fc1, fc2;
    };

    Tensor stage_tokens_forward(const Stage& stage, const Tensor& map, AttnStats* stats) const;
    Tensor mix_ffn(const Block& blk, const Tensor& tokens, int h, int w) const;

    RunConfig config_;
    ModelDesc desc_;
    Mode mode_ = Mode::branched;
    Stage stages_[4];
    Decoder decoder_;
    ClsHead cls_;
};

// Ground-truth class indices for one batch of masks, row-major (n, h, w).
struct SegLabels {
    int n = 0, h = 0, w = 0;
    std::vector<uint8_t> v;
    uint8_t at(int bi, int y, int x) const { return v[(static_cast<size_t>(bi) * h + y) * w + x]; }
};

struct LossBreakdown {
    double total = 0.0, seg = 0.0, cls = 0.0;
};

// L = L_seg + lambda * L_cls; both terms are mean softmax cross-entropy.
LossBreakdown multi_task_loss(const PredictionBundle& pred, const SegLabels& seg_gt,
                              const std::vector<uint8_t>& cls_gt, float lambda);

// x * sigmoid(W2 relu(W1 GAP(x))), broadcast per channel.
Tensor se_gate(const Tensor& x, const LinearW& fc1, const LinearW& fc2);

}  // namespace wrf
