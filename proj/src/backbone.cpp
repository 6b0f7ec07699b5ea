#include <cmath>

#include "wrf/model.hpp"

namespace wrf {

Tensor RepUnit::forward(const Tensor& x) const {
    if (std::holds_alternative<BranchedConvBlock>(impl_)) return std::get<BranchedConvBlock>(impl_).forward(x);
    if (std::holds_alternative<FusedConv>(impl_)) return std::get<FusedConv>(impl_).forward(x);
    throw Error("RepUnit: unbound");
}

RepUnit bind_rep_unit(const WeightContainer& weights, const RepBlockDesc& desc) {
    if (weights.mode() == Mode::branched)
        return RepUnit(read_branched_block(weights, desc));
    return RepUnit(FusedConv{weights.get(desc.prefix + ".weight"), weights.get(desc.prefix + ".bias"),
                             desc.stride, (desc.target_kernel - 1) / 2, desc.groups});
}

Tensor LinearW::apply(const Tensor& tokens) const {
    Tensor y = matmul(tokens, weight_t);
    const int out_f = y.size(1);
    for (int r = 0; r < y.size(0); ++r)
        for (int j = 0; j < out_f; ++j) y.at(r, j) += bias.at(j);
    return y;
}

namespace {

LayerNormW bind_ln(const WeightContainer& w, const std::string& prefix) {
    return LayerNormW{w.get(prefix + ".gamma"), w.get(prefix + ".beta")};
}

LinearW bind_linear(const WeightContainer& w, const std::string& prefix) {
    return LinearW{transpose(w.get(prefix + ".weight")), w.get(prefix + ".bias")};
}

FusedConv bind_plain_conv(const WeightContainer& w, const std::string& prefix, const ConvSpec& spec) {
    return FusedConv{w.get(prefix + ".weight"), w.get(prefix + ".bias"), spec.stride, spec.padding,
                     spec.groups};
}

Tensor sample_view(const Tensor& x, int n) {
    Tensor s({1, x.size(1), x.size(2), x.size(3)});
    const int64_t count = s.numel();
    const float* src = x.data() + static_cast<int64_t>(n) * count;
    std::copy(src, src + count, s.data());
    return s;
}

}  // namespace

Model::Model(RunConfig config, const WeightContainer& weights)
    : config_(std::move(config)), desc_(describe_model(config_)), mode_(weights.mode()) {
    validate_container(weights, config_);
    const ModelConfig& m = config_.model;

    auto rep = [&](const std::string& prefix) {
        const RepBlockDesc* d = desc_.find_rep(prefix);
        if (!d) throw Error("model: no rep block '" + prefix + "' in this configuration");
        return bind_rep_unit(weights, *d);
    };
    auto plain = [&](const std::string& name) -> FusedConv {
        for (const PlainConvDesc& c : desc_.convs)
            if (c.name == name) return bind_plain_conv(weights, name, c.spec);
        throw Error("model: no conv '" + name + "' in this configuration");
    };

    for (int i = 0; i < 4; ++i) {
        const std::string sn = "backbone.s" + std::to_string(i + 1);
        Stage& st = stages_[i];
        st.dim = m.embed_dims[i];
        st.stride = m.patch_strides[i];
        st.patch = m.rep_patch_embed ? rep(sn + ".patch") : RepUnit(plain(sn + ".patch"));
        st.patch_ln = bind_ln(weights, sn + ".patch.ln");
        if (m.cpe_stages[i]) st.cpe = rep(sn + ".cpe");
        for (int b = 0; b < m.depths[i]; ++b) {
            const std::string bn = sn + ".blk" + std::to_string(b);
            Block blk;
            blk.ln1 = bind_ln(weights, bn + ".ln1");
            blk.ln2 = bind_ln(weights, bn + ".ln2");
            blk.attn.q = bind_linear(weights, bn + ".attn.q");
            blk.attn.k = bind_linear(weights, bn + ".attn.k");
            blk.attn.v = bind_linear(weights, bn + ".attn.v");
            blk.attn.proj = bind_linear(weights, bn + ".attn.proj");
            blk.attn.sr = plain(bn + ".attn.sr");
            blk.attn.sr_ln = bind_ln(weights, bn + ".attn.sr_ln");
            blk.attn.heads = m.heads[i];
            blk.fc1 = bind_linear(weights, bn + ".ffn.fc1");
            blk.fc2 = bind_linear(weights, bn + ".ffn.fc2");
            blk.dw = m.rep_mix_ffn ? rep(bn + ".ffn.dw") : RepUnit(plain(bn + ".ffn.dw"));
            st.blocks.push_back(std::move(blk));
        }
    }

    decoder_.gate_conv = rep("decoder.gate.conv");
    decoder_.gate_proj = rep("decoder.gate.proj");
    const char* lat_names[3] = {"decoder.lat3", "decoder.lat2", "decoder.lat1"};
    const char* fuse_names[3] = {"decoder.fuse3", "decoder.fuse2", "decoder.fuse1"};
    for (int i = 0; i < 3; ++i) {
        decoder_.lat[i] = rep(lat_names[i]);
        decoder_.fuse[i] = rep(fuse_names[i]);
    }
    decoder_.classifier = plain("decoder.classifier");

    if (m.rep_cls_head) {
        cls_.refine = rep("cls.refine");
        cls_.use_se = m.use_se;
        if (m.use_se) {
            cls_.se_fc1 = bind_linear(weights, "cls.se.fc1");
            cls_.se_fc2 = bind_linear(weights, "cls.se.fc2");
        }
    }
    cls_.fc1 = bind_linear(weights, "cls.fc1");
    cls_.fc2 = bind_linear(weights, "cls.fc2");
}

Tensor efficient_self_attention(const AttentionWeights& w, const Tensor& tokens, int h, int w_,
                                AttnStats* stats) {
    if (tokens.rank() != 2 || tokens.size(0) != h * w_)
        throw Error("attention: token shape " + shape_str(tokens.shape()) + " does not match map " +
                    std::to_string(h) + "x" + std::to_string(w_));
    const int n_tok = tokens.size(0);
    const int dim = tokens.size(1);
    if (dim % w.heads) throw Error("attention: dim " + std::to_string(dim) + " not divisible by heads");
    const int dh = dim / w.heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    Tensor q = w.q.apply(tokens);

    // keys/values from the spatially reduced map
    Tensor reduced = w.sr.forward(tokens_to_map(tokens, 1, dim, h, w_));
    Tensor rtok = map_to_tokens(reduced);
    rtok = layernorm(rtok, w.sr_ln.gamma, w.sr_ln.beta);
    Tensor k = w.k.apply(rtok);
    Tensor v = w.v.apply(rtok);
    const int m_tok = k.size(0);

    Tensor out({n_tok, dim});
    Tensor qh({n_tok, dh}), kh({m_tok, dh}), vh({m_tok, dh});
    for (int head = 0; head < w.heads; ++head) {
        const int off = head * dh;
        for (int r = 0; r < n_tok; ++r)
            for (int c = 0; c < dh; ++c) qh.at(r, c) = q.at(r, off + c) * scale;
        for (int r = 0; r < m_tok; ++r)
            for (int c = 0; c < dh; ++c) {
                kh.at(r, c) = k.at(r, off + c);
                vh.at(r, c) = v.at(r, off + c);
            }
        Tensor attn = softmax_rows(matmul(qh, transpose(kh)));
        if (stats) {
            for (int r = 0; r < attn.size(0); ++r) {
                double s = 0.0;
                for (int c = 0; c < attn.size(1); ++c) s += attn.at(r, c);
                stats->max_rowsum_err = std::max(stats->max_rowsum_err, std::fabs(s - 1.0));
            }
            stats->rows_checked += attn.size(0);
        }
        Tensor oh = matmul(attn, vh);
        for (int r = 0; r < n_tok; ++r)
            for (int c = 0; c < dh; ++c) out.at(r, off + c) = oh.at(r, c);
    }
    return w.proj.apply(out);
}

Tensor Model::mix_ffn(const Block& blk, const Tensor& tokens, int h, int w) const {
    Tensor x = blk.fc1.apply(tokens);
    const int hidden = x.size(1);
    x = blk.dw.forward(tokens_to_map(x, 1, hidden, h, w));
    x = map_to_tokens(x);
    x = activation(x, Act::gelu);
    return blk.fc2.apply(x);
}

Tensor Model::stage_tokens_forward(const Stage& stage, const Tensor& map, AttnStats* stats) const {
    // patch embed: conv branches then token layernorm
    Tensor x = stage.patch.forward(map);
    const int n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
    Tensor tok = map_to_tokens(x);
    tok = layernorm(tok, stage.patch_ln.gamma, stage.patch_ln.beta);
    x = tokens_to_map(tok, n, c, h, w);

    if (stage.cpe) x = stage.cpe->forward(x);

    // transformer blocks run per sample; attention must not mix the batch
    Tensor out({n, c, h, w});
    for (int bi = 0; bi < n; ++bi) {
        Tensor sample = sample_view(x, bi);
        Tensor t = map_to_tokens(sample);
        for (const Block& blk : stage.blocks) {
            Tensor a = efficient_self_attention(blk.attn, layernorm(t, blk.ln1.gamma, blk.ln1.beta), h, w,
                                                stats);
            t = add(t, a);
            Tensor f = mix_ffn(blk, layernorm(t, blk.ln2.gamma, blk.ln2.beta), h, w);
            t = add(t, f);
        }
        Tensor sm = tokens_to_map(t, 1, c, h, w);
        std::copy(sm.data(), sm.data() + sm.numel(), out.data() + static_cast<int64_t>(bi) * sm.numel());
    }
    return out;
}

FeaturePyramid Model::backbone_forward(const Tensor& image, AttnStats* stats) const {
    if (image.rank() != 4 || image.size(1) != 3)
        throw Error("backbone: expected (N,3,H,W) input, got " + shape_str(image.shape()));
    if (image.size(2) % 32 || image.size(3) % 32)
        throw Error("backbone: input size " + std::to_string(image.size(2)) + "x" +
                    std::to_string(image.size(3)) + " not divisible by 32");
    int side_h = image.size(2), side_w = image.size(3);
    for (int i = 0; i < 4; ++i) {
        side_h /= config_.model.patch_strides[i];
        side_w /= config_.model.patch_strides[i];
        if (side_h % config_.model.sr_ratios[i] || side_w % config_.model.sr_ratios[i])
            throw Error("backbone: sr ratio " + std::to_string(config_.model.sr_ratios[i]) +
                        " does not divide stage " + std::to_string(i + 1) + " map " +
                        std::to_string(side_h) + "x" + std::to_string(side_w));
    }

    FeaturePyramid pyr;
    Tensor x = stage_tokens_forward(stages_[0], image, stats);
    pyr.f1 = x;
    x = stage_tokens_forward(stages_[1], x, stats);
    pyr.f2 = x;
    x = stage_tokens_forward(stages_[2], x, stats);
    pyr.f3 = x;
    x = stage_tokens_forward(stages_[3], x, stats);
    pyr.f4 = std::move(x);
    return pyr;
}

PredictionBundle Model::forward(const Tensor& image, AttnStats* stats) const {
    FeaturePyramid pyr = backbone_forward(image, stats);
    PredictionBundle out;
    out.seg_logits = decode_segmentation(pyr, image.size(2), image.size(3));
    out.cls_logits = classify(pyr.f4);
    return out;
}

}  // namespace wrf
