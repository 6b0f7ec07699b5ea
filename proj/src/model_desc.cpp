#include "wrf/model_desc.hpp"

namespace wrf {

const RepBlockDesc* ModelDesc::find_rep(const std::string& prefix) const {
    for (const RepBlockDesc& b : rep_blocks)
        if (b.prefix == prefix) return &b;
    return nullptr;
}

ModelDesc describe_model(const RunConfig& config) {
    config.validate();
    const ModelConfig& m = config.model;
    ModelDesc d;

    auto stage_name = [](int i) { return "backbone.s" + std::to_string(i + 1); };

    int in_c = 3;
    for (int i = 0; i < 4; ++i) {
        const std::string sn = stage_name(i);
        const int dim = m.embed_dims[i];
        const int p = m.patch_kernels[i];

        // RepPatchEmbed: branches (p, 3, 1) at the stage stride; stages with
        // p == 3 keep two coincident 3x3 branches, as listed.
        if (m.rep_patch_embed) {
            d.rep_blocks.push_back(RepBlockDesc{sn + ".patch", in_c, dim, p, m.patch_strides[i], 1,
                                                {p, 3, 1}, false, false});
        } else {
            d.convs.push_back(PlainConvDesc{sn + ".patch", ConvSpec{in_c, dim, p, m.patch_strides[i],
                                                                    (p - 1) / 2, 1}});
        }
        d.norms.push_back(NormDesc{sn + ".patch.ln", dim});

        // RepCPE: depthwise 3x3 branch plus identity
        if (m.cpe_stages[i])
            d.rep_blocks.push_back(RepBlockDesc{sn + ".cpe", dim, dim, 3, 1, dim, {3}, true, false});

        const int hidden = dim * m.mlp_ratios[i];
        for (int b = 0; b < m.depths[i]; ++b) {
            const std::string bn = sn + ".blk" + std::to_string(b);
            d.norms.push_back(NormDesc{bn + ".ln1", dim});
            d.linears.push_back(LinearDesc{bn + ".attn.q", dim, dim});
            d.linears.push_back(LinearDesc{bn + ".attn.k", dim, dim});
            d.linears.push_back(LinearDesc{bn + ".attn.v", dim, dim});
            d.linears.push_back(LinearDesc{bn + ".attn.proj", dim, dim});
            const int r = m.sr_ratios[i];
            d.convs.push_back(PlainConvDesc{bn + ".attn.sr", ConvSpec{dim, dim, r, r, 0, 1}});
            d.norms.push_back(NormDesc{bn + ".attn.sr_ln", dim});
            d.norms.push_back(NormDesc{bn + ".ln2", dim});
            d.linears.push_back(LinearDesc{bn + ".ffn.fc1", dim, hidden});
            // RepMixFFN depthwise block: K x 3x3 + 1x1 + identity, layer scale
            if (m.rep_mix_ffn) {
                std::vector<int> kernels(static_cast<size_t>(m.branch_count), 3);
                kernels.push_back(1);
                d.rep_blocks.push_back(
                    RepBlockDesc{bn + ".ffn.dw", hidden, hidden, 3, 1, hidden, kernels, true, true});
            } else {
                d.convs.push_back(PlainConvDesc{bn + ".ffn.dw", ConvSpec{hidden, hidden, 3, 1, 1, hidden}});
            }
            d.linears.push_back(LinearDesc{bn + ".ffn.fc2", hidden, dim});
        }
        in_c = dim;
    }

    // RepLR-ASPP decoder: every conv is a RepConv1x1 (K 1x1 branches with
    // layer scale, no identity) except the final classifier.
    const int fc = config.decoder.fusion_channels;
    const int d4 = m.embed_dims[3];
    auto rep1x1 = [&](const std::string& prefix, int in_channels, int out_channels) {
        d.rep_blocks.push_back(RepBlockDesc{prefix, in_channels, out_channels, 1, 1, 1,
                                            std::vector<int>(static_cast<size_t>(m.branch_count), 1),
                                            false, true});
    };
    rep1x1("decoder.gate.conv", d4, fc);
    rep1x1("decoder.gate.proj", d4, fc);
    rep1x1("decoder.lat3", m.embed_dims[2], fc);
    rep1x1("decoder.fuse3", 2 * fc, fc);
    rep1x1("decoder.lat2", m.embed_dims[1], fc);
    rep1x1("decoder.fuse2", 2 * fc, fc);
    rep1x1("decoder.lat1", m.embed_dims[0], fc);
    rep1x1("decoder.fuse1", 2 * fc, fc);
    d.convs.push_back(PlainConvDesc{"decoder.classifier", ConvSpec{fc, m.num_seg_classes, 1, 1, 0, 1}});

    // RepClsHead
    if (m.rep_cls_head) {
        std::vector<int> kernels(static_cast<size_t>(m.branch_count), 3);
        kernels.push_back(1);
        d.rep_blocks.push_back(RepBlockDesc{"cls.refine", d4, d4, 3, 1, d4, kernels, true, true});
        if (m.use_se) {
            const int red = d4 / 4;
            if (d4 % 4) throw Error("config: SE requires stage-4 dim divisible by 4");
            d.linears.push_back(LinearDesc{"cls.se.fc1", d4, red});
            d.linears.push_back(LinearDesc{"cls.se.fc2", red, d4});
        }
    }
    d.linears.push_back(LinearDesc{"cls.fc1", d4, m.cls_hidden});
    d.linears.push_back(LinearDesc{"cls.fc2", m.cls_hidden, m.num_cls_classes});

    return d;
}

namespace {

void push_bn(std::vector<ParamSpec>& out, const std::string& prefix, int channels) {
    out.push_back({prefix + ".gamma", {channels}, ParamInit::bn_gamma, 0});
    out.push_back({prefix + ".beta", {channels}, ParamInit::bn_beta, 0});
    out.push_back({prefix + ".mean", {channels}, ParamInit::bn_mean, 0});
    out.push_back({prefix + ".var", {channels}, ParamInit::bn_var, 0});
}

}  // namespace

std::vector<ParamSpec> rep_block_branched_params(const RepBlockDesc& b, float) {
    std::vector<ParamSpec> out;
    const int in_g = b.in_channels / b.groups;
    for (size_t i = 0; i < b.branch_kernels.size(); ++i) {
        const int k = b.branch_kernels[i];
        const std::string bp = b.prefix + ".b" + std::to_string(i);
        out.push_back({bp + ".weight", {b.out_channels, in_g, k, k}, ParamInit::conv_weight, in_g * k * k});
        push_bn(out, bp + ".bn", b.out_channels);
    }
    if (b.identity) push_bn(out, b.prefix + ".id.bn", b.out_channels);
    if (b.layer_scale)
        out.push_back({b.prefix + ".layer_scale", {b.out_channels}, ParamInit::layer_scale, 0});
    return out;
}

std::vector<ParamSpec> parameter_manifest(const RunConfig& config, Mode mode) {
    const ModelDesc d = describe_model(config);
    std::vector<ParamSpec> out;

    for (const RepBlockDesc& b : d.rep_blocks) {
        if (mode == Mode::branched) {
            auto recs = rep_block_branched_params(b, config.model.layer_scale_init);
            out.insert(out.end(), recs.begin(), recs.end());
        } else {
            const int in_g = b.in_channels / b.groups;
            out.push_back({b.prefix + ".weight",
                           {b.out_channels, in_g, b.target_kernel, b.target_kernel},
                           ParamInit::conv_weight,
                           in_g * b.target_kernel * b.target_kernel});
            out.push_back({b.prefix + ".bias", {b.out_channels}, ParamInit::zero_bias, 0});
        }
    }
    for (const PlainConvDesc& c : d.convs) {
        const int in_g = c.spec.in_channels / c.spec.groups;
        out.push_back({c.name + ".weight",
                       {c.spec.out_channels, in_g, c.spec.kernel, c.spec.kernel},
                       ParamInit::conv_weight,
                       in_g * c.spec.kernel * c.spec.kernel});
        out.push_back({c.name + ".bias", {c.spec.out_channels}, ParamInit::zero_bias, 0});
    }
    for (const LinearDesc& l : d.linears) {
        out.push_back({l.name + ".weight", {l.out_features, l.in_features}, ParamInit::linear_weight,
                       l.in_features});
        out.push_back({l.name + ".bias", {l.out_features}, ParamInit::zero_bias, 0});
    }
    for (const NormDesc& n : d.norms) {
        out.push_back({n.name + ".gamma", {n.dim}, ParamInit::ln_gamma, 0});
        out.push_back({n.name + ".beta", {n.dim}, ParamInit::ln_beta, 0});
    }
    return out;
}

}  // namespace wrf
