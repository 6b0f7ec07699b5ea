#include "wrf/complexity.hpp"

#include <iomanip>
#include <sstream>

#include "wrf/model_desc.hpp"

namespace wrf {

int64_t count_params(const RunConfig& config, Mode mode) {
    int64_t total = 0;
    for (const ParamSpec& spec : parameter_manifest(config, mode)) {
        int64_t n = 1;
        for (int d : spec.shape) n *= d;
        total += n;
    }
    return total;
}

namespace {

int64_t conv_macs(int64_t out_h, int64_t out_w, int64_t out_c, int64_t in_c, int64_t k, int64_t groups) {
    return out_h * out_w * out_c * (k * k * in_c / groups);
}

}  // namespace

int64_t conv_flop_count(const ConvSpec& spec, int64_t out_h, int64_t out_w) {
    return conv_macs(out_h, out_w, spec.out_channels, spec.in_channels, spec.kernel, spec.groups);
}

ComplexityReport count_flops(const RunConfig& config, int batch, int height, int width, Mode mode) {
    config.validate();
    if (height % 32 || width % 32) throw Error("count_flops: input size must be divisible by 32");
    const ModelConfig& m = config.model;
    const bool branched = mode == Mode::branched;

    ComplexityReport rep;
    rep.mode = mode;
    rep.batch = batch;
    rep.input_h = height;
    rep.input_w = width;

    // one rep block instance evaluated on an out_h x out_w grid
    auto rep_block_macs = [&](int in_c, int out_c, int kt, const std::vector<int>& kernels, int groups,
                              int64_t out_h, int64_t out_w) -> int64_t {
        int64_t total = 0;
        if (branched) {
            for (int kb : kernels) total += conv_macs(out_h, out_w, out_c, in_c, kb, groups);
        } else {
            total = conv_macs(out_h, out_w, out_c, in_c, kt, groups);
        }
        return total;
    };

    int in_c = 3;
    int64_t side_h = height, side_w = width;
    int64_t stage_h[4], stage_w[4];
    for (int i = 0; i < 4; ++i) {
        const int dim = m.embed_dims[i];
        const int p = m.patch_kernels[i];
        side_h /= m.patch_strides[i];
        side_w /= m.patch_strides[i];
        stage_h[i] = side_h;
        stage_w[i] = side_w;
        const int64_t n_tok = side_h * side_w;

        if (m.rep_patch_embed)
            rep.conv_flops += rep_block_macs(in_c, dim, p, {p, 3, 1}, 1, side_h, side_w);
        else
            rep.conv_flops += conv_macs(side_h, side_w, dim, in_c, p, 1);

        if (m.cpe_stages[i])
            rep.conv_flops += rep_block_macs(dim, dim, 3, {3}, dim, side_h, side_w);

        const int r = m.sr_ratios[i];
        const int64_t m_tok = (side_h / r) * (side_w / r);
        const int hidden = dim * m.mlp_ratios[i];
        for (int b = 0; b < m.depths[i]; ++b) {
            rep.linear_flops += n_tok * dim * dim;                      // q
            rep.conv_flops += conv_macs(side_h / r, side_w / r, dim, dim, r, 1);  // sr
            rep.linear_flops += 2 * m_tok * dim * dim;                  // k, v
            rep.attn_flops += 2 * n_tok * m_tok * dim;                  // q·kᵀ, attn·v
            rep.linear_flops += n_tok * dim * dim;                      // out proj
            rep.linear_flops += n_tok * dim * hidden;                   // fc1
            if (m.rep_mix_ffn) {
                std::vector<int> kernels(static_cast<size_t>(m.branch_count), 3);
                kernels.push_back(1);
                rep.conv_flops += rep_block_macs(hidden, hidden, 3, kernels, hidden, side_h, side_w);
            } else {
                rep.conv_flops += conv_macs(side_h, side_w, hidden, hidden, 3, hidden);
            }
            rep.linear_flops += n_tok * hidden * dim;  // fc2
        }
        in_c = dim;
    }

    // decoder
    const int fc = config.decoder.fusion_channels;
    const int d4 = m.embed_dims[3];
    std::vector<int> ones(static_cast<size_t>(m.branch_count), 1);
    auto rep1x1 = [&](int in_channels, int out_channels, int64_t oh, int64_t ow) {
        rep.conv_flops += rep_block_macs(in_channels, out_channels, 1, ones, 1, oh, ow);
    };
    // the gate conv acts on the pooled 1x1 map: it is a matrix-vector product
    // and lands under linear_flops, keeping conv_flops proportional to H*W
    rep.linear_flops += static_cast<int64_t>(branched ? m.branch_count : 1) * d4 * fc;
    rep1x1(d4, fc, stage_h[3], stage_w[3]);        // project F4
    const int lat_dims[3] = {m.embed_dims[2], m.embed_dims[1], m.embed_dims[0]};
    for (int i = 0; i < 3; ++i) {
        const int64_t lh = stage_h[2 - i], lw = stage_w[2 - i];
        rep1x1(lat_dims[i], fc, lh, lw);
        rep1x1(2 * fc, fc, lh, lw);
    }
    rep.conv_flops += conv_macs(stage_h[0], stage_w[0], m.num_seg_classes, fc, 1, 1);  // classifier

    // classification head
    if (m.rep_cls_head) {
        std::vector<int> kernels(static_cast<size_t>(m.branch_count), 3);
        kernels.push_back(1);
        rep.conv_flops += rep_block_macs(d4, d4, 3, kernels, d4, stage_h[3], stage_w[3]);
        if (m.use_se) {
            const int red = d4 / 4;
            rep.linear_flops += static_cast<int64_t>(d4) * red + static_cast<int64_t>(red) * d4;
        }
    }
    rep.linear_flops += static_cast<int64_t>(d4) * m.cls_hidden;
    rep.linear_flops += static_cast<int64_t>(m.cls_hidden) * m.num_cls_classes;

    rep.conv_flops *= batch;
    rep.linear_flops *= batch;
    rep.attn_flops *= batch;
    rep.flops = rep.conv_flops + rep.linear_flops + rep.attn_flops;
    rep.params = count_params(config, mode);
    return rep;
}

std::string ComplexityReport::to_text() const {
    std::ostringstream os;
    os << "mode=" << mode_name(mode) << "\n";
    os << "params=" << params << "\n";
    os << "flops=" << flops << "\n";
    os << "conv_flops=" << conv_flops << "\n";
    os << "linear_flops=" << linear_flops << "\n";
    os << "attn_flops=" << attn_flops << "\n";
    os << std::fixed << std::setprecision(3);
    os << "params_m=" << static_cast<double>(params) / 1e6 << "\n";
    os << "gflops=" << static_cast<double>(flops) / 1e9 << "\n";
    os << "input=" << batch << "x3x" << input_h << "x" << input_w << "\n";
    os << "convention=1 MAC = 1 FLOP; elementwise and normalization ops excluded\n";
    return os.str();
}

std::string ComplexityReport::to_json() const {
    std::ostringstream os;
    os << "{\n"
       << "  \"mode\": \"" << mode_name(mode) << "\",\n"
       << "  \"params\": " << params << ",\n"
       << "  \"flops\": " << flops << ",\n"
       << "  \"conv_flops\": " << conv_flops << ",\n"
       << "  \"linear_flops\": " << linear_flops << ",\n"
       << "  \"attn_flops\": " << attn_flops << ",\n"
       << "  \"input\": [" << batch << ", 3, " << input_h << ", " << input_w << "],\n"
       << "  \"convention\": \"1 MAC = 1 FLOP; elementwise and normalization ops excluded\"\n"
       << "}\n";
    return os.str();
}

}  // namespace wrf
