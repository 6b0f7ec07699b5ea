#include <cmath>

#include "wrf/model.hpp"

namespace wrf {

namespace {

// out[n,c,h,w] = x[n,c,h,w] * gate[n,c,0,0]
Tensor broadcast_mul(const Tensor& x, const Tensor& gate) {
    Tensor y(x.shape());
    const int64_t plane = static_cast<int64_t>(x.size(2)) * x.size(3);
    for (int n = 0; n < x.size(0); ++n)
        for (int c = 0; c < x.size(1); ++c) {
            const float g = gate.at(n, c, 0, 0);
            const float* src = x.data() + (static_cast<int64_t>(n) * x.size(1) + c) * plane;
            float* dst = y.data() + (static_cast<int64_t>(n) * x.size(1) + c) * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * g;
        }
    return y;
}

}  // namespace

Tensor Model::decode_segmentation(const FeaturePyramid& pyramid, int out_h, int out_w) const {
    // global context gate on F4
    Tensor pooled = global_avg_pool(pyramid.f4);
    Tensor gate = activation(decoder_.gate_conv.forward(pooled), Act::sigmoid);
    Tensor x = broadcast_mul(decoder_.gate_proj.forward(pyramid.f4), gate);

    const Tensor* laterals[3] = {&pyramid.f3, &pyramid.f2, &pyramid.f1};
    for (int i = 0; i < 3; ++i) {
        const Tensor& skip = *laterals[i];
        x = bilinear_upsample(x, skip.size(2), skip.size(3));
        Tensor lat = decoder_.lat[i].forward(skip);
        Tensor cat = concat_channels({&x, &lat});
        x = decoder_.fuse[i].forward(cat);
    }
    Tensor logits = decoder_.classifier.forward(x);
    return bilinear_upsample(logits, out_h, out_w);
}

Tensor se_gate(const Tensor& x, const LinearW& fc1, const LinearW& fc2) {
    const int n = x.size(0), c = x.size(1);
    if (c % fc1.weight_t.size(0) != 0 && fc1.weight_t.size(0) != c)
        throw Error("se_gate: channel count incompatible with reduction weights");
    Tensor pooled = global_avg_pool(x);
    Tensor vec({n, c});
    for (int bi = 0; bi < n; ++bi)
        for (int ch = 0; ch < c; ++ch) vec.at(bi, ch) = pooled.at(bi, ch, 0, 0);
    Tensor h = activation(fc1.apply(vec), Act::relu);
    Tensor g = activation(fc2.apply(h), Act::sigmoid);
    Tensor gate({n, c, 1, 1});
    for (int bi = 0; bi < n; ++bi)
        for (int ch = 0; ch < c; ++ch) gate.at(bi, ch, 0, 0) = g.at(bi, ch);
    return broadcast_mul(x, gate);
}

Tensor Model::classify(const Tensor& f4) const {
    if (f4.size(1) != config_.model.embed_dims[3])
        throw Error("classify: expected " + std::to_string(config_.model.embed_dims[3]) +
                    " channels, got " + std::to_string(f4.size(1)));
    Tensor x = f4;
    if (cls_.refine) {
        x = cls_.refine->forward(x);
        if (cls_.use_se) x = se_gate(x, cls_.se_fc1, cls_.se_fc2);
    }
    Tensor pooled = global_avg_pool(x);
    Tensor vec({x.size(0), x.size(1)});
    for (int n = 0; n < x.size(0); ++n)
        for (int c = 0; c < x.size(1); ++c) vec.at(n, c) = pooled.at(n, c, 0, 0);
    // dropout between the MLP layers is identity at inference
    Tensor h = activation(cls_.fc1.apply(vec), Act::gelu);
    return cls_.fc2.apply(h);
}

namespace {

// -log softmax(logits)[target] via a stable log-sum-exp
double ce_term(const float* logits, int count, int target) {
    double m = logits[0];
    for (int i = 1; i < count; ++i) m = std::max(m, static_cast<double>(logits[i]));
    double s = 0.0;
    for (int i = 0; i < count; ++i) s += std::exp(logits[i] - m);
    return m + std::log(s) - logits[target];
}

}  // namespace

LossBreakdown multi_task_loss(const PredictionBundle& pred, const SegLabels& seg_gt,
                              const std::vector<uint8_t>& cls_gt, float lambda) {
    if (lambda < 0.0f) throw Error("multi_task_loss: lambda must be >= 0");
    const Tensor& seg = pred.seg_logits;
    const Tensor& cls = pred.cls_logits;
    if (seg.size(0) != seg_gt.n || seg.size(2) != seg_gt.h || seg.size(3) != seg_gt.w)
        throw Error("multi_task_loss: mask shape (" + std::to_string(seg_gt.n) + "," +
                    std::to_string(seg_gt.h) + "," + std::to_string(seg_gt.w) +
                    ") does not match logits " + shape_str(seg.shape()));
    if (static_cast<int>(cls_gt.size()) != cls.size(0))
        throw Error("multi_task_loss: label count != batch size");

    const int classes = seg.size(1);
    double seg_sum = 0.0;
    std::vector<float> pix(static_cast<size_t>(classes));
    for (int n = 0; n < seg.size(0); ++n)
        for (int y = 0; y < seg.size(2); ++y)
            for (int x = 0; x < seg.size(3); ++x) {
                const int t = seg_gt.at(n, y, x);
                if (t >= classes)
                    throw Error("multi_task_loss: segmentation label " + std::to_string(t) + " out of range");
                for (int c = 0; c < classes; ++c) pix[c] = seg.at(n, c, y, x);
                seg_sum += ce_term(pix.data(), classes, t);
            }
    const double seg_loss = seg_sum / (static_cast<double>(seg.size(0)) * seg.size(2) * seg.size(3));

    const int cls_classes = cls.size(1);
    double cls_sum = 0.0;
    std::vector<float> row(static_cast<size_t>(cls_classes));
    for (int n = 0; n < cls.size(0); ++n) {
        const int t = cls_gt[static_cast<size_t>(n)];
        if (t >= cls_classes)
            throw Error("multi_task_loss: classification label " + std::to_string(t) + " out of range");
        for (int c = 0; c < cls_classes; ++c) row[c] = cls.at(n, c);
        cls_sum += ce_term(row.data(), cls_classes, t);
    }
    const double cls_loss = cls_sum / cls.size(0);

    return LossBreakdown{seg_loss + static_cast<double>(lambda) * cls_loss, seg_loss, cls_loss};
}

}  // namespace wrf
