#include "wrf/metrics.hpp"

#include <iomanip>
#include <sstream>

namespace wrf {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
    if (num_classes < 2) throw Error("confusion matrix needs at least 2 classes");
}

void ConfusionMatrix::record(int truth, int pred, int64_t count) {
    if (truth < 0 || truth >= num_classes_ || pred < 0 || pred >= num_classes_)
        throw Error("confusion matrix: label out of range (truth=" + std::to_string(truth) +
                    ", pred=" + std::to_string(pred) + ")");
    if (count < 0) throw Error("confusion matrix: negative count");
    counts_[static_cast<size_t>(truth) * num_classes_ + pred] += count;
}

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t c : counts_) t += c;
    return t;
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_)
        throw Error("confusion matrix: merge with different class count");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("metrics: empty confusion matrix");
    const int k = cm.num_classes();
    MetricsReport rep;
    rep.per_class.resize(static_cast<size_t>(k));

    double iou_sum = 0.0, f_sum = 0.0, acc_sum = 0.0;
    int counted = 0;
    for (int c = 0; c < k; ++c) {
        int64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        ClassMetrics& m = rep.per_class[static_cast<size_t>(c)];
        if (tp + fn == 0) {
            // class never occurs in the ground truth
            m.defined = false;
            ++rep.undefined_classes;
            continue;
        }
        m.iou = (tp + fp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 0.0;
        const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.fscore = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        m.acc = recall;
        iou_sum += m.iou;
        f_sum += m.fscore;
        acc_sum += m.acc;
        ++counted;
    }
    if (counted == 0) throw Error("metrics: no class has ground-truth support");
    rep.miou = iou_sum / counted;
    rep.mfscore = f_sum / counted;
    rep.macc = acc_sum / counted;
    rep.mf1 = rep.mfscore;
    return rep;
}

std::string metrics_to_text(const MetricsReport& rep) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    for (size_t c = 0; c < rep.per_class.size(); ++c) {
        const ClassMetrics& m = rep.per_class[c];
        if (!m.defined) {
            os << "class" << c << "=undefined\n";
            continue;
        }
        os << "iou_" << c << "=" << m.iou * 100.0 << "\n";
        os << "fscore_" << c << "=" << m.fscore * 100.0 << "\n";
        os << "acc_" << c << "=" << m.acc * 100.0 << "\n";
    }
    os << "miou=" << rep.miou * 100.0 << "\n";
    os << "mfscore=" << rep.mfscore * 100.0 << "\n";
    os << "macc=" << rep.macc * 100.0 << "\n";
    os << "mf1=" << rep.mf1 * 100.0 << "\n";
    if (rep.undefined_classes > 0) os << "undefined_classes=" << rep.undefined_classes << "\n";
    return os.str();
}

}  // namespace wrf
