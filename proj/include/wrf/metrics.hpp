#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrf/tensor.hpp"

namespace wrf {

// Square confusion matrix; rows = ground truth, cols = prediction.
// Supports merge so evaluation shards can run in parallel and combine.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes = 2);

    int num_classes() const { return num_classes_; }
    int64_t at(int truth, int pred) const { return counts_[static_cast<size_t>(truth) * num_classes_ + pred]; }
    void record(int truth, int pred, int64_t count = 1);
    int64_t total() const;

    ConfusionMatrix& merge(const ConfusionMatrix& other);

private:
    int num_classes_;
    std::vector<int64_t> counts_;
};

struct ClassMetrics {
    double iou = 0.0;
    double fscore = 0.0;
    double acc = 0.0;  // recall of the class
    bool defined = true;  // false when the class has zero support
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double miou = 0.0;
    double mfscore = 0.0;
    double macc = 0.0;
    double mf1 = 0.0;  // same formula as mfscore; reported under the sample-level name
    int undefined_classes = 0;
};

// IoU_c = TP/(TP+FP+FN); F_c = 2PR/(P+R); Acc_c = recall. Macro means are
// unweighted over classes; zero-support classes are excluded and flagged.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

std::string metrics_to_text(const MetricsReport& report);

}  // namespace wrf
