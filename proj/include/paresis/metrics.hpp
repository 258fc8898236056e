#pragma once

#include <string>
#include <vector>

namespace paresis {

struct ConfusionMatrix {
    // rows = truth, columns = prediction
    std::vector<std::vector<size_t>> counts;
    std::vector<std::string> class_names;

    size_t num_classes() const { return counts.size(); }
    size_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred, size_t n,
                          std::vector<std::string> names = {});

struct ClassStats {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    size_t support = 0;  // truth-row total
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricReport {
    double accuracy = 0.0;  // trace / total
    std::vector<ClassStats> per_class;
    double precision_micro = 0.0, recall_micro = 0.0, f1_micro = 0.0;
    double precision_macro = 0.0, recall_macro = 0.0, f1_macro = 0.0;
    double precision_weighted = 0.0, recall_weighted = 0.0, f1_weighted = 0.0;
    double balanced_accuracy = 0.0;  // mean of per-class recalls
    bool has_zero_support = false;
};

// Zero-support classes score 0; exclude_zero_support drops them from the
// macro averages (and balanced accuracy) instead.
MetricReport report(const ConfusionMatrix& cm, bool exclude_zero_support = false);

enum class Normalize { None, Row };

// percentages per row, each nonzero row summing to 100
std::vector<std::vector<double>> row_normalized(const ConfusionMatrix& cm);

std::string render_confusion(const ConfusionMatrix& cm, Normalize normalize);

// fixed column order, documented in the README
std::string metrics_csv(const MetricReport& r, const ConfusionMatrix& cm);

}  // namespace paresis
