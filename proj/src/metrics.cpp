#include "paresis/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "paresis/common.hpp"

namespace paresis {

size_t ConfusionMatrix::total() const {
    size_t n = 0;
    for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
    return n;
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred, size_t n,
                          std::vector<std::string> names) {
    if (truth.size() != pred.size())
        throw ContractError("confusion: truth and pred lengths differ (" +
                            std::to_string(truth.size()) + " vs " + std::to_string(pred.size()) +
                            ")");
    if (n < 1) throw ContractError("confusion: need at least one class");
    if (!names.empty() && names.size() != n)
        throw ContractError("confusion: class name count does not match n");

    ConfusionMatrix cm;
    cm.counts.assign(n, std::vector<size_t>(n, 0));
    if (names.empty())
        for (size_t i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
    cm.class_names = std::move(names);

    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = pred[i];
        if (t < 0 || static_cast<size_t>(t) >= n || p < 0 || static_cast<size_t>(p) >= n)
            throw ContractError("confusion: label out of range at sample " + std::to_string(i));
        ++cm.counts[static_cast<size_t>(t)][static_cast<size_t>(p)];
    }
    return cm;
}

MetricReport report(const ConfusionMatrix& cm, bool exclude_zero_support) {
    const size_t n = cm.num_classes();
    if (n == 0) throw ContractError("report: empty confusion matrix");
    const size_t total = cm.total();
    if (total == 0) throw ContractError("report: no samples");

    MetricReport r;
    r.per_class.resize(n);
    size_t trace = 0;
    std::vector<size_t> col_sums(n, 0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) col_sums[j] += cm.counts[i][j];

    for (size_t i = 0; i < n; ++i) {
        ClassStats& s = r.per_class[i];
        s.tp = cm.counts[i][i];
        trace += s.tp;
        size_t row = std::accumulate(cm.counts[i].begin(), cm.counts[i].end(), size_t{0});
        s.support = row;
        s.fn = row - s.tp;
        s.fp = col_sums[i] - s.tp;
        s.tn = total - s.tp - s.fn - s.fp;
        s.precision = (s.tp + s.fp) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
        s.recall = (s.tp + s.fn) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
        size_t f1_den = 2 * s.tp + s.fp + s.fn;
        s.f1 = f1_den ? 2.0 * static_cast<double>(s.tp) / static_cast<double>(f1_den) : 0.0;
        if (row == 0) r.has_zero_support = true;
    }

    r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    // micro aggregation: every sample contributes one TP or one FP+FN, so
    // precision = recall = accuracy
    r.precision_micro = r.recall_micro = r.f1_micro = r.accuracy;

    double p_sum = 0, rec_sum = 0, f1_sum = 0;
    double pw = 0, rw = 0, fw = 0;
    size_t macro_n = 0;
    for (const ClassStats& s : r.per_class) {
        if (!(exclude_zero_support && s.support == 0)) {
            p_sum += s.precision;
            rec_sum += s.recall;
            f1_sum += s.f1;
            ++macro_n;
        }
        double w = static_cast<double>(s.support) / static_cast<double>(total);
        pw += w * s.precision;
        rw += w * s.recall;
        fw += w * s.f1;
    }
    if (macro_n == 0) throw ContractError("report: all classes excluded");
    r.precision_macro = p_sum / static_cast<double>(macro_n);
    r.recall_macro = rec_sum / static_cast<double>(macro_n);
    r.f1_macro = f1_sum / static_cast<double>(macro_n);
    r.precision_weighted = pw;
    r.recall_weighted = rw;
    r.f1_weighted = fw;
    r.balanced_accuracy = r.recall_macro;
    return r;
}

std::vector<std::vector<double>> row_normalized(const ConfusionMatrix& cm) {
    const size_t n = cm.num_classes();
    std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        size_t row = std::accumulate(cm.counts[i].begin(), cm.counts[i].end(), size_t{0});
        if (row == 0) continue;
        for (size_t j = 0; j < n; ++j)
            out[i][j] = 100.0 * static_cast<double>(cm.counts[i][j]) / static_cast<double>(row);
    }
    return out;
}

std::string render_confusion(const ConfusionMatrix& cm, Normalize normalize) {
    std::string out = "truth\\pred";
    for (const auto& name : cm.class_names) {
        out += ',';
        out += name;
    }
    out += '\n';

    auto pct = normalize == Normalize::Row ? row_normalized(cm)
                                           : std::vector<std::vector<double>>{};
    char buf[64];
    for (size_t i = 0; i < cm.num_classes(); ++i) {
        out += cm.class_names[i];
        for (size_t j = 0; j < cm.num_classes(); ++j) {
            out += ',';
            if (normalize == Normalize::Row) {
                std::snprintf(buf, sizeof(buf), "%.2f", pct[i][j]);
                out += buf;
            } else {
                out += std::to_string(cm.counts[i][j]);
            }
        }
        out += '\n';
    }
    return out;
}

std::string metrics_csv(const MetricReport& r, const ConfusionMatrix& cm) {
    char buf[128];
    std::string out = "metric,value\n";
    auto row = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f\n", name, v);
        out += buf;
    };
    row("accuracy", r.accuracy);
    row("balanced_accuracy", r.balanced_accuracy);
    row("precision_micro", r.precision_micro);
    row("recall_micro", r.recall_micro);
    row("f1_micro", r.f1_micro);
    row("precision_macro", r.precision_macro);
    row("recall_macro", r.recall_macro);
    row("f1_macro", r.f1_macro);
    row("precision_weighted", r.precision_weighted);
    row("recall_weighted", r.recall_weighted);
    row("f1_weighted", r.f1_weighted);

    out += "class,support,tp,fp,fn,tn,precision,recall,f1\n";
    for (size_t i = 0; i < r.per_class.size(); ++i) {
        const ClassStats& s = r.per_class[i];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f\n",
                      cm.class_names[i].c_str(), s.support, s.tp, s.fp, s.fn, s.tn, s.precision,
                      s.recall, s.f1);
        out += buf;
    }
    return out;
}

}  // namespace paresis
