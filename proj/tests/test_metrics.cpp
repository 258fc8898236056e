#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "paresis/metrics.hpp"
#include "paresis/common.hpp"
#include "paresis/rng.hpp"
#include "testutil.hpp"

using namespace paresis;

namespace {

ConfusionMatrix from_counts(std::vector<std::vector<size_t>> counts) {
    ConfusionMatrix cm;
    cm.counts = std::move(counts);
    for (size_t i = 0; i < cm.counts.size(); ++i) cm.class_names.push_back("c" + std::to_string(i));
    return cm;
}

}  // namespace

TEST_CASE("confusion basic tallies") {
    auto cm = confusion({0, 1, 1, 0}, {0, 1, 1, 0}, 2);
    CHECK(cm.counts[0][0] == 2);
    CHECK(cm.counts[1][1] == 2);
    CHECK(cm.counts[0][1] == 0);

    auto wrong = confusion({0, 0, 1, 1}, {1, 1, 0, 0}, 2);
    CHECK(wrong.counts[0][1] == 2);
    CHECK(wrong.counts[1][0] == 2);
    CHECK(wrong.counts[0][0] == 0);

    // hand-tallied 6-sample, 3-class case
    auto hand = confusion({0, 0, 1, 2, 2, 2}, {0, 1, 1, 2, 0, 2}, 3);
    CHECK(hand.counts == std::vector<std::vector<size_t>>{{1, 1, 0}, {0, 1, 0}, {1, 0, 2}});
    CHECK(hand.total() == 6);

    CHECK_THROWS_AS(confusion({0, 3}, {0, 0}, 2), ContractError);
    CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), ContractError);
}

TEST_CASE("perfect classifier scores 1.0 everywhere") {
    auto r = report(from_counts({{50, 0}, {0, 50}}));
    CHECK(r.accuracy == 1.0);
    CHECK(r.precision_macro == 1.0);
    CHECK(r.recall_macro == 1.0);
    CHECK(r.f1_macro == 1.0);
    CHECK(r.balanced_accuracy == 1.0);
    CHECK(r.f1_weighted == 1.0);
}

TEST_CASE("binary hand case matches the defining ratios") {
    // positive class 0: TP=40, FN=10, FP=20, TN=30
    auto r = report(from_counts({{40, 10}, {20, 30}}));
    CHECK(r.accuracy == doctest::Approx(0.7).epsilon(1e-6));
    const ClassStats& pos = r.per_class[0];
    CHECK(pos.tp == 40);
    CHECK(pos.fn == 10);
    CHECK(pos.fp == 20);
    CHECK(pos.tn == 30);
    CHECK(std::abs(pos.precision - 0.6667) < 1e-4);
    CHECK(std::abs(pos.recall - 0.8) < 1e-4);
    CHECK(std::abs(pos.f1 - 0.7273) < 1e-4);
}

TEST_CASE("balanced accuracy is the mean of per-class recalls") {
    // recalls 97.38% and 98.58% -> 97.98%
    auto r = report(from_counts({{9738, 262}, {142, 9858}}));
    CHECK(std::abs(r.per_class[0].recall - 0.9738) < 1e-9);
    CHECK(std::abs(r.per_class[1].recall - 0.9858) < 1e-9);
    CHECK(std::abs(r.balanced_accuracy - 0.9798) < 1e-4);

    auto r2 = report(from_counts({{8, 2}, {5, 5}}));
    CHECK(r2.balanced_accuracy == doctest::Approx((0.8 + 0.5) / 2));
}

TEST_CASE("micro precision equals recall equals accuracy") {
    Rng rng(88);
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 2 + rng.below(5);
        std::vector<int> truth, pred;
        for (int i = 0; i < 200; ++i) {
            truth.push_back(static_cast<int>(rng.below(n)));
            pred.push_back(static_cast<int>(rng.below(n)));
        }
        auto r = report(confusion(truth, pred, n));
        CHECK(r.precision_micro == r.accuracy);
        CHECK(r.recall_micro == r.accuracy);
        CHECK(r.f1_micro == r.accuracy);
    }
}

TEST_CASE("per-class F1 equals the precision-recall form") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 2 + rng.below(4);
        std::vector<int> truth, pred;
        for (int i = 0; i < 100; ++i) {
            truth.push_back(static_cast<int>(rng.below(n)));
            pred.push_back(static_cast<int>(rng.below(n)));
        }
        auto r = report(confusion(truth, pred, n));
        for (const ClassStats& s : r.per_class) {
            if (s.precision + s.recall == 0.0) {
                CHECK(s.f1 == 0.0);
            } else {
                double pr_form = 2.0 * s.precision * s.recall / (s.precision + s.recall);
                CHECK(std::abs(s.f1 - pr_form) < 1e-12);
            }
        }
    }
}

TEST_CASE("report is permutation-equivariant") {
    Rng rng(5);
    std::vector<int> truth, pred;
    for (int i = 0; i < 300; ++i) {
        truth.push_back(static_cast<int>(rng.below(3)));
        pred.push_back(static_cast<int>(rng.below(3)));
    }
    auto r = report(confusion(truth, pred, 3));

    // relabel classes 0->2, 1->0, 2->1
    int perm[3] = {2, 0, 1};
    std::vector<int> truth_p, pred_p;
    for (size_t i = 0; i < truth.size(); ++i) {
        truth_p.push_back(perm[truth[i]]);
        pred_p.push_back(perm[pred[i]]);
    }
    auto rp = report(confusion(truth_p, pred_p, 3));

    CHECK(rp.accuracy == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(rp.precision_macro == doctest::Approx(r.precision_macro).epsilon(1e-12));
    CHECK(rp.recall_macro == doctest::Approx(r.recall_macro).epsilon(1e-12));
    CHECK(rp.f1_weighted == doctest::Approx(r.f1_weighted).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) {
        CHECK(rp.per_class[perm[c]].precision == doctest::Approx(r.per_class[c].precision));
        CHECK(rp.per_class[perm[c]].recall == doctest::Approx(r.per_class[c].recall));
    }
}

TEST_CASE("zero-support class handling") {
    auto cm = from_counts({{10, 0, 0}, {2, 8, 0}, {0, 0, 0}});
    auto r = report(cm);
    CHECK(r.has_zero_support);
    CHECK(r.per_class[2].precision == 0.0);
    CHECK(r.per_class[2].recall == 0.0);
    CHECK(r.balanced_accuracy == doctest::Approx((1.0 + 0.8 + 0.0) / 3));

    auto rx = report(cm, true);
    CHECK(rx.balanced_accuracy == doctest::Approx((1.0 + 0.8) / 2));
}

TEST_CASE("row normalization sums to 100 per nonzero row") {
    Rng rng(17);
    auto cm = from_counts({{13, 7, 5}, {0, 21, 4}, {3, 3, 3}});
    auto pct = row_normalized(cm);
    for (const auto& row : pct) {
        double sum = 0;
        for (double v : row) sum += v;
        CHECK(std::abs(sum - 100.0) < 0.01);
    }

    // Fig. 6-style narrative row: 49.79% diagonal, 20.67% off-diagonal
    auto narr = from_counts({{4979, 2067, 2954}, {0, 1, 0}, {0, 0, 1}});
    auto npct = row_normalized(narr);
    CHECK(npct[0][0] == doctest::Approx(49.79));
    CHECK(npct[0][1] == doctest::Approx(20.67));
}

TEST_CASE("render_confusion formats") {
    auto cm = from_counts({{2, 0}, {0, 2}});
    std::string raw = render_confusion(cm, Normalize::None);
    CHECK(raw.find("truth\\pred,c0,c1") != std::string::npos);
    CHECK(raw.find("c0,2,0") != std::string::npos);

    std::string pct = render_confusion(cm, Normalize::Row);
    CHECK(pct.find("100.00") != std::string::npos);
    CHECK(pct.find("0.00") != std::string::npos);
}

TEST_CASE("metrics_csv emits the documented layout") {
    auto cm = from_counts({{40, 10}, {20, 30}});
    auto r = report(cm);
    std::string csv = metrics_csv(r, cm);
    CHECK(csv.find("metric,value\n") == 0);
    CHECK(csv.find("accuracy,0.700000") != std::string::npos);
    CHECK(csv.find("class,support,tp,fp,fn,tn,precision,recall,f1") != std::string::npos);
    CHECK(csv.find("c0,50,40,20,10,30,") != std::string::npos);
}
