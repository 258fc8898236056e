#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "paresis/adam.hpp"
#include "paresis/distill.hpp"
#include "paresis/layers.hpp"
#include "testutil.hpp"

using namespace paresis;
using namespace paresis::nd;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

namespace {

SoftenedDistribution dist(std::vector<double> p, double temp = 1.0) {
    return {std::move(p), temp};
}

std::vector<int> labels(std::initializer_list<int> l) { return l; }

}  // namespace

TEST_CASE("fkd_loss basics") {
    CHECK(fkd_loss(dist({0.3, 0.7}), dist({0.3, 0.7})) == doctest::Approx(0.0).epsilon(1e-15));

    double v = fkd_loss(dist({0.75, 0.25}), dist({0.5, 0.5}));
    CHECK(std::abs(v - 0.13081) < 1e-4);  // 0.75 ln 1.5 + 0.25 ln 0.5

    CHECK_THROWS_AS(fkd_loss(dist({0.5, 0.5}), dist({0.3, 0.3, 0.4})), ContractError);
    CHECK_THROWS_AS(fkd_loss(dist({0.5, 0.5}, 2.0), dist({0.5, 0.5}, 4.0)), ContractError);
}

TEST_CASE("fkd_loss is nonnegative, zero only at equality") {
    Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.below(6);
        Tensor za = random_tensor({n}, rng, -6.0, 6.0);
        Tensor zb = random_tensor({n}, rng, -6.0, 6.0);
        auto p = soften(za.v.data(), n, 2.0);
        auto q = soften(zb.v.data(), n, 2.0);
        double kl = fkd_loss(p, q);
        CHECK(kl >= 0.0);

        double linf = 0.0;
        for (size_t i = 0; i < n; ++i) linf = std::max(linf, std::abs(p.probs[i] - q.probs[i]));
        if (linf > 1e-6) CHECK(kl > 0.0);
        if (kl < 1e-14) CHECK(linf < 1e-6);
    }
}

TEST_CASE("cross_entropy hand values") {
    CHECK(std::abs(cross_entropy({1, 0}, {1.0, 0.0})) < 1e-9);
    CHECK(std::abs(cross_entropy({1, 0}, {0.5, 0.5}) - std::log(2.0)) < 1e-5);
    CHECK(std::abs(cross_entropy({0, 1}, {0.9, 0.1}) - 2.30259) < 1e-5);

    CHECK_THROWS_AS(cross_entropy({1, 1}, {0.5, 0.5}), ContractError);
    CHECK_THROWS_AS(cross_entropy({0, 0}, {0.5, 0.5}), ContractError);
    CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, {0.5, 0.5}), ContractError);
    CHECK_THROWS_AS(cross_entropy({1, 0, 0}, {0.5, 0.5}), ContractError);
}

TEST_CASE("total_loss at perfect confident agreement is near zero") {
    Tensor z({2, 2}, {30.0, 0.0, 0.0, 30.0});
    auto lb = total_loss(z, z, z, labels({0, 1}), 4.0);
    CHECK(lb.fusion_ce < 1e-3);
    CHECK(lb.tcn_ce < 1e-3);
    CHECK(lb.lstm_ce < 1e-3);
    CHECK(lb.tcn_fkd < 1e-3);
    CHECK(lb.lstm_fkd < 1e-3);
    CHECK(lb.total < 1e-3);
}

TEST_CASE("total_loss uniform binary case equals 3 ln 2") {
    Tensor z({1, 2}, {0.0, 0.0});
    auto lb = total_loss(z, z, z, labels({0}), 4.0);
    CHECK(std::abs(lb.total - 3.0 * std::log(2.0)) < 1e-4);
    CHECK(lb.tcn_fkd == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lb.lstm_fkd == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total_loss decomposition identity") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        size_t b = 1 + rng.below(5), n = 2 + rng.below(7);
        Tensor zt = random_tensor({b, n}, rng, -4.0, 4.0);
        Tensor zl = random_tensor({b, n}, rng, -4.0, 4.0);
        Tensor zf = random_tensor({b, n}, rng, -4.0, 4.0);
        std::vector<int> y;
        for (size_t i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.below(n)));
        auto lb = total_loss(zt, zl, zf, y, 3.0);
        double sum = lb.fusion_ce + lb.tcn_fkd + lb.tcn_ce + lb.lstm_fkd + lb.lstm_ce;
        CHECK(std::abs(lb.total - sum) < 1e-10);
        CHECK(lb.tcn_fkd >= 0.0);
        CHECK(lb.lstm_fkd >= 0.0);
    }
}

TEST_CASE("total_loss with equal heads at temperature 1 is exactly 3 CE terms") {
    Rng rng(44);
    Tensor z = random_tensor({3, 4}, rng, -2.0, 2.0);
    std::vector<int> y{1, 3, 0};
    auto lb = total_loss(z, z, z, y, 1.0);

    double ce = 0.0;
    for (size_t bi = 0; bi < 3; ++bi) {
        auto p = soften(&z.v[bi * 4], 4, 1.0);
        std::vector<double> onehot(4, 0.0);
        onehot[static_cast<size_t>(y[bi])] = 1.0;
        ce += cross_entropy(onehot, p.probs) / 3.0;
    }
    CHECK(lb.total == doctest::Approx(3.0 * ce).epsilon(1e-12));
    CHECK(lb.tcn_fkd == 0.0);
    CHECK(lb.lstm_fkd == 0.0);
}

TEST_CASE("total_loss gradients match finite differences") {
    Rng rng(2024);
    Tensor zt = random_tensor({3, 4}, rng, -2.0, 2.0);
    Tensor zl = random_tensor({3, 4}, rng, -2.0, 2.0);
    Tensor zf = random_tensor({3, 4}, rng, -2.0, 2.0);
    std::vector<int> y{2, 0, 3};

    for (LossFlags flags : {LossFlags{}, LossFlags{true, false}, LossFlags{false, true}}) {
        LossGrads g;
        total_loss(zt, zl, zf, y, 4.0, flags, &g);
        // student paths see the full objective
        auto loss = [&] { return total_loss(zt, zl, zf, y, 4.0, flags).total; };
        CHECK(fd_max_rel_err(loss, {{&zt, &g.dtcn}, {&zl, &g.dlstm}}) < 1e-4);
        // the teacher is detached, so the fusion logits' only live
        // dependence is the fusion CE term
        auto fusion_loss = [&] { return total_loss(zt, zl, zf, y, 4.0, flags).fusion_ce; };
        CHECK(fd_max_rel_err(fusion_loss, {{&zf, &g.dfusion}}) < 1e-4);
    }
}

TEST_CASE("fusion gradient ignores the FKD terms (teacher detached)") {
    Rng rng(7);
    Tensor zt = random_tensor({4, 3}, rng, -3.0, 3.0);
    Tensor zl = random_tensor({4, 3}, rng, -3.0, 3.0);
    Tensor zf = random_tensor({4, 3}, rng, -3.0, 3.0);
    std::vector<int> y{0, 2, 1, 1};

    LossGrads g;
    total_loss(zt, zl, zf, y, 4.0, {}, &g);

    // pure fusion CE gradient: (softmax(z) - y) / B
    for (size_t bi = 0; bi < 4; ++bi) {
        auto p = soften(&zf.v[bi * 3], 3, 1.0);
        for (size_t j = 0; j < 3; ++j) {
            double expect = (p.probs[j] - (static_cast<int>(j) == y[bi] ? 1.0 : 0.0)) / 4.0;
            CHECK(g.dfusion(bi, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("fkd t2 scaling multiplies the FKD terms by temperature squared") {
    Rng rng(3);
    Tensor zt = random_tensor({2, 3}, rng);
    Tensor zl = random_tensor({2, 3}, rng);
    Tensor zf = random_tensor({2, 3}, rng);
    std::vector<int> y{0, 1};
    auto plain = total_loss(zt, zl, zf, y, 4.0, {false, false});
    auto scaled = total_loss(zt, zl, zf, y, 4.0, {false, true});
    CHECK(scaled.tcn_fkd == doctest::Approx(16.0 * plain.tcn_fkd).epsilon(1e-12));
    CHECK(scaled.lstm_fkd == doctest::Approx(16.0 * plain.lstm_fkd).epsilon(1e-12));
    CHECK(scaled.tcn_ce == plain.tcn_ce);
}

TEST_CASE("soft_ce flag softens the supervised terms") {
    Tensor z({1, 2}, {2.0, 0.0});
    std::vector<int> y{0};
    auto hard = total_loss(z, z, z, y, 4.0, {false, false});
    auto soft = total_loss(z, z, z, y, 4.0, {true, false});
    // softened probs are closer to uniform, so the correct-class CE grows
    CHECK(soft.fusion_ce > hard.fusion_ce);
    auto p = soften(z.v.data(), 2, 4.0);
    CHECK(soft.fusion_ce == doctest::Approx(-std::log(p.probs[0])).epsilon(1e-12));
}

TEST_CASE("adam hand-computed first step") {
    Tensor param({1}, {1.0});
    Tensor grad({1}, {0.5});
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.1;
    adam_step(param, grad, st, cfg);
    // mhat = 0.5, vhat = 0.25 after bias correction
    double expect = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(param.v[0] == doctest::Approx(expect).epsilon(1e-10));
    CHECK(st.t == 1);
}

TEST_CASE("adam zero gradients leave parameters unchanged") {
    Rng rng(8);
    Tensor param = random_tensor({4, 3}, rng);
    Tensor before = param;
    Tensor zeros({4, 3});
    AdamState st;
    AdamConfig cfg;
    for (int i = 0; i < 5; ++i) adam_step(param, zeros, st, cfg);
    CHECK(param.v == before.v);
}

TEST_CASE("adam lr=0 is a bit-exact no-op") {
    Rng rng(9);
    Tensor param = random_tensor({8}, rng);
    Tensor before = param;
    Tensor grad = random_tensor({8}, rng);
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.0;
    adam_step(param, grad, st, cfg);
    CHECK(param.v == before.v);
}

TEST_CASE("adam moments decay toward zero under zero gradients") {
    Tensor param({1}, {0.0});
    Tensor g1({1}, {1.0});
    Tensor zeros({1});
    AdamState st;
    AdamConfig cfg;
    adam_step(param, g1, st, cfg);
    double m_after_1 = st.m.v[0];
    for (int i = 0; i < 50; ++i) adam_step(param, zeros, st, cfg);
    CHECK(std::abs(st.m.v[0]) < std::abs(m_after_1) * 1e-2);
    CHECK(st.m.v[0] == doctest::Approx(m_after_1 * std::pow(0.9, 50)).epsilon(1e-9));
}

TEST_CASE("adam shape mismatch") {
    Tensor param({2});
    Tensor grad({3});
    AdamState st;
    CHECK_THROWS_AS(adam_step(param, grad, st, AdamConfig{}), ContractError);
}
