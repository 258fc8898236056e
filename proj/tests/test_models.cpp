#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "paresis/distill.hpp"
#include "paresis/models.hpp"
#include "testutil.hpp"

using namespace paresis;
using namespace paresis::nd;
using testutil::fd_max_rel_err;
using testutil::random_tensor;
using testutil::TempDir;

namespace {

// small enough for finite differences, deep enough to cover projection,
// stride, and multi-layer recurrence
ResTcnConfig tiny_tcn() {
    ResTcnConfig cfg;
    cfg.filters = {3, 4};
    cfg.entry_stride = {1, 2};
    cfg.subblocks_per_unit = 2;
    cfg.kernel = 3;
    cfg.stem_filters = 3;
    cfg.stem_kernel = 3;
    return cfg;
}

LstmNetConfig tiny_lstm() {
    LstmNetConfig cfg;
    cfg.hidden = 4;
    cfg.head_hidden = 3;
    return cfg;
}

}  // namespace

TEST_CASE("tcn output shapes follow the stride schedule") {
    ModelBundle m = make_bundle(Task::Paretic, 75, 64, 1);
    Rng rng(0);
    Tensor x = random_tensor({4, 64, 75}, rng);
    HeadOut out = tcn_forward(m.tcn, x, Mode::Train);
    CHECK(out.features.shape == std::vector<size_t>{4, 64});
    CHECK(out.logits.shape == std::vector<size_t>{4, 2});
}

TEST_CASE("lstm output shapes") {
    ModelBundle m = make_bundle(Task::Action, 75, 32, 1);
    Rng rng(0);
    Tensor x = random_tensor({4, 32, 75}, rng);
    HeadOut out = lstm_forward(m.lstm, x);
    CHECK(out.features.shape == std::vector<size_t>{4, 32});
    CHECK(out.logits.shape == std::vector<size_t>{4, 9});
}

TEST_CASE("window too short for the stride schedule is a config error") {
    CHECK_THROWS_AS(make_bundle(Task::Paretic, 3, 7, 1), ConfigError);
    ModelBundle m = make_bundle(Task::Paretic, 3, 64, 1);
    Rng rng(2);
    Tensor x = random_tensor({1, 7, 3}, rng);
    CHECK_THROWS_AS(tcn_forward(m.tcn, x, Mode::Train), ConfigError);
}

TEST_CASE("all-zero input reaches the head bias") {
    ModelBundle m = make_bundle(Task::Paretic, 5, 16, 3, tiny_tcn(), tiny_lstm());
    m.tcn.head.b = Tensor({2}, {0.3, -0.2});
    Tensor x({2, 16, 5});
    HeadOut out = tcn_forward(m.tcn, x, Mode::Train);
    for (size_t bi = 0; bi < 2; ++bi) {
        CHECK(out.logits(bi, 0) == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(out.logits(bi, 1) == doctest::Approx(-0.2).epsilon(1e-12));
    }
}

TEST_CASE("zeroed shape-preserving unit is the identity map") {
    ResTcnConfig cfg = tiny_tcn();
    cfg.filters = {3};  // one unit, same channels as the stem, stride 1
    cfg.entry_stride = {1};
    ModelBundle m = make_bundle(Task::Paretic, 2, 12, 9, cfg, tiny_lstm());
    for (SubBlock& sb : m.tcn.blocks) {
        REQUIRE_FALSE(sb.has_proj);
        sb.conv.w.fill(0.0);
        sb.conv.b.fill(0.0);
        sb.bn.gamma.fill(0.0);
        sb.bn.beta.fill(0.0);
    }

    Rng rng(4);
    Tensor x = random_tensor({2, 12, 2}, rng);
    HeadOut out = tcn_forward(m.tcn, x, Mode::Train);

    // the body collapses to the stem conv, so pooled features must equal
    // the stem output's time average
    ConvSpec stem_spec{cfg.stem_filters, cfg.stem_kernel, cfg.stem_stride, Padding::Same};
    Tensor stem = conv1d(x, m.tcn.stem.w, m.tcn.stem.b, stem_spec);
    Tensor pooled = mean_time(stem);
    for (size_t i = 0; i < pooled.numel(); ++i)
        CHECK(out.features.v[i] == doctest::Approx(pooled.v[i]).epsilon(1e-12));
}

TEST_CASE("eval-mode forward is bit-deterministic") {
    ModelBundle m = make_bundle(Task::Paretic, 4, 16, 5, tiny_tcn(), tiny_lstm());
    Rng rng(6);
    Tensor x = random_tensor({3, 16, 4}, rng);
    bundle_forward(m, x, Mode::Train);  // seed the BN running stats

    BundleOut a = bundle_forward(m, x, Mode::Eval);
    BundleOut b = bundle_forward(m, x, Mode::Eval);
    CHECK(a.tcn.logits.v == b.tcn.logits.v);
    CHECK(a.lstm.logits.v == b.lstm.logits.v);
    CHECK(a.fusion_logits.v == b.fusion_logits.v);
}

TEST_CASE("head arities match the task") {
    ModelBundle m = make_bundle(Task::Action, 6, 16, 5, tiny_tcn(), tiny_lstm());
    CHECK(m.tcn.head.w.shape[1] == 9);
    CHECK(m.lstm.fc2.w.shape[1] == 9);
    CHECK(m.fusion.fc.w.shape[1] == 9);
    Rng rng(1);
    Tensor x = random_tensor({2, 16, 6}, rng);
    BundleOut out = bundle_forward(m, x, Mode::Train);
    CHECK(out.tcn.logits.shape[1] == 9);
    CHECK(out.lstm.logits.shape[1] == 9);
    CHECK(out.fusion_logits.shape[1] == 9);
}

TEST_CASE("zero recurrent weights make the last hidden depend on the last step only") {
    LstmNetConfig cfg = tiny_lstm();
    ModelBundle m = make_bundle(Task::Paretic, 3, 8, 11, tiny_tcn(), cfg);
    for (LstmParams& p : m.lstm.layers) {
        p.wh.fill(0.0);
        p.b.fill(0.0);
    }

    Rng rng(12);
    Tensor last = random_tensor({1, 1, 3}, rng);

    // same last step behind two different all-zero prefixes
    auto run = [&](size_t t_len) {
        Tensor x({1, t_len, 3});
        for (size_t c = 0; c < 3; ++c) x(0, t_len - 1, c) = last(0, 0, c);
        return lstm_forward(m.lstm, x);
    };
    HeadOut short_seq = run(2);
    HeadOut long_seq = run(7);
    HeadOut single = run(1);
    for (size_t i = 0; i < short_seq.logits.numel(); ++i) {
        CHECK(short_seq.logits.v[i] == doctest::Approx(single.logits.v[i]).epsilon(1e-12));
        CHECK(long_seq.logits.v[i] == doctest::Approx(single.logits.v[i]).epsilon(1e-12));
    }
}

TEST_CASE("fusion head basics") {
    ModelBundle m = make_bundle(Task::Paretic, 3, 8, 13, tiny_tcn(), tiny_lstm());
    m.fusion.fc.b = Tensor({2}, {0.7, -0.4});

    Tensor zt({2, 4});  // tcn feature width = last filter count
    Tensor zl({2, 3});  // lstm feature width = head_hidden
    Tensor logits = fusion_forward(m.fusion, zt, zl);
    for (size_t bi = 0; bi < 2; ++bi) {
        CHECK(logits(bi, 0) == 0.7);
        CHECK(logits(bi, 1) == -0.4);
    }

    Tensor bad({2, 5});
    CHECK_THROWS_AS(fusion_forward(m.fusion, bad, zl), ContractError);
}

TEST_CASE("permuting fusion inputs with permuted weights gives identical logits") {
    ModelBundle m = make_bundle(Task::Paretic, 3, 8, 17, tiny_tcn(), tiny_lstm());
    Rng rng(17);
    Tensor ft = random_tensor({2, 4}, rng);
    Tensor fl = random_tensor({2, 3}, rng);
    Tensor base = fusion_forward(m.fusion, ft, fl);

    // swap the two input groups and the corresponding weight rows
    FusionHead swapped = m.fusion;
    swapped.fc.w = Tensor({7, 2});
    for (size_t j = 0; j < 2; ++j) {
        for (size_t i = 0; i < 3; ++i) swapped.fc.w(i, j) = m.fusion.fc.w(4 + i, j);
        for (size_t i = 0; i < 4; ++i) swapped.fc.w(3 + i, j) = m.fusion.fc.w(i, j);
    }
    Tensor swapped_logits = fusion_forward(swapped, fl, ft);
    for (size_t i = 0; i < base.numel(); ++i)
        CHECK(swapped_logits.v[i] == doctest::Approx(base.v[i]).epsilon(1e-12));
}

TEST_CASE("tcn input gradient matches finite differences") {
    ModelBundle m = make_bundle(Task::Paretic, 2, 8, 23, tiny_tcn(), tiny_lstm());
    Rng rng(23);
    Tensor x = random_tensor({2, 8, 2}, rng);
    Tensor wlog = random_tensor({2, 2}, rng);

    TcnCache cache;
    tcn_forward(m.tcn, x, Mode::Train, &cache);
    ModelBundle grads = make_grads(m);
    Tensor dx;
    tcn_backward(m.tcn, cache, wlog, nullptr, grads.tcn, &dx);

    auto loss = [&] {
        HeadOut o = tcn_forward(m.tcn, x, Mode::Train);
        return testutil::weighted_sum(o.logits, wlog);
    };
    CHECK(fd_max_rel_err(loss, {{&x, &dx}}, 1e-5) < 1e-3);
}

TEST_CASE("full objective gradient matches finite differences on a tiny model") {
    ModelBundle m = make_bundle(Task::Paretic, 2, 8, 31, tiny_tcn(), tiny_lstm());
    Rng rng(31);
    Tensor x = random_tensor({2, 8, 2}, rng);
    std::vector<int> y{0, 1};
    const double temp = 4.0;

    BundleCache cache;
    BundleOut out = bundle_forward(m, x, Mode::Train, &cache);
    LossGrads lg;
    total_loss(out.tcn.logits, out.lstm.logits, out.fusion_logits, y, temp, {}, &lg);
    ModelBundle grads = make_grads(m);
    bundle_backward(m, cache, lg.dtcn, lg.dlstm, lg.dfusion, grads);

    // freeze the detached teacher at the base point
    Tensor teacher({2, 2});
    for (size_t bi = 0; bi < 2; ++bi) {
        auto p = soften(&out.fusion_logits.v[bi * 2], 2, temp);
        for (size_t j = 0; j < 2; ++j) teacher(bi, j) = p.probs[j];
    }

    auto loss = [&] {
        BundleOut o = bundle_forward(m, x, Mode::Train);
        return total_loss(o.tcn.logits, o.lstm.logits, o.fusion_logits, y, temp, {}, nullptr,
                          &teacher)
            .total;
    };

    auto params = named_tensors(m);
    auto gparams = named_tensors(grads);
    REQUIRE(params.size() == gparams.size());
    std::vector<std::pair<Tensor*, const Tensor*>> checked;
    for (size_t i = 0; i < params.size(); ++i) {
        REQUIRE(params[i].name == gparams[i].name);
        if (params[i].trainable) checked.push_back({params[i].tensor, gparams[i].tensor});
    }
    CHECK(fd_max_rel_err(loss, checked, 1e-5) < 1e-3);
}

TEST_CASE("fusion gradient reaches both feature paths") {
    ModelBundle m = make_bundle(Task::Paretic, 2, 8, 37, tiny_tcn(), tiny_lstm());
    Rng rng(37);
    Tensor ft = random_tensor({2, 4}, rng);
    Tensor fl = random_tensor({2, 3}, rng);
    Tensor wlog = random_tensor({2, 2}, rng);

    FusionCache cache;
    fusion_forward(m.fusion, ft, fl, &cache);
    ModelBundle grads = make_grads(m);
    FusionInGrads fg = fusion_backward(m.fusion, cache, wlog, grads.fusion);

    auto loss = [&] {
        Tensor logits = fusion_forward(m.fusion, ft, fl);
        return testutil::weighted_sum(logits, wlog);
    };
    double err = fd_max_rel_err(
        loss, {{&ft, &fg.dtcn_in},
               {&fl, &fg.dlstm_in},
               {&m.fusion.fc.w, &grads.fusion.fc.w},
               {&m.fusion.fc.b, &grads.fusion.fc.b}});
    CHECK(err < 1e-4);
}

TEST_CASE("logits fusion mode trains through subnet logits") {
    FusionConfig fc;
    fc.input = FusionInput::Logits;
    ModelBundle m = make_bundle(Task::Paretic, 2, 8, 41, tiny_tcn(), tiny_lstm(), fc);
    CHECK(m.fusion.fc.w.shape[0] == 4);  // 2N

    Rng rng(41);
    Tensor x = random_tensor({2, 8, 2}, rng);
    std::vector<int> y{1, 0};
    BundleCache cache;
    BundleOut out = bundle_forward(m, x, Mode::Train, &cache);
    LossGrads lg;
    total_loss(out.tcn.logits, out.lstm.logits, out.fusion_logits, y, 4.0, {}, &lg);
    ModelBundle grads = make_grads(m);
    bundle_backward(m, cache, lg.dtcn, lg.dlstm, lg.dfusion, grads);

    Tensor teacher({2, 2});
    for (size_t bi = 0; bi < 2; ++bi) {
        auto p = soften(&out.fusion_logits.v[bi * 2], 2, 4.0);
        for (size_t j = 0; j < 2; ++j) teacher(bi, j) = p.probs[j];
    }
    auto loss = [&] {
        BundleOut o = bundle_forward(m, x, Mode::Train);
        return total_loss(o.tcn.logits, o.lstm.logits, o.fusion_logits, y, 4.0, {}, nullptr,
                          &teacher)
            .total;
    };
    std::vector<std::pair<Tensor*, const Tensor*>> checked{
        {&m.tcn.stem.w, &grads.tcn.stem.w},
        {&m.lstm.layers[0].wx, &grads.lstm.layers[0].wx},
        {&m.fusion.fc.w, &grads.fusion.fc.w}};
    CHECK(fd_max_rel_err(loss, checked, 1e-5) < 1e-3);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    TempDir dir;
    ModelBundle m = make_bundle(Task::Action, 5, 16, 99, tiny_tcn(), tiny_lstm());
    Rng rng(99);
    Tensor x = random_tensor({4, 16, 5}, rng);
    bundle_forward(m, x, Mode::Train);  // nontrivial BN running stats

    std::string path = dir.file("model.ckpt");
    save_checkpoint(path, m, R"({"note": "round-trip"})");
    std::string extra;
    ModelBundle loaded = load_checkpoint(path, &extra);

    CHECK(loaded.task == Task::Action);
    CHECK(loaded.num_classes == 9);
    CHECK(loaded.in_channels == 5);
    CHECK(loaded.window_len == 16);
    CHECK(extra.find("round-trip") != std::string::npos);

    auto a = named_tensors(m);
    auto b = named_tensors(loaded);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].tensor->v == b[i].tensor->v);
    }
    for (size_t i = 0; i < m.tcn.blocks.size(); ++i)
        CHECK(loaded.tcn.blocks[i].bn.state.initialized == m.tcn.blocks[i].bn.state.initialized);

    // eval-mode forward through the loaded model is bit-identical
    BundleOut oa = bundle_forward(m, x, Mode::Eval);
    BundleOut ob = bundle_forward(loaded, x, Mode::Eval);
    CHECK(oa.fusion_logits.v == ob.fusion_logits.v);

    // save -> load -> save produces identical bytes
    std::string path2 = dir.file("model2.ckpt");
    save_checkpoint(path2, loaded, R"({"note": "round-trip"})");
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
}

TEST_CASE("checkpoint rejects foreign files") {
    TempDir dir;
    testutil::write_file(dir.file("junk.ckpt"), "not a checkpoint at all");
    CHECK_THROWS_AS(load_checkpoint(dir.file("junk.ckpt")), ParseError);
    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), ParseError);
}
