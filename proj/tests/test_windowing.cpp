#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "paresis/windowing.hpp"
#include "testutil.hpp"

using namespace paresis;
using testutil::TempDir;
using testutil::write_file;

namespace {

const char* kSidecar = R"({
  "id": "rec1", "paretic_side": "Left", "action": "drinking",
  "age": 63, "sex": "F", "impairment": "Moderate",
  "time_since_stroke_days": 120.0, "ue_fma": 41
})";

Recording make_recording(size_t l, size_t f, const std::string& id = "r") {
    Recording rec;
    rec.id = id;
    for (size_t i = 0; i < f; ++i) rec.channels.push_back("ch" + std::to_string(i + 1));
    rec.samples = nd::Tensor({l, f});
    for (size_t i = 0; i < l * f; ++i) rec.samples.v[i] = static_cast<double>(i);
    rec.paretic_side = "Left";
    rec.action = "feeding";
    return rec;
}

}  // namespace

TEST_CASE("csv ingest reads shape and labels") {
    TempDir dir;
    write_file(dir.file("rec1.csv"),
               "time,accel_x,accel_y\n0.00,1.5,2.5\n0.01,3.5,4.5\n0.02,5.5,6.5\n");
    write_file(dir.file("rec1.meta.json"), kSidecar);

    Recording rec = ingest_recording(dir.file("rec1.csv"));
    CHECK(rec.length() == 3);
    CHECK(rec.num_channels() == 2);
    CHECK(rec.channels == std::vector<std::string>{"accel_x", "accel_y"});
    CHECK(rec.samples(1, 1) == 4.5);
    CHECK(rec.id == "rec1");
    CHECK(rec.paretic_side == "Left");
    CHECK(rec.action == "drinking");
    CHECK(rec.meta.age_years == 63);
    CHECK(rec.meta.sex == "F");
    CHECK(rec.meta.impairment == "Moderate");
    CHECK(rec.meta.ue_fma.value() == 41);
    CHECK(rec.sample_rate_hz == doctest::Approx(100.0));
}

TEST_CASE("csv ingest rejects NaN values") {
    TempDir dir;
    write_file(dir.file("bad.csv"), "time,a\n0.0,1.0\n0.01,NaN\n");
    write_file(dir.file("bad.meta.json"), kSidecar);
    CHECK_THROWS_AS(ingest_recording(dir.file("bad.csv")), ValidationError);
}

TEST_CASE("csv ingest names the malformed line") {
    TempDir dir;
    write_file(dir.file("bad.csv"), "time,a,b\n0.0,1.0,2.0\n0.01,3.0\n");
    write_file(dir.file("bad.meta.json"), kSidecar);
    try {
        ingest_recording(dir.file("bad.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("csv ingest rejects unparseable numbers") {
    TempDir dir;
    write_file(dir.file("bad.csv"), "time,a\n0.0,1.0\n0.01,oops\n");
    write_file(dir.file("bad.meta.json"), kSidecar);
    CHECK_THROWS_AS(ingest_recording(dir.file("bad.csv")), ParseError);
}

TEST_CASE("sidecar validation") {
    TempDir dir;
    write_file(dir.file("r.csv"), "time,a\n0.0,1.0\n");

    SUBCASE("missing required field") {
        write_file(dir.file("r.meta.json"), R"({"id": "r", "paretic_side": "Left"})");
        CHECK_THROWS_AS(ingest_recording(dir.file("r.csv")), ParseError);
    }
    SUBCASE("unknown action") {
        write_file(dir.file("r.meta.json"), R"({
          "id": "r", "paretic_side": "Left", "action": "juggling",
          "age": 60, "sex": "M", "impairment": "Mild", "time_since_stroke_days": 10})");
        CHECK_THROWS_AS(ingest_recording(dir.file("r.csv")), ValidationError);
    }
    SUBCASE("bad paretic side") {
        write_file(dir.file("r.meta.json"), R"({
          "id": "r", "paretic_side": "Both", "action": "feeding",
          "age": 60, "sex": "M", "impairment": "Mild", "time_since_stroke_days": 10})");
        CHECK_THROWS_AS(ingest_recording(dir.file("r.csv")), ValidationError);
    }
    SUBCASE("ue_fma out of range") {
        write_file(dir.file("r.meta.json"), R"({
          "id": "r", "paretic_side": "Left", "action": "feeding",
          "age": 60, "sex": "M", "impairment": "Mild", "time_since_stroke_days": 10,
          "ue_fma": 80})");
        CHECK_THROWS_AS(ingest_recording(dir.file("r.csv")), ValidationError);
    }
    SUBCASE("ue_fma absent is fine") {
        write_file(dir.file("r.meta.json"), R"({
          "id": "r", "paretic_side": "Left", "action": "feeding",
          "age": 60, "sex": "M", "impairment": "Mild", "time_since_stroke_days": 10})");
        Recording rec = ingest_recording(dir.file("r.csv"));
        CHECK_FALSE(rec.meta.ue_fma.has_value());
    }
}

TEST_CASE("jsonl ingest") {
    TempDir dir;
    write_file(dir.file("r.jsonl"),
               "{\"time\": 0.0, \"values\": [1.0, 2.0]}\n"
               "{\"time\": 0.01, \"values\": [3.0, 4.0]}\n");
    write_file(dir.file("r.meta.json"), kSidecar);
    Recording rec = ingest_recording(dir.file("r.jsonl"));
    CHECK(rec.length() == 2);
    CHECK(rec.num_channels() == 2);
    CHECK(rec.samples(1, 0) == 3.0);
    CHECK(rec.channels == std::vector<std::string>{"ch1", "ch2"});

    write_file(dir.file("bad.jsonl"),
               "{\"time\": 0.0, \"values\": [1.0, 2.0]}\n"
               "{\"time\": 0.01, \"values\": [3.0]}\n");
    write_file(dir.file("bad.meta.json"), kSidecar);
    CHECK_THROWS_AS(ingest_recording(dir.file("bad.jsonl")), ParseError);
}

TEST_CASE("slide_windows hand cases") {
    Recording rec = make_recording(100, 1);
    auto ws = slide_windows(rec, 64, 32);
    REQUIRE(ws.size() == 2);
    CHECK(ws[0].offset == 0);
    CHECK(ws[1].offset == 32);
    CHECK(ws[1].data(0, 0) == 32.0);

    rec = make_recording(64, 1);
    ws = slide_windows(rec, 64, 32);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].offset == 0);

    rec = make_recording(10, 1);
    ws = slide_windows(rec, 4, 2);
    REQUIRE(ws.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(ws[i].offset == 2 * i);
}

TEST_CASE("slide_windows too-short recording yields empty list") {
    Recording rec = make_recording(10, 2);
    CHECK(slide_windows(rec, 11, 5).empty());
    CHECK_THROWS_AS(slide_windows(rec, 4, 0), ContractError);
    CHECK_THROWS_AS(slide_windows(rec, 0, 2), ContractError);
}

TEST_CASE("window count matches a scan oracle on random shapes") {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        size_t l = 1 + rng.below(200);
        size_t t = 1 + rng.below(80);
        size_t skip = 1 + rng.below(40);
        Recording rec = make_recording(l, 1);
        auto ws = slide_windows(rec, t, skip);

        size_t oracle = 0;
        for (size_t off = 0; off + t <= l; off += skip) ++oracle;
        CHECK(ws.size() == oracle);
        if (t <= l) CHECK(ws.size() == (l - t) / skip + 1);
    }
}

TEST_CASE("consecutive windows at skip=T/2 share exactly T/2 rows") {
    for (size_t t : {size_t{32}, size_t{64}}) {
        Recording rec = make_recording(5 * t, 3);
        auto ws = slide_windows(rec, t, t / 2);
        REQUIRE(ws.size() >= 2);
        for (size_t i = 1; i < ws.size(); ++i) {
            const auto& a = ws[i - 1].data;
            const auto& b = ws[i].data;
            for (size_t r = 0; r < t / 2; ++r)
                for (size_t c = 0; c < 3; ++c) CHECK(a(r + t / 2, c) == b(r, c));
        }
    }
}

TEST_CASE("normalize_window subtracts the first row per channel") {
    Window w;
    w.data = nd::Tensor({3, 1}, {3, 5, 4});
    auto n = normalize_window(w);
    CHECK(n.data.v == std::vector<double>{0, 2, 1});

    w.data = nd::Tensor({3, 1}, {7, 7, 7});
    CHECK(normalize_window(w).data.v == std::vector<double>{0, 0, 0});

    // idempotent once the first row is zero
    w.data = nd::Tensor({3, 2}, {1, -2, 4, 0, 2, 9});
    auto once = normalize_window(w);
    auto twice = normalize_window(once);
    CHECK(once.data.v == twice.data.v);
    for (size_t c = 0; c < 2; ++c) CHECK(once.data(0, c) == 0.0);
}

TEST_CASE("build_dataset partitions by recording") {
    std::vector<Recording> recs;
    for (int i = 0; i < 10; ++i) {
        Recording r = make_recording(40, 2, "rec" + std::to_string(i));
        recs.push_back(r);
    }
    SplitSpec split{0.8, 0.1, 0.1, 7};
    Dataset ds = build_dataset(recs, Task::Paretic, 16, 8, split);

    auto ids = [](const std::vector<NormalizedWindow>& ws) {
        std::set<std::string> s;
        for (const auto& w : ws) s.insert(w.source_id);
        return s;
    };
    auto tr = ids(ds.train), va = ids(ds.val), te = ids(ds.test);
    CHECK(tr.size() == 8);
    CHECK(va.size() == 1);
    CHECK(te.size() == 1);
    for (const auto& id : va) CHECK(tr.count(id) == 0);
    for (const auto& id : te) {
        CHECK(tr.count(id) == 0);
        CHECK(va.count(id) == 0);
    }
    // every window normalized
    for (const auto& w : ds.train)
        for (size_t c = 0; c < 2; ++c) CHECK(w.data(0, c) == 0.0);
}

TEST_CASE("build_dataset split determinism") {
    std::vector<Recording> recs;
    for (int i = 0; i < 12; ++i) recs.push_back(make_recording(30, 1, "rec" + std::to_string(i)));

    auto test_ids = [&](uint64_t seed) {
        SplitSpec split{0.7, 0.15, 0.15, seed};
        Dataset ds = build_dataset(recs, Task::Action, 10, 5, split);
        std::set<std::string> s;
        for (const auto& w : ds.test) s.insert(w.source_id);
        return s;
    };

    CHECK(test_ids(3) == test_ids(3));

    int differing = 0;
    auto base = test_ids(0);
    for (uint64_t seed = 1; seed <= 20; ++seed)
        if (test_ids(seed) != base) ++differing;
    CHECK(differing > 0);
}

TEST_CASE("build_dataset rejects bad fractions") {
    std::vector<Recording> recs{make_recording(30, 1)};
    CHECK_THROWS_AS(build_dataset(recs, Task::Paretic, 8, 4, SplitSpec{0.9, 0.2, 0.1, 0}),
                    ConfigError);
    CHECK_THROWS_AS(build_dataset(recs, Task::Paretic, 8, 4, SplitSpec{1.2, -0.1, -0.1, 0}),
                    ConfigError);
    CHECK_THROWS_AS(build_dataset({}, Task::Paretic, 8, 4, SplitSpec{}), ContractError);
}

TEST_CASE("task helpers") {
    CHECK(task_classes(Task::Paretic) == 2);
    CHECK(task_classes(Task::Action) == 9);
    CHECK(action_index("RTT") == 7);
    CHECK(action_index("unknown") == -1);
    CHECK(paretic_index("Right") == 1);
    CHECK(task_from_name("action") == Task::Action);
    CHECK_THROWS_AS(task_from_name("both"), ConfigError);

    Window w;
    w.data = nd::Tensor({1, 1}, {0.0});
    w.paretic_side = "Right";
    w.action = "shelf";
    CHECK(window_label(w, Task::Paretic) == 1);
    CHECK(window_label(w, Task::Action) == 8);
}
