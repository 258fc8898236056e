#include "paresis/windowing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "paresis/common.hpp"
#include "paresis/rng.hpp"

namespace paresis {

int action_index(std::string_view name) {
    for (size_t i = 0; i < kActions.size(); ++i)
        if (kActions[i] == name) return static_cast<int>(i);
    return -1;
}

int paretic_index(std::string_view side) {
    if (side == "Left") return 0;
    if (side == "Right") return 1;
    return -1;
}

size_t task_classes(Task t) { return t == Task::Paretic ? 2 : kActions.size(); }

const char* task_name(Task t) { return t == Task::Paretic ? "paretic" : "action"; }

Task task_from_name(std::string_view name) {
    if (name == "paretic") return Task::Paretic;
    if (name == "action") return Task::Action;
    throw ConfigError("unknown task '" + std::string(name) + "' (expected paretic|action)");
}

int window_label(const Window& w, Task t) {
    int idx = t == Task::Paretic ? paretic_index(w.paretic_side) : action_index(w.action);
    if (idx < 0)
        throw ValidationError("window from '" + w.source_id + "' carries no valid " +
                              std::string(task_name(t)) + " label");
    return idx;
}

namespace {

double parse_double(std::string_view tok, const std::string& where) {
    double out = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ParseError(where + ": cannot parse number '" + std::string(tok) + "'");
    if (!std::isfinite(out))
        throw ValidationError(where + ": non-finite value '" + std::string(tok) + "'");
    return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

double infer_sample_rate(const std::vector<double>& times) {
    if (times.size() < 2) return 100.0;
    double span = times.back() - times.front();
    if (span <= 0.0) return 100.0;
    return static_cast<double>(times.size() - 1) / span;
}

void load_sidecar(const std::string& data_path, Recording& rec) {
    std::filesystem::path side(data_path);
    side.replace_extension(".meta.json");
    Recording meta = read_sidecar(side.string());
    rec.id = std::move(meta.id);
    rec.paretic_side = std::move(meta.paretic_side);
    rec.action = std::move(meta.action);
    rec.meta = std::move(meta.meta);
}

Recording ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    Recording rec;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    strip_cr(line);
    auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "time")
        throw ParseError("'" + path + "': header must be 'time,<ch1>,...'");
    for (size_t i = 1; i < header.size(); ++i) rec.channels.emplace_back(header[i]);

    const size_t f = rec.channels.size();
    std::vector<double> values;
    std::vector<double> times;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        auto tok = split_csv(line);
        if (tok.size() != f + 1)
            throw ParseError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                             std::to_string(f + 1) + " fields, got " + std::to_string(tok.size()));
        std::string where = "'" + path + "' line " + std::to_string(lineno);
        times.push_back(parse_double(tok[0], where));
        for (size_t i = 1; i < tok.size(); ++i) values.push_back(parse_double(tok[i], where));
    }
    if (times.empty()) throw ParseError("'" + path + "': no sample rows");

    rec.samples = nd::Tensor({times.size(), f}, std::move(values));
    rec.sample_rate_hz = infer_sample_rate(times);
    return rec;
}

Recording ingest_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    Recording rec;
    std::vector<double> values;
    std::vector<double> times;
    size_t f = 0;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        std::string where = "'" + path + "' line " + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("time") || !j.contains("values") ||
            !j["values"].is_array())
            throw ParseError(where + ": expected {\"time\": t, \"values\": [...]}");
        const auto& vals = j["values"];
        if (f == 0) {
            f = vals.size();
            if (f == 0) throw ParseError(where + ": empty values array");
        } else if (vals.size() != f) {
            throw ParseError(where + ": expected " + std::to_string(f) + " values, got " +
                             std::to_string(vals.size()));
        }
        double t = j["time"].is_number() ? j["time"].get<double>()
                                         : throw ParseError(where + ": time is not a number");
        if (!std::isfinite(t)) throw ValidationError(where + ": non-finite time");
        times.push_back(t);
        for (const auto& v : vals) {
            if (!v.is_number()) throw ParseError(where + ": non-numeric value");
            double d = v.get<double>();
            if (!std::isfinite(d)) throw ValidationError(where + ": non-finite value");
            values.push_back(d);
        }
    }
    if (times.empty()) throw ParseError("'" + path + "': no sample rows");

    for (size_t i = 1; i <= f; ++i) rec.channels.push_back("ch" + std::to_string(i));
    rec.samples = nd::Tensor({times.size(), f}, std::move(values));
    rec.sample_rate_hz = infer_sample_rate(times);
    return rec;
}

}  // namespace

Recording read_sidecar(const std::string& sidecar_path) {
    std::ifstream in(sidecar_path);
    if (!in) throw ParseError("cannot open sidecar '" + sidecar_path + "'");

    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("sidecar '" + sidecar_path + "': " + e.what());
    }

    auto require = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end())
            throw ParseError("sidecar '" + sidecar_path + "': missing field '" + key + "'");
        return *it;
    };

    Recording rec;
    try {
        rec.id = require("id").get<std::string>();
        rec.paretic_side = require("paretic_side").get<std::string>();
        rec.action = require("action").get<std::string>();
        rec.meta.age_years = require("age").get<int>();
        rec.meta.sex = require("sex").get<std::string>();
        rec.meta.impairment = require("impairment").get<std::string>();
        rec.meta.time_since_stroke_days = require("time_since_stroke_days").get<double>();
        if (j.contains("ue_fma") && !j["ue_fma"].is_null())
            rec.meta.ue_fma = j["ue_fma"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("sidecar '" + sidecar_path + "': " + e.what());
    }

    if (paretic_index(rec.paretic_side) < 0)
        throw ValidationError("sidecar '" + sidecar_path + "': paretic_side '" +
                              rec.paretic_side + "' not in {Left, Right}");
    if (action_index(rec.action) < 0)
        throw ValidationError("sidecar '" + sidecar_path + "': unknown action '" + rec.action +
                              "'");
    if (rec.meta.sex != "F" && rec.meta.sex != "M")
        throw ValidationError("sidecar '" + sidecar_path + "': sex '" + rec.meta.sex +
                              "' not in {F, M}");
    if (rec.meta.impairment != "Mild" && rec.meta.impairment != "Moderate" &&
        rec.meta.impairment != "Severe")
        throw ValidationError("sidecar '" + sidecar_path + "': impairment '" +
                              rec.meta.impairment + "' not in {Mild, Moderate, Severe}");
    if (rec.meta.age_years < 0)
        throw ValidationError("sidecar '" + sidecar_path + "': negative age");
    if (rec.meta.time_since_stroke_days < 0)
        throw ValidationError("sidecar '" + sidecar_path +
                              "': negative time_since_stroke_days");
    if (rec.meta.ue_fma && (*rec.meta.ue_fma < 0 || *rec.meta.ue_fma > 66))
        throw ValidationError("sidecar '" + sidecar_path + "': ue_fma outside [0, 66]");
    return rec;
}

Recording ingest_recording(const std::string& path, DataFormat format) {
    Recording rec = format == DataFormat::Csv ? ingest_csv(path) : ingest_jsonl(path);
    load_sidecar(path, rec);
    return rec;
}

Recording ingest_recording(const std::string& path) {
    std::filesystem::path p(path);
    auto ext = p.extension().string();
    if (ext == ".csv") return ingest_recording(path, DataFormat::Csv);
    if (ext == ".jsonl") return ingest_recording(path, DataFormat::Jsonl);
    throw ConfigError("cannot infer format from extension '" + ext + "' (expected .csv|.jsonl)");
}

std::vector<Window> slide_windows(const Recording& rec, size_t window_len, size_t skip) {
    if (window_len < 1) throw ContractError("slide_windows: window_len must be >= 1");
    if (skip < 1) throw ContractError("slide_windows: skip must be >= 1");

    const size_t l = rec.length();
    const size_t f = rec.num_channels();
    std::vector<Window> out;
    if (window_len > l) return out;  // recording too short

    const size_t count = (l - window_len) / skip + 1;
    out.reserve(count);
    for (size_t w = 0; w < count; ++w) {
        const size_t off = w * skip;
        Window win;
        win.data = nd::Tensor({window_len, f});
        std::copy_n(rec.samples.v.begin() + static_cast<ptrdiff_t>(off * f), window_len * f,
                    win.data.v.begin());
        win.source_id = rec.id;
        win.offset = off;
        win.paretic_side = rec.paretic_side;
        win.action = rec.action;
        out.push_back(std::move(win));
    }
    return out;
}

NormalizedWindow normalize_window(const Window& w) {
    NormalizedWindow out = w;
    const size_t t = w.data.shape[0];
    const size_t f = w.data.shape[1];
    for (size_t n = 0; n < t; ++n)
        for (size_t c = 0; c < f; ++c) out.data.v[n * f + c] = w.data.v[n * f + c] - w.data.v[c];
    return out;
}

Dataset build_dataset(const std::vector<Recording>& recordings, Task task, size_t window_len,
                      size_t skip, const SplitSpec& split) {
    if (recordings.empty()) throw ContractError("build_dataset: no recordings");
    for (double fr : {split.train, split.val, split.test})
        if (fr < 0.0 || fr > 1.0)
            throw ConfigError("build_dataset: split fraction outside [0, 1]");
    if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
        throw ConfigError("build_dataset: split fractions must sum to 1");

    const size_t f = recordings.front().num_channels();
    for (const auto& rec : recordings)
        if (rec.num_channels() != f)
            throw ContractError("build_dataset: channel count mismatch between recordings (" +
                                std::to_string(f) + " vs " + std::to_string(rec.num_channels()) +
                                ")");

    const size_t n = recordings.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(mix_seed(split.seed, 0x9d151));
    rng.shuffle(order);

    // largest-remainder apportionment keeps each split within one recording
    // of its exact share
    const double fracs[3] = {split.train, split.val, split.test};
    size_t counts[3];
    double rem[3];
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = static_cast<double>(n) * fracs[i];
        counts[i] = static_cast<size_t>(exact);
        rem[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }

    Dataset ds;
    ds.task = task;
    ds.window_len = window_len;
    ds.skip = skip;
    ds.num_channels = f;
    std::vector<NormalizedWindow>* dests[3] = {&ds.train, &ds.val, &ds.test};
    size_t pos = 0;
    for (int part = 0; part < 3; ++part) {
        for (size_t k = 0; k < counts[part]; ++k) {
            const Recording& rec = recordings[order[pos++]];
            for (const Window& w : slide_windows(rec, window_len, skip))
                dests[part]->push_back(normalize_window(w));
        }
    }
    for (const auto* dest : dests)
        for (const auto& w : *dest) window_label(w, task);  // validate labels up front
    return ds;
}

}  // namespace paresis
