#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "paresis/causal.hpp"
#include "paresis/common.hpp"
#include "paresis/distill.hpp"
#include "paresis/metrics.hpp"
#include "paresis/models.hpp"
#include "paresis/synthgen.hpp"
#include "paresis/train.hpp"
#include "paresis/windowing.hpp"

namespace fs = std::filesystem;
using namespace paresis;

namespace {

std::vector<std::string> class_names(Task task) {
    if (task == Task::Paretic) return {"Left", "Right"};
    return std::vector<std::string>(kActions.begin(), kActions.end());
}

fs::path ensure_out(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw Error("write failed for '" + path.string() + "'");
}

// every command records what it ran with and what it produced
struct Manifest {
    nlohmann::json j;
    fs::path dir;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Manifest(const std::string& command, const fs::path& out_dir) : dir(out_dir) {
        j["command"] = command;
        j["version"] = kVersion;
        j["config"] = nlohmann::json::object();
        j["inputs"] = nlohmann::json::object();
        j["outputs"] = nlohmann::json::object();
    }
    void write() {
        std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
        j["duration_seconds"] = d.count();
        write_text(dir / "run_manifest.json", j.dump(2) + "\n");
    }
};

// flags shared by preprocess / train; evaluate restores them from the
// checkpoint instead so the split matches the training run
struct DataFlags {
    std::string data;
    std::string task = "paretic";
    size_t window = 64;
    size_t skip = 0;  // 0 means window / 2
    double train_frac = 0.7, val_frac = 0.15, test_frac = 0.15;
    uint64_t split_seed = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--data", data, "directory of recording CSVs + sidecars")
            ->required();
        cmd->add_option("--task", task, "paretic|action")
            ->check(CLI::IsMember({"paretic", "action"}));
        cmd->add_option("--window", window, "window length in samples");
        cmd->add_option("--skip", skip, "window stride in samples (default window/2)");
        cmd->add_option("--train-frac", train_frac, "recording fraction for training");
        cmd->add_option("--val-frac", val_frac, "recording fraction for validation");
        cmd->add_option("--test-frac", test_frac, "recording fraction for testing");
        cmd->add_option("--split-seed", split_seed, "seed for the recording split");
    }
    size_t effective_skip() const {
        if (skip > 0) return skip;
        return window / 2 > 0 ? window / 2 : 1;
    }
    Dataset build() const {
        std::vector<Recording> recs = ingest_dir(data);
        if (recs.empty()) throw ValidationError("no recordings found under '" + data + "'");
        SplitSpec split{train_frac, val_frac, test_frac, split_seed};
        return build_dataset(recs, task_from_name(task), window, effective_skip(), split);
    }
    nlohmann::json config_json() const {
        return {{"data", data},          {"task", task},
                {"window", window},      {"skip", effective_skip()},
                {"train_frac", train_frac}, {"val_frac", val_frac},
                {"test_frac", test_frac},   {"split_seed", split_seed}};
    }
};

nlohmann::json split_histogram(const std::vector<NormalizedWindow>& ws, Task task) {
    std::vector<std::string> names = class_names(task);
    std::vector<size_t> counts(names.size(), 0);
    for (const NormalizedWindow& w : ws) counts[static_cast<size_t>(window_label(w, task))]++;
    nlohmann::json out;
    for (size_t i = 0; i < names.size(); ++i) out[names[i]] = counts[i];
    return out;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
    std::string out;
    SynthSpec spec;
};

int cmd_synth(const SynthFlags& f) {
    fs::path dir = ensure_out(f.out);
    Manifest m("synth", dir);
    m.j["config"] = {{"subjects", f.spec.n_subjects},
                     {"recordings_per_subject", f.spec.recordings_per_subject},
                     {"length", f.spec.length},
                     {"channels", f.spec.channels},
                     {"sample_rate_hz", f.spec.sample_rate_hz},
                     {"asymmetry", f.spec.asymmetry_factor},
                     {"noise_sigma", f.spec.noise_sigma},
                     {"seed", f.spec.seed}};
    m.j["seed"] = f.spec.seed;

    std::vector<Recording> recs = generate(f.spec);
    export_dataset(recs, dir.string());
    m.j["outputs"]["dataset"] = (dir / "dataset.json").string();
    m.j["outputs"]["recordings"] = recs.size();
    m.write();
    std::cout << "wrote " << recs.size() << " recordings (" << f.spec.length << " x "
              << f.spec.channels << " at " << f.spec.sample_rate_hz << " Hz) to " << dir.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessFlags {
    DataFlags data;
    std::string out;
};

std::string window_index_csv(const std::vector<NormalizedWindow>& ws, Task task) {
    std::string csv = "source_id,offset,label_index,label\n";
    std::vector<std::string> names = class_names(task);
    for (const NormalizedWindow& w : ws) {
        int label = window_label(w, task);
        csv += w.source_id + "," + std::to_string(w.offset) + "," + std::to_string(label) + "," +
               names[static_cast<size_t>(label)] + "\n";
    }
    return csv;
}

int cmd_preprocess(const PreprocessFlags& f) {
    fs::path dir = ensure_out(f.out);
    Manifest m("preprocess", dir);
    m.j["config"] = f.data.config_json();
    m.j["seed"] = f.data.split_seed;
    m.j["inputs"]["data"] = f.data.data;

    Dataset d = f.data.build();
    Task task = d.task;
    write_text(dir / "windows_train.csv", window_index_csv(d.train, task));
    write_text(dir / "windows_val.csv", window_index_csv(d.val, task));
    write_text(dir / "windows_test.csv", window_index_csv(d.test, task));

    nlohmann::json summary;
    summary["task"] = task_name(task);
    summary["window"] = d.window_len;
    summary["skip"] = d.skip;
    summary["channels"] = d.num_channels;
    summary["counts"] = {{"train", d.train.size()}, {"val", d.val.size()},
                         {"test", d.test.size()}};
    summary["labels"] = {{"train", split_histogram(d.train, task)},
                         {"val", split_histogram(d.val, task)},
                         {"test", split_histogram(d.test, task)}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    for (const char* name : {"windows_train.csv", "windows_val.csv", "windows_test.csv",
                             "summary.json"})
        m.j["outputs"][name] = (dir / name).string();
    m.write();
    std::cout << "windowed " << d.train.size() << "/" << d.val.size() << "/" << d.test.size()
              << " train/val/test windows of " << d.window_len << " x " << d.num_channels
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
    DataFlags data;
    std::string out;
    std::string model = "fused";
    std::string fusion_input = "features";
    size_t epochs = 20;
    size_t batch = 64;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double temperature = 4.0;
    uint64_t seed = 0;
    bool soft_ce = false;
    bool fkd_t2 = false;
};

int cmd_train(const TrainFlags& f) {
    fs::path dir = ensure_out(f.out);
    Manifest m("train", dir);
    nlohmann::json cfg = f.data.config_json();
    cfg["model"] = f.model;
    cfg["fusion_input"] = f.fusion_input;
    cfg["epochs"] = f.epochs;
    cfg["batch"] = f.batch;
    cfg["lr"] = f.lr;
    cfg["weight_decay"] = f.weight_decay;
    cfg["temperature"] = f.temperature;
    cfg["seed"] = f.seed;
    cfg["soft_ce"] = f.soft_ce;
    cfg["fkd_t2_scaling"] = f.fkd_t2;
    m.j["config"] = cfg;
    m.j["seed"] = f.seed;
    m.j["inputs"]["data"] = f.data.data;

    Dataset d = f.data.build();
    FusionConfig fusion;
    fusion.input = fusion_input_from_name(f.fusion_input);
    ModelBundle model = make_bundle(d.task, d.num_channels, d.window_len, f.seed, ResTcnConfig{},
                                    LstmNetConfig{}, fusion);

    TrainConfig tc;
    tc.temperature = f.temperature;
    tc.lr = f.lr;
    tc.adam.weight_decay = f.weight_decay;
    tc.batch_size = f.batch;
    tc.epochs = f.epochs;
    tc.seed = f.seed;
    tc.flags.soft_ce = f.soft_ce;
    tc.flags.fkd_t2_scaling = f.fkd_t2;
    tc.mode = model_mode_from_name(f.model);

    TrainResult res = train(std::move(model), d, tc);

    nlohmann::json extra = cfg;
    extra["trained_as"] = f.model;
    extra["best_epoch"] = res.best_epoch;
    extra["best_val_accuracy"] = res.best_val_accuracy;
    fs::path ckpt = dir / "checkpoint.bin";
    save_checkpoint(ckpt.string(), res.best, extra.dump());
    write_text(dir / "history.csv", history_csv(res.history));

    m.j["outputs"]["checkpoint"] = ckpt.string();
    m.j["outputs"]["history"] = (dir / "history.csv").string();
    m.j["outputs"]["best_epoch"] = res.best_epoch;
    m.j["outputs"]["best_val_accuracy"] = res.best_val_accuracy;
    m.write();
    std::printf("trained %s on %s for %zu epochs: best val accuracy %.4f at epoch %zu\n",
                f.model.c_str(), task_name(d.task), f.epochs, res.best_val_accuracy,
                res.best_epoch);
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateFlags {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string split = "test";
    std::string model;  // override; default: the mode the checkpoint trained as
};

int cmd_evaluate(const EvaluateFlags& f) {
    fs::path dir = ensure_out(f.out);
    Manifest m("evaluate", dir);
    m.j["inputs"]["checkpoint"] = f.checkpoint;
    m.j["inputs"]["data"] = f.data;

    std::string extra_text;
    ModelBundle model = load_checkpoint(f.checkpoint, &extra_text);
    nlohmann::json extra = nlohmann::json::parse(extra_text, nullptr, false);
    if (extra.is_discarded() || !extra.contains("window") || !extra.contains("skip") ||
        !extra.contains("split_seed"))
        throw ParseError("checkpoint '" + f.checkpoint +
                         "' lacks training provenance; re-train with this tool");

    DataFlags df;
    df.data = f.data;
    df.task = task_name(model.task);
    df.window = extra["window"].get<size_t>();
    df.skip = extra["skip"].get<size_t>();
    df.train_frac = extra["train_frac"].get<double>();
    df.val_frac = extra["val_frac"].get<double>();
    df.test_frac = extra["test_frac"].get<double>();
    df.split_seed = extra["split_seed"].get<uint64_t>();

    std::string mode_name =
        !f.model.empty() ? f.model : extra.value("trained_as", std::string("fused"));
    ModelMode mode = model_mode_from_name(mode_name);

    nlohmann::json cfg = df.config_json();
    cfg["split"] = f.split;
    cfg["model"] = mode_name;
    m.j["config"] = cfg;
    m.j["seed"] = df.split_seed;

    Dataset d = df.build();
    std::vector<NormalizedWindow> ws;
    if (f.split == "train")
        ws = d.train;
    else if (f.split == "val")
        ws = d.val;
    else if (f.split == "test")
        ws = d.test;
    else {
        ws = d.train;
        ws.insert(ws.end(), d.val.begin(), d.val.end());
        ws.insert(ws.end(), d.test.begin(), d.test.end());
    }
    if (ws.empty()) throw ValidationError("split '" + f.split + "' holds no windows");

    std::vector<int> pred = predict(model, ws, mode);
    std::vector<int> truth(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) truth[i] = window_label(ws[i], d.task);

    ConfusionMatrix cm = confusion(truth, pred, model.num_classes, class_names(d.task));
    MetricReport rep = report(cm);

    write_text(dir / "metrics.csv", metrics_csv(rep, cm));
    write_text(dir / "confusion.csv", render_confusion(cm, Normalize::None));
    write_text(dir / "confusion_normalized.csv", render_confusion(cm, Normalize::Row));

    std::string pred_csv = "source_id,offset,truth,predicted\n";
    for (size_t i = 0; i < ws.size(); ++i)
        pred_csv += ws[i].source_id + "," + std::to_string(ws[i].offset) + "," +
                    cm.class_names[static_cast<size_t>(truth[i])] + "," +
                    cm.class_names[static_cast<size_t>(pred[i])] + "\n";
    write_text(dir / "predictions.csv", pred_csv);

    for (const char* name :
         {"metrics.csv", "confusion.csv", "confusion_normalized.csv", "predictions.csv"})
        m.j["outputs"][name] = (dir / name).string();
    m.j["outputs"]["accuracy"] = rep.accuracy;
    m.j["outputs"]["balanced_accuracy"] = rep.balanced_accuracy;
    m.write();

    std::printf("%s %s split: accuracy %.4f, balanced %.4f, macro f1 %.4f (%zu windows)\n",
                task_name(d.task), f.split.c_str(), rep.accuracy, rep.balanced_accuracy,
                rep.f1_macro, ws.size());
    std::cout << render_confusion(cm, Normalize::None);
    return 0;
}

// ---------------------------------------------------------------- infer-window

struct InferFlags {
    std::string checkpoint;
    std::string input;
    std::string out;
    size_t offset = 0;
    std::string model;
};

int cmd_infer_window(const InferFlags& f) {
    fs::path dir = ensure_out(f.out);
    Manifest m("infer-window", dir);
    m.j["inputs"]["checkpoint"] = f.checkpoint;
    m.j["inputs"]["recording"] = f.input;
    m.j["config"] = {{"offset", f.offset}, {"model", f.model.empty() ? "auto" : f.model}};

    std::string extra_text;
    ModelBundle model = load_checkpoint(f.checkpoint, &extra_text);
    nlohmann::json extra = nlohmann::json::parse(extra_text, nullptr, false);
    std::string mode_name = !f.model.empty()
                                ? f.model
                                : (extra.is_discarded() ? std::string("fused")
                                                        : extra.value("trained_as",
                                                                      std::string("fused")));
    ModelMode mode = model_mode_from_name(mode_name);

    Recording rec = ingest_recording(f.input);
    if (rec.num_channels() != model.in_channels)
        throw ValidationError("checkpoint expects " + std::to_string(model.in_channels) +
                              " channels, recording '" + rec.id + "' has " +
                              std::to_string(rec.num_channels()));
    if (f.offset + model.window_len > rec.length())
        throw ConfigError("window [" + std::to_string(f.offset) + ", " +
                          std::to_string(f.offset + model.window_len) +
                          ") exceeds recording length " + std::to_string(rec.length()));

    Window w;
    w.data = nd::Tensor({model.window_len, model.in_channels});
    for (size_t t = 0; t < model.window_len; ++t)
        for (size_t c = 0; c < model.in_channels; ++c)
            w.data(t, c) = rec.samples(f.offset + t, c);
    w.source_id = rec.id;
    w.offset = f.offset;
    w.paretic_side = rec.paretic_side;
    w.action = rec.action;
    std::vector<NormalizedWindow> ws = {normalize_window(w)};

    nd::Tensor xb = batch_tensor(ws, {0}, 0, 1);
    nd::Tensor logits;
    switch (mode) {
        case ModelMode::Fused: logits = bundle_forward(model, xb, Mode::Eval).fusion_logits; break;
        case ModelMode::TcnOnly: logits = tcn_forward(model.tcn, xb, Mode::Eval).logits; break;
        case ModelMode::LstmOnly: logits = lstm_forward(model.lstm, xb).logits; break;
    }
    SoftenedDistribution probs = soften(logits.data(), model.num_classes, 1.0);

    std::vector<std::string> names = class_names(model.task);
    size_t best = 0;
    for (size_t i = 1; i < probs.probs.size(); ++i)
        if (probs.probs[i] > probs.probs[best]) best = i;

    std::printf("%s prediction for '%s' window at %zu (%s head):\n", task_name(model.task),
                rec.id.c_str(), f.offset, mode_name.c_str());
    for (size_t i = 0; i < names.size(); ++i)
        std::printf("  %-12s %.4f%s\n", names[i].c_str(), probs.probs[i],
                    i == best ? "  <-- predicted" : "");

    nlohmann::json outj;
    outj["task"] = task_name(model.task);
    outj["source_id"] = rec.id;
    outj["offset"] = f.offset;
    outj["classes"] = names;
    outj["probabilities"] = probs.probs;
    outj["predicted"] = names[best];
    write_text(dir / "prediction.json", outj.dump(2) + "\n");
    m.j["outputs"]["prediction"] = (dir / "prediction.json").string();
    m.j["outputs"]["predicted"] = names[best];
    m.write();
    return 0;
}

// ---------------------------------------------------------------- reason

struct ReasonFlags {
    std::string out;
    std::string metadata;
    std::string model_file;
    std::string structure;
    std::string query = "UE-FMA";
    double alpha = 1.0;
    std::vector<std::string> evidence;
};

Evidence parse_evidence(const std::vector<std::string>& pairs) {
    Evidence ev;
    for (const std::string& pair : pairs) {
        size_t eq = pair.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size())
            throw ConfigError("evidence must be node=state, got '" + pair + "'");
        std::string node = pair.substr(0, eq);
        if (ev.count(node)) throw ConfigError("evidence repeats node '" + node + "'");
        ev[node] = pair.substr(eq + 1);
    }
    return ev;
}

int cmd_reason(const ReasonFlags& f) {
    if (f.metadata.empty() == f.model_file.empty())
        throw ConfigError("reason needs exactly one of --metadata or --model");

    fs::path dir = ensure_out(f.out);
    Manifest m("reason", dir);
    m.j["config"] = {{"query", f.query},
                     {"alpha", f.alpha},
                     {"evidence", f.evidence},
                     {"structure", f.structure.empty() ? "builtin" : f.structure}};
    if (!f.metadata.empty()) m.j["inputs"]["metadata"] = f.metadata;
    if (!f.model_file.empty()) m.j["inputs"]["model"] = f.model_file;

    CausalModel model;
    if (!f.model_file.empty()) {
        if (!f.structure.empty())
            throw ConfigError("--structure applies only when fitting from --metadata");
        model = load_model(f.model_file);
    } else {
        CausalGraph g = f.structure.empty() ? default_structure() : load_structure(f.structure);
        std::vector<fs::path> sidecars;
        for (const auto& entry : fs::directory_iterator(f.metadata))
            if (entry.is_regular_file() && entry.path().string().ends_with(".meta.json"))
                sidecars.push_back(entry.path());
        std::sort(sidecars.begin(), sidecars.end());
        if (sidecars.empty())
            throw ValidationError("no *.meta.json sidecars under '" + f.metadata + "'");
        std::vector<StateRecord> records;
        records.reserve(sidecars.size());
        for (const fs::path& p : sidecars)
            records.push_back(record_from_meta(g, read_sidecar(p.string())));

        std::vector<std::string> warnings;
        model = fit_cpts(g, records, f.alpha, &warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
        save_model(model, (dir / "model.json").string());
        m.j["outputs"]["model"] = (dir / "model.json").string();
        m.j["outputs"]["records"] = records.size();
    }

    Evidence ev = parse_evidence(f.evidence);
    std::vector<double> post = posterior(model, ev, f.query);
    const NodeSpec& node =
        model.graph.nodes[static_cast<size_t>(model.graph.node_index(f.query))];

    std::string ev_text;
    for (const auto& [k, v] : ev) {
        if (!ev_text.empty()) ev_text += ", ";
        ev_text += k + "=" + v;
    }
    std::printf("P(%s%s%s):\n", f.query.c_str(), ev.empty() ? "" : " | ", ev_text.c_str());
    for (size_t s = 0; s < post.size(); ++s)
        std::printf("  %-12s %.4f\n", node.states[s].c_str(), post[s]);

    nlohmann::json outj;
    outj["query"] = f.query;
    outj["evidence"] = ev;
    outj["states"] = node.states;
    outj["posterior"] = post;
    if (node.numeric()) {
        double expect = 0.0;
        for (size_t s = 0; s < post.size(); ++s) expect += post[s] * node.midpoints[s];
        std::printf("expected %s: %.2f\n", f.query.c_str(), expect);
        outj["expected_value"] = expect;
    }
    write_text(dir / "posterior.json", outj.dump(2) + "\n");
    m.j["outputs"]["posterior"] = (dir / "posterior.json").string();
    m.write();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"after-stroke arm kinematics: synthesis, training, evaluation, reasoning"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("paresis ") + kVersion);
    app.set_config("--config", "", "read flag defaults from a config file");

    SynthFlags synth;
    CLI::App* cs = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    cs->add_option("--out", synth.out, "output directory")->required();
    cs->add_option("--subjects", synth.spec.n_subjects, "number of subjects");
    cs->add_option("--recordings", synth.spec.recordings_per_subject,
                   "recordings per subject");
    cs->add_option("--length", synth.spec.length, "samples per recording");
    cs->add_option("--channels", synth.spec.channels, "kinematic channels");
    cs->add_option("--rate", synth.spec.sample_rate_hz, "sample rate in Hz");
    cs->add_option("--asymmetry", synth.spec.asymmetry_factor,
                   "paretic amplitude factor in (0,1]");
    cs->add_option("--noise", synth.spec.noise_sigma, "additive noise sigma");
    cs->add_option("--seed", synth.spec.seed, "generator seed");

    PreprocessFlags prep;
    CLI::App* cp = app.add_subcommand("preprocess", "window, normalize, and split recordings");
    prep.data.add_to(cp);
    cp->add_option("--out", prep.out, "output directory")->required();

    TrainFlags tr;
    CLI::App* ct = app.add_subcommand("train", "train the two-network bundle with distillation");
    tr.data.add_to(ct);
    ct->add_option("--out", tr.out, "output directory")->required();
    ct->add_option("--model", tr.model, "fused|tcn|lstm")
        ->check(CLI::IsMember({"fused", "tcn", "lstm"}));
    ct->add_option("--fusion-input", tr.fusion_input, "features|logits")
        ->check(CLI::IsMember({"features", "logits"}));
    ct->add_option("--epochs", tr.epochs, "training epochs");
    ct->add_option("--batch", tr.batch, "batch size");
    ct->add_option("--lr", tr.lr, "Adam learning rate");
    ct->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay on matrices");
    ct->add_option("--temperature", tr.temperature, "distillation temperature");
    ct->add_option("--seed", tr.seed, "training seed");
    ct->add_flag("--soft-ce", tr.soft_ce, "soften every cross-entropy term");
    ct->add_flag("--fkd-t2", tr.fkd_t2, "scale distillation terms by temperature^2");

    EvaluateFlags ev;
    CLI::App* ce = app.add_subcommand("evaluate", "score a checkpoint on a dataset split");
    ce->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
    ce->add_option("--data", ev.data, "directory of recording CSVs + sidecars")->required();
    ce->add_option("--out", ev.out, "output directory")->required();
    ce->add_option("--split", ev.split, "train|val|test|all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    ce->add_option("--model", ev.model, "override the head to score (fused|tcn|lstm)")
        ->check(CLI::IsMember({"fused", "tcn", "lstm"}));

    InferFlags inf;
    CLI::App* ci = app.add_subcommand("infer-window", "classify one window of one recording");
    ci->add_option("--checkpoint", inf.checkpoint, "trained checkpoint")->required();
    ci->add_option("--input", inf.input, "recording CSV or JSONL")->required();
    ci->add_option("--out", inf.out, "output directory")->required();
    ci->add_option("--offset", inf.offset, "window start sample");
    ci->add_option("--model", inf.model, "override the head to use (fused|tcn|lstm)")
        ->check(CLI::IsMember({"fused", "tcn", "lstm"}));

    ReasonFlags rs;
    CLI::App* cr = app.add_subcommand("reason", "query the clinical attribute network");
    cr->add_option("--out", rs.out, "output directory")->required();
    cr->add_option("--metadata", rs.metadata, "fit tables from sidecars in this directory");
    cr->add_option("--model", rs.model_file, "load a previously fitted model file");
    cr->add_option("--structure", rs.structure, "structure config (default: builtin)");
    cr->add_option("--query", rs.query, "node to query");
    cr->add_option("--alpha", rs.alpha, "smoothing pseudo-count");
    cr->add_option("--evidence", rs.evidence, "observed node=state pairs")
        ->take_all();

    cs->callback([&] { cmd_synth(synth); });
    cp->callback([&] { cmd_preprocess(prep); });
    ct->callback([&] { cmd_train(tr); });
    ce->callback([&] { cmd_evaluate(ev); });
    ci->callback([&] { cmd_infer_window(inf); });
    cr->callback([&] { cmd_reason(rs); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ImpossibleEvidenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
