#include "paresis/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "paresis/common.hpp"
#include "paresis/rng.hpp"

namespace paresis {

namespace {

constexpr double kProbFloor = 1e-12;

// batch-mean CE on one head, matching the fused objective's CE terms
double ce_only(const nd::Tensor& logits, const std::vector<int>& truth, double ce_temp,
               nd::Tensor* dlogits) {
    const size_t b = logits.shape[0], n = logits.shape[1];
    const double inv_b = 1.0 / static_cast<double>(b);
    double loss = 0.0;
    for (size_t i = 0; i < b; ++i) {
        SoftenedDistribution p = soften(&logits.v[i * n], n, ce_temp);
        const size_t y = static_cast<size_t>(truth[i]);
        loss -= std::log(std::max(p.probs[y], kProbFloor));
        if (dlogits) {
            double* g = &dlogits->v[i * n];
            for (size_t j = 0; j < n; ++j) g[j] += p.probs[j] * inv_b / ce_temp;
            g[y] -= inv_b / ce_temp;
        }
    }
    return loss * inv_b;
}

size_t argmax_row(const nd::Tensor& logits, size_t row) {
    const size_t n = logits.shape[1];
    size_t best = 0;
    for (size_t j = 1; j < n; ++j)
        if (logits(row, j) > logits(row, best)) best = j;
    return best;
}

std::string fmt_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

const char* model_mode_name(ModelMode m) {
    switch (m) {
        case ModelMode::Fused: return "fused";
        case ModelMode::TcnOnly: return "tcn";
        case ModelMode::LstmOnly: return "lstm";
    }
    return "?";
}

ModelMode model_mode_from_name(std::string_view name) {
    if (name == "fused") return ModelMode::Fused;
    if (name == "tcn") return ModelMode::TcnOnly;
    if (name == "lstm") return ModelMode::LstmOnly;
    throw ConfigError("unknown model mode '" + std::string(name) + "' (fused, tcn, lstm)");
}

nd::Tensor batch_tensor(const std::vector<NormalizedWindow>& ws, const std::vector<size_t>& idx,
                        size_t from, size_t count) {
    if (count == 0 || from + count > idx.size())
        throw ContractError("batch_tensor: slice out of range");
    const nd::Tensor& first = ws[idx[from]].data;
    const size_t t = first.shape[0], f = first.shape[1];
    nd::Tensor x({count, t, f});
    for (size_t i = 0; i < count; ++i) {
        const nd::Tensor& src = ws[idx[from + i]].data;
        if (src.shape[0] != t || src.shape[1] != f)
            throw ContractError("batch_tensor: window shape " + src.shape_str() +
                                " != " + first.shape_str());
        std::copy(src.v.begin(), src.v.end(), x.v.begin() + static_cast<ptrdiff_t>(i * t * f));
    }
    return x;
}

std::vector<int> predict(ModelBundle& m, const std::vector<NormalizedWindow>& ws, ModelMode mode,
                         size_t batch_size) {
    if (batch_size == 0) throw ConfigError("predict: batch_size must be positive");
    std::vector<size_t> idx(ws.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::vector<int> out;
    out.reserve(ws.size());
    for (size_t start = 0; start < ws.size(); start += batch_size) {
        const size_t count = std::min(batch_size, ws.size() - start);
        nd::Tensor xb = batch_tensor(ws, idx, start, count);
        nd::Tensor logits;
        switch (mode) {
            case ModelMode::Fused: {
                BundleOut bo = bundle_forward(m, xb, Mode::Eval);
                logits = std::move(bo.fusion_logits);
                break;
            }
            case ModelMode::TcnOnly:
                logits = tcn_forward(m.tcn, xb, Mode::Eval).logits;
                break;
            case ModelMode::LstmOnly:
                logits = lstm_forward(m.lstm, xb).logits;
                break;
        }
        for (size_t i = 0; i < count; ++i) out.push_back(static_cast<int>(argmax_row(logits, i)));
    }
    return out;
}

double evaluate_accuracy(ModelBundle& m, const std::vector<NormalizedWindow>& ws, Task task,
                         ModelMode mode, size_t batch_size) {
    if (ws.empty()) throw ContractError("evaluate_accuracy: empty window set");
    std::vector<int> pred = predict(m, ws, mode, batch_size);
    size_t hits = 0;
    for (size_t i = 0; i < ws.size(); ++i)
        if (pred[i] == window_label(ws[i], task)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ws.size());
}

TrainResult train(ModelBundle model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (cfg.epochs == 0) throw ConfigError("train: epochs must be positive");
    if (cfg.lr < 0.0) throw ConfigError("train: negative learning rate");
    if (!(cfg.temperature > 0.0)) throw ConfigError("train: temperature must be positive");
    if (data.train.empty()) throw ContractError("train: empty training set");
    if (model.task != data.task)
        throw ContractError(std::string("train: model task '") + task_name(model.task) +
                            "' != dataset task '" + task_name(data.task) + "'");
    if (model.in_channels != data.num_channels)
        throw ContractError("train: model expects " + std::to_string(model.in_channels) +
                            " channels, dataset has " + std::to_string(data.num_channels));
    if (model.window_len != data.window_len)
        throw ContractError("train: model window " + std::to_string(model.window_len) +
                            " != dataset window " + std::to_string(data.window_len));

    const size_t n = data.train.size();
    std::vector<int> labels(n);
    for (size_t i = 0; i < n; ++i) labels[i] = window_label(data.train[i], data.task);

    ModelBundle grads = make_grads(model);
    std::vector<NamedTensor> params = named_tensors(model);
    std::vector<NamedTensor> gparams = named_tensors(grads);
    std::vector<AdamState> opt(params.size());
    AdamConfig acfg = cfg.adam;
    acfg.lr = cfg.lr;
    AdamConfig acfg_vec = acfg;  // biases and batchnorm scales stay undecayed
    acfg_vec.weight_decay = 0.0;

    const double ce_temp = cfg.flags.soft_ce ? cfg.temperature : 1.0;
    const std::vector<NormalizedWindow>& val_set = data.val.empty() ? data.train : data.val;

    TrainResult res;
    res.best = model;
    res.best_val_accuracy = -1.0;
    res.history.reserve(cfg.epochs);

    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> perm(n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        Rng rng(mix_seed(cfg.seed, 0x7e41, epoch));
        rng.shuffle(perm);

        LossBreakdown sums;
        for (size_t start = 0, batch_no = 0; start < n; start += cfg.batch_size, ++batch_no) {
            const size_t count = std::min(cfg.batch_size, n - start);
            nd::Tensor xb = batch_tensor(data.train, perm, start, count);
            std::vector<int> yb(count);
            for (size_t i = 0; i < count; ++i) yb[i] = labels[perm[start + i]];

            for (NamedTensor& g : gparams) g.tensor->fill(0.0);

            LossBreakdown bd;
            try {
                switch (cfg.mode) {
                    case ModelMode::Fused: {
                        BundleCache bc;
                        BundleOut bo = bundle_forward(model, xb, Mode::Train, &bc);
                        LossGrads lg;
                        bd = total_loss(bo.tcn.logits, bo.lstm.logits, bo.fusion_logits, yb,
                                        cfg.temperature, cfg.flags, &lg);
                        bundle_backward(model, bc, lg.dtcn, lg.dlstm, lg.dfusion, grads);
                        break;
                    }
                    case ModelMode::TcnOnly: {
                        TcnCache tc;
                        HeadOut ho = tcn_forward(model.tcn, xb, Mode::Train, &tc);
                        nd::Tensor dlog(ho.logits.shape);
                        bd.tcn_ce = ce_only(ho.logits, yb, ce_temp, &dlog);
                        bd.total = bd.tcn_ce;
                        tcn_backward(model.tcn, tc, dlog, nullptr, grads.tcn);
                        break;
                    }
                    case ModelMode::LstmOnly: {
                        LstmNetCache lc;
                        HeadOut ho = lstm_forward(model.lstm, xb, &lc);
                        nd::Tensor dlog(ho.logits.shape);
                        bd.lstm_ce = ce_only(ho.logits, yb, ce_temp, &dlog);
                        bd.total = bd.lstm_ce;
                        lstm_backward_net(model.lstm, lc, dlog, nullptr, grads.lstm);
                        break;
                    }
                }
            } catch (const ContractError&) {
                throw;
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw DivergenceError("train: epoch " + std::to_string(epoch) + " batch " +
                                      std::to_string(batch_no) + ": " + e.what());
            }
            if (!std::isfinite(bd.total))
                throw DivergenceError("train: epoch " + std::to_string(epoch) + " batch " +
                                      std::to_string(batch_no) + ": non-finite loss");

            for (size_t p = 0; p < params.size(); ++p)
                if (params[p].trainable)
                    adam_step(*params[p].tensor, *gparams[p].tensor, opt[p],
                              params[p].tensor->shape.size() > 1 ? acfg : acfg_vec);

            const double w = static_cast<double>(count);
            sums.fusion_ce += bd.fusion_ce * w;
            sums.tcn_ce += bd.tcn_ce * w;
            sums.lstm_ce += bd.lstm_ce * w;
            sums.tcn_fkd += bd.tcn_fkd * w;
            sums.lstm_fkd += bd.lstm_fkd * w;
            sums.total += bd.total * w;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const double inv_n = 1.0 / static_cast<double>(n);
        rec.loss.fusion_ce = sums.fusion_ce * inv_n;
        rec.loss.tcn_ce = sums.tcn_ce * inv_n;
        rec.loss.lstm_ce = sums.lstm_ce * inv_n;
        rec.loss.tcn_fkd = sums.tcn_fkd * inv_n;
        rec.loss.lstm_fkd = sums.lstm_fkd * inv_n;
        rec.loss.total = sums.total * inv_n;
        rec.val_accuracy = evaluate_accuracy(model, val_set, data.task, cfg.mode, cfg.batch_size);
        res.history.push_back(rec);

        if (rec.val_accuracy > res.best_val_accuracy) {
            res.best_val_accuracy = rec.val_accuracy;
            res.best_epoch = epoch;
            res.best = model;
        }
    }
    return res;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,fusion_ce,tcn_ce,tcn_fkd,lstm_ce,lstm_fkd,total,val_accuracy\n";
    for (const EpochRecord& r : history) {
        out += std::to_string(r.epoch);
        out += ',';
        out += fmt_double(r.loss.fusion_ce);
        out += ',';
        out += fmt_double(r.loss.tcn_ce);
        out += ',';
        out += fmt_double(r.loss.tcn_fkd);
        out += ',';
        out += fmt_double(r.loss.lstm_ce);
        out += ',';
        out += fmt_double(r.loss.lstm_fkd);
        out += ',';
        out += fmt_double(r.loss.total);
        out += ',';
        out += fmt_double(r.val_accuracy);
        out += '\n';
    }
    return out;
}

}  // namespace paresis
