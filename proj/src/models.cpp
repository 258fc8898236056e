#include "paresis/models.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "paresis/common.hpp"
#include "paresis/rng.hpp"

namespace paresis {

using nd::BatchNormGrads;
using nd::ConvGrads;
using nd::ConvSpec;
using nd::DenseGrads;
using nd::LstmGrads;
using nd::Padding;

size_t ResTcnConfig::stride_product() const {
    size_t p = stem_stride;
    for (size_t s : entry_stride) p *= s;
    return p;
}

const char* fusion_input_name(FusionInput f) {
    return f == FusionInput::Features ? "features" : "logits";
}

FusionInput fusion_input_from_name(std::string_view name) {
    if (name == "features") return FusionInput::Features;
    if (name == "logits") return FusionInput::Logits;
    throw ConfigError("unknown fusion input '" + std::string(name) +
                      "' (expected features|logits)");
}

namespace {

void acc(nd::Tensor& dst, const nd::Tensor& src) {
    if (!dst.same_shape(src))
        throw ContractError("gradient shape " + src.shape_str() + " != parameter shape " +
                            dst.shape_str());
    for (size_t i = 0; i < dst.numel(); ++i) dst.v[i] += src.v[i];
}

void validate_tcn_cfg(const ResTcnConfig& cfg) {
    if (cfg.filters.empty() || cfg.filters.size() != cfg.entry_stride.size())
        throw ConfigError("tcn config: filters and entry_stride must be nonempty and equal-length");
    if (cfg.subblocks_per_unit < 1 || cfg.kernel < 1 || cfg.stem_filters < 1 ||
        cfg.stem_kernel < 1 || cfg.stem_stride < 1)
        throw ConfigError("tcn config: counts and sizes must be positive");
    for (size_t u = 0; u < cfg.filters.size(); ++u)
        if (cfg.filters[u] < 1 || cfg.entry_stride[u] < 1)
            throw ConfigError("tcn config: filters and strides must be positive");
}

// allocates every tensor with its final shape, zero-filled
ModelBundle build_structure(Task task, size_t in_channels, size_t window_len,
                            const ResTcnConfig& tcn_cfg, const LstmNetConfig& lstm_cfg,
                            const FusionConfig& fusion_cfg) {
    validate_tcn_cfg(tcn_cfg);
    if (lstm_cfg.layers < 1 || lstm_cfg.hidden < 1 || lstm_cfg.head_hidden < 1)
        throw ConfigError("lstm config: layers and sizes must be positive");
    if (in_channels < 1) throw ConfigError("model: need at least one input channel");
    if (window_len < tcn_cfg.stride_product())
        throw ConfigError("window length " + std::to_string(window_len) +
                          " too short for the stride schedule (need >= " +
                          std::to_string(tcn_cfg.stride_product()) + ")");

    ModelBundle m;
    m.task = task;
    m.num_classes = task_classes(task);
    m.in_channels = in_channels;
    m.window_len = window_len;
    m.tcn.cfg = tcn_cfg;
    m.lstm.cfg = lstm_cfg;
    m.fusion.cfg = fusion_cfg;

    m.tcn.stem.w = nd::Tensor({tcn_cfg.stem_filters, tcn_cfg.stem_kernel, in_channels});
    m.tcn.stem.b = nd::Tensor({tcn_cfg.stem_filters});

    size_t ch = tcn_cfg.stem_filters;
    for (size_t u = 0; u < tcn_cfg.filters.size(); ++u) {
        const size_t out = tcn_cfg.filters[u];
        for (size_t s = 0; s < tcn_cfg.subblocks_per_unit; ++s) {
            SubBlock sb;
            const size_t cin = s == 0 ? ch : out;
            sb.stride = s == 0 ? tcn_cfg.entry_stride[u] : 1;
            sb.bn.gamma = nd::Tensor({cin});
            sb.bn.beta = nd::Tensor({cin});
            sb.bn.state.running_mean = nd::Tensor({cin});
            sb.bn.state.running_var = nd::Tensor({cin});
            sb.conv.w = nd::Tensor({out, tcn_cfg.kernel, cin});
            sb.conv.b = nd::Tensor({out});
            sb.has_proj = sb.stride != 1 || cin != out;
            if (sb.has_proj) {
                sb.proj.w = nd::Tensor({out, 1, cin});
                sb.proj.b = nd::Tensor({out});
            }
            m.tcn.blocks.push_back(std::move(sb));
        }
        ch = out;
    }
    m.tcn.head.w = nd::Tensor({ch, m.num_classes});
    m.tcn.head.b = nd::Tensor({m.num_classes});

    for (size_t l = 0; l < lstm_cfg.layers; ++l) {
        const size_t in = l == 0 ? in_channels : lstm_cfg.hidden;
        LstmParams p;
        p.wx = nd::Tensor({in, 4 * lstm_cfg.hidden});
        p.wh = nd::Tensor({lstm_cfg.hidden, 4 * lstm_cfg.hidden});
        p.b = nd::Tensor({4 * lstm_cfg.hidden});
        m.lstm.layers.push_back(std::move(p));
    }
    m.lstm.fc1.w = nd::Tensor({lstm_cfg.hidden, lstm_cfg.head_hidden});
    m.lstm.fc1.b = nd::Tensor({lstm_cfg.head_hidden});
    m.lstm.fc2.w = nd::Tensor({lstm_cfg.head_hidden, m.num_classes});
    m.lstm.fc2.b = nd::Tensor({m.num_classes});

    const size_t fused_in = fusion_cfg.input == FusionInput::Features
                                ? tcn_cfg.filters.back() + lstm_cfg.head_hidden
                                : 2 * m.num_classes;
    m.fusion.fc.w = nd::Tensor({fused_in, m.num_classes});
    m.fusion.fc.b = nd::Tensor({m.num_classes});
    return m;
}

void fill_uniform(nd::Tensor& t, size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (auto& v : t.v) v = rng.uniform(-limit, limit);
}

}  // namespace

ModelBundle make_bundle(Task task, size_t in_channels, size_t window_len, uint64_t seed,
                        const ResTcnConfig& tcn_cfg, const LstmNetConfig& lstm_cfg,
                        const FusionConfig& fusion_cfg) {
    ModelBundle m = build_structure(task, in_channels, window_len, tcn_cfg, lstm_cfg, fusion_cfg);
    Rng rng(mix_seed(seed, 0x1417));

    fill_uniform(m.tcn.stem.w, tcn_cfg.stem_kernel * in_channels, rng);
    for (SubBlock& sb : m.tcn.blocks) {
        sb.bn.gamma.fill(1.0);
        const size_t cin = sb.conv.w.shape[2];
        fill_uniform(sb.conv.w, tcn_cfg.kernel * cin, rng);
        if (sb.has_proj) fill_uniform(sb.proj.w, cin, rng);
    }
    fill_uniform(m.tcn.head.w, m.tcn.head.w.shape[0], rng);

    const size_t h = lstm_cfg.hidden;
    for (LstmParams& p : m.lstm.layers) {
        fill_uniform(p.wx, p.wx.shape[0], rng);
        fill_uniform(p.wh, h, rng);
        for (size_t j = h; j < 2 * h; ++j) p.b(j) = 1.0;  // forget-gate bias
    }
    fill_uniform(m.lstm.fc1.w, m.lstm.fc1.w.shape[0], rng);
    fill_uniform(m.lstm.fc2.w, m.lstm.fc2.w.shape[0], rng);
    fill_uniform(m.fusion.fc.w, m.fusion.fc.w.shape[0], rng);
    return m;
}

std::vector<NamedTensor> named_tensors(ModelBundle& m) {
    std::vector<NamedTensor> out;
    auto add = [&](std::string name, nd::Tensor& t, bool trainable = true) {
        out.push_back({std::move(name), &t, trainable});
    };
    add("tcn.stem.w", m.tcn.stem.w);
    add("tcn.stem.b", m.tcn.stem.b);
    for (size_t i = 0; i < m.tcn.blocks.size(); ++i) {
        SubBlock& sb = m.tcn.blocks[i];
        std::string p = "tcn.block" + std::to_string(i) + ".";
        add(p + "bn.gamma", sb.bn.gamma);
        add(p + "bn.beta", sb.bn.beta);
        add(p + "bn.running_mean", sb.bn.state.running_mean, false);
        add(p + "bn.running_var", sb.bn.state.running_var, false);
        add(p + "conv.w", sb.conv.w);
        add(p + "conv.b", sb.conv.b);
        if (sb.has_proj) {
            add(p + "proj.w", sb.proj.w);
            add(p + "proj.b", sb.proj.b);
        }
    }
    add("tcn.head.w", m.tcn.head.w);
    add("tcn.head.b", m.tcn.head.b);
    for (size_t l = 0; l < m.lstm.layers.size(); ++l) {
        std::string p = "lstm.layer" + std::to_string(l) + ".";
        add(p + "wx", m.lstm.layers[l].wx);
        add(p + "wh", m.lstm.layers[l].wh);
        add(p + "b", m.lstm.layers[l].b);
    }
    add("lstm.fc1.w", m.lstm.fc1.w);
    add("lstm.fc1.b", m.lstm.fc1.b);
    add("lstm.fc2.w", m.lstm.fc2.w);
    add("lstm.fc2.b", m.lstm.fc2.b);
    add("fusion.fc.w", m.fusion.fc.w);
    add("fusion.fc.b", m.fusion.fc.b);
    return out;
}

ModelBundle make_grads(const ModelBundle& m) {
    ModelBundle g = build_structure(m.task, m.in_channels, m.window_len, m.tcn.cfg, m.lstm.cfg,
                                    m.fusion.cfg);
    return g;
}

HeadOut tcn_forward(ResTcn& net, const nd::Tensor& x, Mode mode, TcnCache* cache) {
    if (x.shape.size() != 3)
        throw ContractError("tcn_forward: input must be [B,T,C], got " + x.shape_str());
    if (x.shape[2] != net.stem.w.shape[2])
        throw ContractError("tcn_forward: input channels " + x.shape_str() +
                            " do not match stem " + net.stem.w.shape_str());
    if (x.shape[1] < net.cfg.stride_product())
        throw ConfigError("tcn_forward: window length " + std::to_string(x.shape[1]) +
                          " too short for the stride schedule (need >= " +
                          std::to_string(net.cfg.stride_product()) + ")");

    if (cache) {
        cache->x = x;
        cache->blocks.clear();
        cache->blocks.reserve(net.blocks.size());
    }
    ConvSpec stem_spec{net.cfg.stem_filters, net.cfg.stem_kernel, net.cfg.stem_stride,
                       Padding::Same};
    nd::Tensor cur = conv1d(x, net.stem.w, net.stem.b, stem_spec);

    for (SubBlock& sb : net.blocks) {
        SubBlockCache sc;
        if (cache) sc.x = cur;
        nd::Tensor bn_out =
            batchnorm(cur, sb.bn.gamma, sb.bn.beta, sb.bn.state, mode, cache ? &sc.bn : nullptr);
        nd::Tensor r = relu(bn_out);
        ConvSpec spec{sb.conv.w.shape[0], net.cfg.kernel, sb.stride, Padding::Same};
        nd::Tensor main = conv1d(r, sb.conv.w, sb.conv.b, spec);
        if (sb.has_proj) {
            ConvSpec pspec{sb.proj.w.shape[0], 1, sb.stride, Padding::Same};
            nd::Tensor skip = conv1d(cur, sb.proj.w, sb.proj.b, pspec);
            for (size_t i = 0; i < main.numel(); ++i) main.v[i] += skip.v[i];
        } else {
            for (size_t i = 0; i < main.numel(); ++i) main.v[i] += cur.v[i];
        }
        if (cache) {
            sc.bn_out = std::move(bn_out);
            sc.relu_out = std::move(r);
            cache->blocks.push_back(std::move(sc));
        }
        cur = std::move(main);
    }

    HeadOut out;
    out.features = mean_time(cur);
    if (cache) {
        cache->pooled = out.features;
        cache->t_last = cur.shape[1];
    }
    out.logits = dense(out.features, net.head.w, net.head.b);
    return out;
}

void tcn_backward(const ResTcn& net, const TcnCache& cache, const nd::Tensor& dlogits,
                  const nd::Tensor* dfeatures, ResTcn& grads, nd::Tensor* dx) {
    DenseGrads hg = dense_backward(cache.pooled, net.head.w, dlogits);
    acc(grads.head.w, hg.dw);
    acc(grads.head.b, hg.db);
    nd::Tensor dpool = std::move(hg.dx);
    if (dfeatures) acc(dpool, *dfeatures);

    nd::Tensor dcur = mean_time_backward(dpool, cache.t_last);
    for (size_t i = net.blocks.size(); i-- > 0;) {
        const SubBlock& sb = net.blocks[i];
        const SubBlockCache& sc = cache.blocks[i];
        ConvSpec spec{sb.conv.w.shape[0], net.cfg.kernel, sb.stride, Padding::Same};
        ConvGrads cg = conv1d_backward(sc.relu_out, sb.conv.w, spec, dcur);
        acc(grads.blocks[i].conv.w, cg.dw);
        acc(grads.blocks[i].conv.b, cg.db);
        nd::Tensor drelu = relu_backward(sc.bn_out, cg.dx);
        BatchNormGrads bg = batchnorm_backward(drelu, sc.bn, sb.bn.gamma);
        acc(grads.blocks[i].bn.gamma, bg.dgamma);
        acc(grads.blocks[i].bn.beta, bg.dbeta);
        nd::Tensor dprev = std::move(bg.dx);
        if (sb.has_proj) {
            ConvSpec pspec{sb.proj.w.shape[0], 1, sb.stride, Padding::Same};
            ConvGrads pg = conv1d_backward(sc.x, sb.proj.w, pspec, dcur);
            acc(grads.blocks[i].proj.w, pg.dw);
            acc(grads.blocks[i].proj.b, pg.db);
            acc(dprev, pg.dx);
        } else {
            acc(dprev, dcur);
        }
        dcur = std::move(dprev);
    }

    ConvSpec stem_spec{net.cfg.stem_filters, net.cfg.stem_kernel, net.cfg.stem_stride,
                       Padding::Same};
    ConvGrads sg = conv1d_backward(cache.x, net.stem.w, stem_spec, dcur);
    acc(grads.stem.w, sg.dw);
    acc(grads.stem.b, sg.db);
    if (dx) *dx = std::move(sg.dx);
}

HeadOut lstm_forward(LstmNet& net, const nd::Tensor& x, LstmNetCache* cache) {
    if (x.shape.size() != 3)
        throw ContractError("lstm_forward: input must be [B,T,C], got " + x.shape_str());
    if (x.shape[2] != net.layers.front().wx.shape[0])
        throw ContractError("lstm_forward: input channels " + x.shape_str() +
                            " do not match layer 0 " + net.layers.front().wx.shape_str());

    if (cache) {
        cache->inputs.clear();
        cache->layers.assign(net.layers.size(), LstmSeqCache{});
    }
    nd::Tensor cur = x;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        if (cache) cache->inputs.push_back(cur);
        cur = lstm_sequence(cur, net.layers[l], cache ? &cache->layers[l] : nullptr);
    }

    const size_t b = cur.shape[0], t = cur.shape[1], h = cur.shape[2];
    nd::Tensor h_last({b, h});
    for (size_t bi = 0; bi < b; ++bi)
        for (size_t j = 0; j < h; ++j) h_last(bi, j) = cur(bi, t - 1, j);

    nd::Tensor fc1_pre = dense(h_last, net.fc1.w, net.fc1.b);
    if (cache) {
        cache->h_last = h_last;
        cache->fc1_pre = fc1_pre;
    }
    HeadOut out;
    out.features = relu(fc1_pre);
    out.logits = dense(out.features, net.fc2.w, net.fc2.b);
    return out;
}

void lstm_backward_net(const LstmNet& net, const LstmNetCache& cache, const nd::Tensor& dlogits,
                       const nd::Tensor* dfeatures, LstmNet& grads, nd::Tensor* dx) {
    nd::Tensor features = relu(cache.fc1_pre);
    DenseGrads g2 = dense_backward(features, net.fc2.w, dlogits);
    acc(grads.fc2.w, g2.dw);
    acc(grads.fc2.b, g2.db);
    nd::Tensor dfeat = std::move(g2.dx);
    if (dfeatures) acc(dfeat, *dfeatures);

    nd::Tensor dpre1 = relu_backward(cache.fc1_pre, dfeat);
    DenseGrads g1 = dense_backward(cache.h_last, net.fc1.w, dpre1);
    acc(grads.fc1.w, g1.dw);
    acc(grads.fc1.b, g1.db);

    const size_t b = cache.h_last.shape[0];
    const size_t h = net.cfg.hidden;
    const size_t t = cache.inputs.back().shape[1];
    nd::Tensor dh_out({b, t, h});
    for (size_t bi = 0; bi < b; ++bi)
        for (size_t j = 0; j < h; ++j) dh_out(bi, t - 1, j) = g1.dx(bi, j);

    for (size_t l = net.layers.size(); l-- > 0;) {
        LstmGrads lg = lstm_backward(cache.inputs[l], net.layers[l], cache.layers[l], dh_out);
        acc(grads.layers[l].wx, lg.dwx);
        acc(grads.layers[l].wh, lg.dwh);
        acc(grads.layers[l].b, lg.db);
        dh_out = std::move(lg.dx);
    }
    if (dx) *dx = std::move(dh_out);
}

nd::Tensor fusion_forward(FusionHead& head, const nd::Tensor& tcn_in, const nd::Tensor& lstm_in,
                          FusionCache* cache) {
    if (tcn_in.shape.size() != 2 || lstm_in.shape.size() != 2 ||
        tcn_in.shape[0] != lstm_in.shape[0])
        throw ContractError("fusion_forward: inputs must be [B,D] with equal B, got " +
                            tcn_in.shape_str() + " and " + lstm_in.shape_str());
    const size_t b = tcn_in.shape[0];
    const size_t da = tcn_in.shape[1], db = lstm_in.shape[1];
    if (head.fc.w.shape[0] != da + db)
        throw ContractError("fusion_forward: concatenated width " + std::to_string(da + db) +
                            " does not match fusion weights " + head.fc.w.shape_str());

    nd::Tensor in({b, da + db});
    for (size_t bi = 0; bi < b; ++bi) {
        std::copy_n(&tcn_in.v[bi * da], da, &in.v[bi * (da + db)]);
        std::copy_n(&lstm_in.v[bi * db], db, &in.v[bi * (da + db) + da]);
    }
    if (cache) {
        cache->input = in;
        cache->d_tcn = da;
    }
    return dense(in, head.fc.w, head.fc.b);
}

FusionInGrads fusion_backward(const FusionHead& head, const FusionCache& cache,
                              const nd::Tensor& dlogits, FusionHead& grads) {
    DenseGrads g = dense_backward(cache.input, head.fc.w, dlogits);
    acc(grads.fc.w, g.dw);
    acc(grads.fc.b, g.db);

    const size_t b = cache.input.shape[0];
    const size_t d = cache.input.shape[1];
    const size_t da = cache.d_tcn, db = d - da;
    FusionInGrads out;
    out.dtcn_in = nd::Tensor({b, da});
    out.dlstm_in = nd::Tensor({b, db});
    for (size_t bi = 0; bi < b; ++bi) {
        std::copy_n(&g.dx.v[bi * d], da, &out.dtcn_in.v[bi * da]);
        std::copy_n(&g.dx.v[bi * d + da], db, &out.dlstm_in.v[bi * db]);
    }
    return out;
}

BundleOut bundle_forward(ModelBundle& m, const nd::Tensor& x, Mode mode, BundleCache* cache) {
    BundleOut out;
    out.tcn = tcn_forward(m.tcn, x, mode, cache ? &cache->tcn : nullptr);
    out.lstm = lstm_forward(m.lstm, x, cache ? &cache->lstm : nullptr);
    const bool features = m.fusion.cfg.input == FusionInput::Features;
    out.fusion_logits = fusion_forward(m.fusion, features ? out.tcn.features : out.tcn.logits,
                                       features ? out.lstm.features : out.lstm.logits,
                                       cache ? &cache->fusion : nullptr);
    return out;
}

void bundle_backward(const ModelBundle& m, const BundleCache& cache, const nd::Tensor& dtcn_logits,
                     const nd::Tensor& dlstm_logits, const nd::Tensor& dfusion_logits,
                     ModelBundle& grads) {
    FusionInGrads fg = fusion_backward(m.fusion, cache.fusion, dfusion_logits, grads.fusion);
    if (m.fusion.cfg.input == FusionInput::Features) {
        tcn_backward(m.tcn, cache.tcn, dtcn_logits, &fg.dtcn_in, grads.tcn);
        lstm_backward_net(m.lstm, cache.lstm, dlstm_logits, &fg.dlstm_in, grads.lstm);
    } else {
        nd::Tensor dtcn = dtcn_logits;
        nd::Tensor dlstm = dlstm_logits;
        acc(dtcn, fg.dtcn_in);
        acc(dlstm, fg.dlstm_in);
        tcn_backward(m.tcn, cache.tcn, dtcn, nullptr, grads.tcn);
        lstm_backward_net(m.lstm, cache.lstm, dlstm, nullptr, grads.lstm);
    }
}

namespace {

constexpr char kMagic[8] = {'P', 'A', 'R', 'E', 'S', 'I', 'S', '\0'};
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, ModelBundle& m, const std::string& extra_json) {
    nlohmann::json extra;
    try {
        extra = nlohmann::json::parse(extra_json);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("save_checkpoint: extra_json is not valid JSON: ") +
                         e.what());
    }

    nlohmann::json h;
    h["task"] = task_name(m.task);
    h["num_classes"] = m.num_classes;
    h["in_channels"] = m.in_channels;
    h["window_len"] = m.window_len;
    h["tcn"] = {{"filters", m.tcn.cfg.filters},
                {"entry_stride", m.tcn.cfg.entry_stride},
                {"subblocks_per_unit", m.tcn.cfg.subblocks_per_unit},
                {"kernel", m.tcn.cfg.kernel},
                {"stem_filters", m.tcn.cfg.stem_filters},
                {"stem_kernel", m.tcn.cfg.stem_kernel},
                {"stem_stride", m.tcn.cfg.stem_stride}};
    h["lstm"] = {{"layers", m.lstm.cfg.layers},
                 {"hidden", m.lstm.cfg.hidden},
                 {"head_hidden", m.lstm.cfg.head_hidden}};
    h["fusion_input"] = fusion_input_name(m.fusion.cfg.input);

    std::vector<bool> bn_init;
    for (const SubBlock& sb : m.tcn.blocks) bn_init.push_back(sb.bn.state.initialized);
    h["bn_initialized"] = bn_init;
    h["extra"] = extra;

    auto tensors = named_tensors(m);
    nlohmann::json dir = nlohmann::json::array();
    size_t offset = 0;
    for (const NamedTensor& nt : tensors) {
        dir.push_back({{"name", nt.name}, {"shape", nt.tensor->shape}, {"offset", offset}});
        offset += nt.tensor->numel() * sizeof(double);
    }
    h["tensors"] = dir;

    const std::string header = h.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    uint32_t version = kCheckpointVersion;
    uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const NamedTensor& nt : tensors)
        out.write(reinterpret_cast<const char*>(nt.tensor->v.data()),
                  static_cast<std::streamsize>(nt.tensor->numel() * sizeof(double)));
    if (!out) throw Error("save_checkpoint: write to '" + path + "' failed");
}

ModelBundle load_checkpoint(const std::string& path, std::string* extra_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("load_checkpoint: cannot open '" + path + "'");

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("load_checkpoint: '" + path + "' is not a checkpoint file");
    uint32_t version = 0;
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || version != kCheckpointVersion)
        throw ParseError("load_checkpoint: unsupported checkpoint version " +
                         std::to_string(version));

    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ParseError("load_checkpoint: truncated header in '" + path + "'");

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("load_checkpoint: bad header JSON: ") + e.what());
    }

    try {
        ResTcnConfig tcn_cfg;
        tcn_cfg.filters = h["tcn"]["filters"].get<std::vector<size_t>>();
        tcn_cfg.entry_stride = h["tcn"]["entry_stride"].get<std::vector<size_t>>();
        tcn_cfg.subblocks_per_unit = h["tcn"]["subblocks_per_unit"].get<size_t>();
        tcn_cfg.kernel = h["tcn"]["kernel"].get<size_t>();
        tcn_cfg.stem_filters = h["tcn"]["stem_filters"].get<size_t>();
        tcn_cfg.stem_kernel = h["tcn"]["stem_kernel"].get<size_t>();
        tcn_cfg.stem_stride = h["tcn"]["stem_stride"].get<size_t>();
        LstmNetConfig lstm_cfg;
        lstm_cfg.layers = h["lstm"]["layers"].get<size_t>();
        lstm_cfg.hidden = h["lstm"]["hidden"].get<size_t>();
        lstm_cfg.head_hidden = h["lstm"]["head_hidden"].get<size_t>();
        FusionConfig fusion_cfg;
        fusion_cfg.input = fusion_input_from_name(h["fusion_input"].get<std::string>());

        ModelBundle m = build_structure(task_from_name(h["task"].get<std::string>()),
                                        h["in_channels"].get<size_t>(),
                                        h["window_len"].get<size_t>(), tcn_cfg, lstm_cfg,
                                        fusion_cfg);

        std::map<std::string, std::pair<std::vector<size_t>, size_t>> dir;
        for (const auto& e : h["tensors"])
            dir[e["name"].get<std::string>()] = {e["shape"].get<std::vector<size_t>>(),
                                                 e["offset"].get<size_t>()};

        const std::streampos payload_start = in.tellg();
        auto tensors = named_tensors(m);
        if (tensors.size() != dir.size())
            throw ParseError("load_checkpoint: tensor directory size mismatch");
        for (NamedTensor& nt : tensors) {
            auto it = dir.find(nt.name);
            if (it == dir.end())
                throw ParseError("load_checkpoint: missing tensor '" + nt.name + "'");
            if (it->second.first != nt.tensor->shape)
                throw ParseError("load_checkpoint: shape mismatch for '" + nt.name + "'");
            in.seekg(payload_start + static_cast<std::streamoff>(it->second.second));
            in.read(reinterpret_cast<char*>(nt.tensor->v.data()),
                    static_cast<std::streamsize>(nt.tensor->numel() * sizeof(double)));
            if (!in) throw ParseError("load_checkpoint: truncated payload at '" + nt.name + "'");
        }

        auto bn_init = h["bn_initialized"].get<std::vector<bool>>();
        if (bn_init.size() != m.tcn.blocks.size())
            throw ParseError("load_checkpoint: bn_initialized arity mismatch");
        for (size_t i = 0; i < bn_init.size(); ++i)
            m.tcn.blocks[i].bn.state.initialized = bn_init[i];

        if (extra_json) *extra_json = h["extra"].dump();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("load_checkpoint: bad header field: ") + e.what());
    }
}

}  // namespace paresis
