#pragma once

#include <string>
#include <vector>

#include "paresis/layers.hpp"
#include "paresis/tensor.hpp"
#include "paresis/windowing.hpp"

namespace paresis {

using nd::BatchNormCache;
using nd::BatchNormState;
using nd::LstmParams;
using nd::LstmSeqCache;
using nd::Mode;

struct ResTcnConfig {
    std::vector<size_t> filters = {8, 16, 32, 64};  // one entry per residual unit
    std::vector<size_t> entry_stride = {1, 2, 2, 2};
    size_t subblocks_per_unit = 3;
    size_t kernel = 6;
    size_t stem_filters = 8;
    size_t stem_kernel = 6;
    size_t stem_stride = 1;

    size_t stride_product() const;
};

struct LstmNetConfig {
    size_t layers = 2;
    size_t hidden = 64;
    size_t head_hidden = 32;
};

enum class FusionInput { Features, Logits };

const char* fusion_input_name(FusionInput f);
FusionInput fusion_input_from_name(std::string_view name);

struct FusionConfig {
    FusionInput input = FusionInput::Features;
};

struct ConvLayer {
    nd::Tensor w, b;  // [F,K,C], [F]
};

struct DenseLayer {
    nd::Tensor w, b;  // [In,Out], [Out]
};

struct BnLayer {
    nd::Tensor gamma, beta;
    BatchNormState state;
};

// BN -> ReLU -> Conv with a residual add; shape-changing blocks project the
// skip path with a 1x1 strided convolution.
struct SubBlock {
    BnLayer bn;
    ConvLayer conv;
    size_t stride = 1;
    bool has_proj = false;
    ConvLayer proj;
};

struct ResTcn {
    ResTcnConfig cfg;
    ConvLayer stem;
    std::vector<SubBlock> blocks;
    DenseLayer head;  // pooled features -> logits
};

struct LstmNet {
    LstmNetConfig cfg;
    std::vector<LstmParams> layers;
    DenseLayer fc1;  // hidden -> head_hidden
    DenseLayer fc2;  // head_hidden -> logits
};

struct FusionHead {
    FusionConfig cfg;
    DenseLayer fc;
};

struct ModelBundle {
    Task task = Task::Paretic;
    size_t num_classes = 2;
    size_t in_channels = 0;
    size_t window_len = 0;
    ResTcn tcn;
    LstmNet lstm;
    FusionHead fusion;
};

// Seeded init: fan-in-scaled uniform weights, zero biases, BN gamma=1 beta=0,
// LSTM forget-gate bias 1. window_len must survive the stride schedule.
ModelBundle make_bundle(Task task, size_t in_channels, size_t window_len, uint64_t seed,
                        const ResTcnConfig& tcn_cfg = {}, const LstmNetConfig& lstm_cfg = {},
                        const FusionConfig& fusion_cfg = {});

struct NamedTensor {
    std::string name;
    nd::Tensor* tensor;
    bool trainable;
};

// Stable enumeration of every tensor in the bundle; BN running stats are
// listed as non-trainable.
std::vector<NamedTensor> named_tensors(ModelBundle& m);

// zero-filled gradient holder with the same parameter shapes
ModelBundle make_grads(const ModelBundle& m);

struct SubBlockCache {
    nd::Tensor x;  // block input
    BatchNormCache bn;
    nd::Tensor bn_out, relu_out;
};

struct TcnCache {
    nd::Tensor x;
    nd::Tensor stem_out;
    std::vector<SubBlockCache> blocks;
    nd::Tensor pooled;  // [B, C_last]
    size_t t_last = 0;
};

struct HeadOut {
    nd::Tensor features, logits;
};

HeadOut tcn_forward(ResTcn& net, const nd::Tensor& x, Mode mode, TcnCache* cache = nullptr);

// dfeatures: extra gradient flowing directly into the pooled features (the
// fusion path); may be null. Accumulates into grads.tcn; dx optional.
void tcn_backward(const ResTcn& net, const TcnCache& cache, const nd::Tensor& dlogits,
                  const nd::Tensor* dfeatures, ResTcn& grads, nd::Tensor* dx = nullptr);

struct LstmNetCache {
    std::vector<nd::Tensor> inputs;  // per layer
    std::vector<LstmSeqCache> layers;
    nd::Tensor h_last;   // [B, H]
    nd::Tensor fc1_pre;  // pre-ReLU [B, head_hidden]
};

HeadOut lstm_forward(LstmNet& net, const nd::Tensor& x, LstmNetCache* cache = nullptr);

void lstm_backward_net(const LstmNet& net, const LstmNetCache& cache, const nd::Tensor& dlogits,
                       const nd::Tensor* dfeatures, LstmNet& grads, nd::Tensor* dx = nullptr);

struct FusionCache {
    nd::Tensor input;  // [B, D_tcn + D_lstm]
    size_t d_tcn = 0;
};

nd::Tensor fusion_forward(FusionHead& head, const nd::Tensor& tcn_in, const nd::Tensor& lstm_in,
                          FusionCache* cache = nullptr);

struct FusionInGrads {
    nd::Tensor dtcn_in, dlstm_in;
};

FusionInGrads fusion_backward(const FusionHead& head, const FusionCache& cache,
                              const nd::Tensor& dlogits, FusionHead& grads);

struct BundleCache {
    TcnCache tcn;
    LstmNetCache lstm;
    FusionCache fusion;
};

struct BundleOut {
    HeadOut tcn, lstm;
    nd::Tensor fusion_logits;
};

BundleOut bundle_forward(ModelBundle& m, const nd::Tensor& x, Mode mode,
                         BundleCache* cache = nullptr);

// Accumulates gradients for the whole bundle given d(loss)/d(logits) of each
// head. Fusion input gradients flow into features or sub-network logits
// according to the fusion mode.
void bundle_backward(const ModelBundle& m, const BundleCache& cache, const nd::Tensor& dtcn_logits,
                     const nd::Tensor& dlstm_logits, const nd::Tensor& dfusion_logits,
                     ModelBundle& grads);

// Versioned binary container; write -> read round-trips bit-exactly.
// extra_json carries run provenance (task flags, split, training config).
void save_checkpoint(const std::string& path, ModelBundle& m, const std::string& extra_json = "{}");
ModelBundle load_checkpoint(const std::string& path, std::string* extra_json = nullptr);

}  // namespace paresis
