#pragma once
#include <optional>

#include "paresis/tensor.hpp"

namespace paresis::nd {

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };

struct ConvSpec {
    size_t filters = 8;
    size_t kernel = 6;
    size_t stride = 1;
    Padding padding = Padding::Same;
};

// output length under a spec; throws for valid padding with input_len < kernel
size_t conv_output_len(size_t input_len, const ConvSpec& spec);

// x [B,T,C], w [F,K,C], b [F] -> y [B,T',F]; cross-correlation over the time axis
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec);

struct ConvGrads {
    Tensor dx, dw, db;
};
ConvGrads conv1d_backward(const Tensor& x, const Tensor& w, const ConvSpec& spec,
                          const Tensor& dy);

// ---------------------------------------------------------------------------

struct BatchNormState {
    Tensor running_mean, running_var; // [C]
    bool initialized = false;
    double eps = 1e-5;
    double momentum = 0.1;
};

struct BatchNormCache {
    Tensor xhat;    // same shape as x
    Tensor inv_std; // [C]
};

// x [..., C]: statistics per trailing channel over all leading axes.
// Train mode normalizes with batch statistics and updates the running ones;
// eval mode requires initialized running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor dx, dgamma, dbeta;
};
// train-mode backward through the batch statistics
BatchNormGrads batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                                  const Tensor& gamma);

// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x);
// subgradient 0 at x == 0
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// ---------------------------------------------------------------------------

// gate layout along the 4H axis: input, forget, cell candidate, output
struct LstmParams {
    Tensor wx; // [In, 4H]
    Tensor wh; // [H, 4H]
    Tensor b;  // [4H]
    size_t hidden() const { return wh.dim(0); }
    size_t input() const { return wx.dim(0); }
};

struct LstmStep {
    Tensor h, c; // [B,H]
};
LstmStep lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                   const LstmParams& p);

struct LstmSeqCache {
    Tensor gates;  // [T,B,4H] post-activation
    Tensor cs;     // [T,B,H]
    Tensor tanh_c; // [T,B,H]
    Tensor hs;     // [T,B,H]
};

// x [B,T,In] -> all hidden states [B,T,H]; zero initial h and c
Tensor lstm_sequence(const Tensor& x, const LstmParams& p, LstmSeqCache* cache = nullptr);

struct LstmGrads {
    Tensor dx, dwx, dwh, db;
};
// full backpropagation through time; dh_out [B,T,H] is the gradient on every
// emitted hidden state
LstmGrads lstm_backward(const Tensor& x, const LstmParams& p, const LstmSeqCache& cache,
                        const Tensor& dh_out);

// ---------------------------------------------------------------------------

// y = x W + b; x [B,I], w [I,O], b [O]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
    Tensor dx, dw, db;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

// ---------------------------------------------------------------------------

// temperature-softened distribution; x [N] or [B,N], normalized per row.
// Computed with max subtraction; rows sum to 1 within 1e-12.
Tensor softmax_t(const Tensor& logits, double temperature);

// mean over the time axis: x [B,T,C] -> [B,C]
Tensor mean_time(const Tensor& x);
Tensor mean_time_backward(const Tensor& dy, size_t time_len);

} // namespace paresis::nd
