#include "paresis/layers.hpp"

#include <algorithm>
#include <cmath>

namespace paresis::nd {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// total left pad for same padding so that T' = ceil(T/S)
size_t same_pad_left(size_t t, const ConvSpec& s) {
    size_t t_out = (t + s.stride - 1) / s.stride;
    size_t span = (t_out - 1) * s.stride + s.kernel;
    size_t total = span > t ? span - t : 0;
    return total / 2;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

size_t conv_output_len(size_t input_len, const ConvSpec& spec) {
    require(spec.kernel >= 1 && spec.stride >= 1 && spec.filters >= 1,
            "conv1d: filters, kernel and stride must be positive");
    if (spec.padding == Padding::Same) return (input_len + spec.stride - 1) / spec.stride;
    require(input_len >= spec.kernel, "conv1d: input length " + std::to_string(input_len) +
                                          " shorter than kernel " + std::to_string(spec.kernel) +
                                          " with valid padding");
    return (input_len - spec.kernel) / spec.stride + 1;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec) {
    require(x.ndim() == 3, "conv1d: x must be [B,T,C], got " + x.shape_str());
    require(w.ndim() == 3 && w.dim(0) == spec.filters && w.dim(1) == spec.kernel,
            "conv1d: w must be [F,K,C] matching spec, got " + w.shape_str());
    require(w.dim(2) == x.dim(2), "conv1d: channel mismatch, x " + x.shape_str() + " vs w " +
                                      w.shape_str());
    require(b.ndim() == 1 && b.dim(0) == spec.filters,
            "conv1d: b must be [F], got " + b.shape_str());

    const size_t bsz = x.dim(0), t_in = x.dim(1), c = x.dim(2);
    const size_t f = spec.filters, k = spec.kernel, s = spec.stride;
    const size_t t_out = conv_output_len(t_in, spec);
    const size_t pad_left = spec.padding == Padding::Same ? same_pad_left(t_in, spec) : 0;

    Tensor y({bsz, t_out, f});
    for (size_t bi = 0; bi < bsz; ++bi) {
        const double* xb = x.data() + bi * t_in * c;
        double* yb = y.data() + bi * t_out * f;
        for (size_t to = 0; to < t_out; ++to) {
            double* yrow = yb + to * f;
            for (size_t fi = 0; fi < f; ++fi) yrow[fi] = b(fi);
            for (size_t ki = 0; ki < k; ++ki) {
                ptrdiff_t ti = static_cast<ptrdiff_t>(to * s + ki) - static_cast<ptrdiff_t>(pad_left);
                if (ti < 0 || ti >= static_cast<ptrdiff_t>(t_in)) continue;
                const double* xrow = xb + static_cast<size_t>(ti) * c;
                for (size_t fi = 0; fi < f; ++fi) {
                    const double* wrow = w.data() + (fi * k + ki) * c;
                    double acc = 0.0;
                    for (size_t ci = 0; ci < c; ++ci) acc += xrow[ci] * wrow[ci];
                    yrow[fi] += acc;
                }
            }
        }
    }
    y.check_finite("conv1d");
    return y;
}

ConvGrads conv1d_backward(const Tensor& x, const Tensor& w, const ConvSpec& spec,
                          const Tensor& dy) {
    const size_t bsz = x.dim(0), t_in = x.dim(1), c = x.dim(2);
    const size_t f = spec.filters, k = spec.kernel, s = spec.stride;
    const size_t t_out = conv_output_len(t_in, spec);
    require(dy.ndim() == 3 && dy.dim(0) == bsz && dy.dim(1) == t_out && dy.dim(2) == f,
            "conv1d_backward: dy shape " + dy.shape_str() + " does not match output [" +
                std::to_string(bsz) + "," + std::to_string(t_out) + "," + std::to_string(f) + "]");
    const size_t pad_left = spec.padding == Padding::Same ? same_pad_left(t_in, spec) : 0;

    ConvGrads g{Tensor(x.shape), Tensor(w.shape), Tensor({f})};
    for (size_t bi = 0; bi < bsz; ++bi) {
        const double* xb = x.data() + bi * t_in * c;
        double* dxb = g.dx.data() + bi * t_in * c;
        const double* dyb = dy.data() + bi * t_out * f;
        for (size_t to = 0; to < t_out; ++to) {
            const double* dyrow = dyb + to * f;
            for (size_t fi = 0; fi < f; ++fi) g.db(fi) += dyrow[fi];
            for (size_t ki = 0; ki < k; ++ki) {
                ptrdiff_t ti = static_cast<ptrdiff_t>(to * s + ki) - static_cast<ptrdiff_t>(pad_left);
                if (ti < 0 || ti >= static_cast<ptrdiff_t>(t_in)) continue;
                const double* xrow = xb + static_cast<size_t>(ti) * c;
                double* dxrow = dxb + static_cast<size_t>(ti) * c;
                for (size_t fi = 0; fi < f; ++fi) {
                    double gv = dyrow[fi];
                    const double* wrow = w.data() + (fi * k + ki) * c;
                    double* dwrow = g.dw.data() + (fi * k + ki) * c;
                    for (size_t ci = 0; ci < c; ++ci) {
                        dxrow[ci] += gv * wrow[ci];
                        dwrow[ci] += gv * xrow[ci];
                    }
                }
            }
        }
    }
    g.dx.check_finite("conv1d_backward.dx");
    g.dw.check_finite("conv1d_backward.dw");
    return g;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode, BatchNormCache* cache) {
    require(x.ndim() >= 2, "batchnorm: x must have a trailing channel axis, got " + x.shape_str());
    const size_t c = x.shape.back();
    require(gamma.numel() == c && beta.numel() == c,
            "batchnorm: gamma/beta size must equal channel count " + std::to_string(c));
    const size_t rows = x.numel() / c;

    Tensor y(x.shape);
    if (mode == Mode::Eval) {
        if (!state.initialized) throw Error("batchnorm: uninitialized running statistics");
        for (size_t c0 = 0; c0 < c; ++c0) {
            double inv = 1.0 / std::sqrt(state.running_var(c0) + state.eps);
            double g = gamma(c0) * inv;
            double off = beta(c0) - state.running_mean(c0) * g;
            for (size_t r = 0; r < rows; ++r) y.v[r * c + c0] = x.v[r * c + c0] * g + off;
        }
        y.check_finite("batchnorm");
        return y;
    }

    Tensor mean({c}), var({c});
    for (size_t r = 0; r < rows; ++r) {
        const double* xrow = x.data() + r * c;
        for (size_t c0 = 0; c0 < c; ++c0) mean(c0) += xrow[c0];
    }
    for (size_t c0 = 0; c0 < c; ++c0) mean(c0) /= static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r) {
        const double* xrow = x.data() + r * c;
        for (size_t c0 = 0; c0 < c; ++c0) {
            double d = xrow[c0] - mean(c0);
            var(c0) += d * d;
        }
    }
    for (size_t c0 = 0; c0 < c; ++c0) var(c0) /= static_cast<double>(rows);

    Tensor inv_std({c});
    for (size_t c0 = 0; c0 < c; ++c0) inv_std(c0) = 1.0 / std::sqrt(var(c0) + state.eps);

    Tensor xhat(x.shape);
    for (size_t r = 0; r < rows; ++r) {
        const double* xrow = x.data() + r * c;
        double* hrow = xhat.data() + r * c;
        double* yrow = y.data() + r * c;
        for (size_t c0 = 0; c0 < c; ++c0) {
            hrow[c0] = (xrow[c0] - mean(c0)) * inv_std(c0);
            yrow[c0] = gamma(c0) * hrow[c0] + beta(c0);
        }
    }

    if (!state.initialized) {
        state.running_mean = mean;
        state.running_var = var;
        state.initialized = true;
    } else {
        for (size_t c0 = 0; c0 < c; ++c0) {
            state.running_mean(c0) =
                (1.0 - state.momentum) * state.running_mean(c0) + state.momentum * mean(c0);
            state.running_var(c0) =
                (1.0 - state.momentum) * state.running_var(c0) + state.momentum * var(c0);
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    y.check_finite("batchnorm");
    return y;
}

BatchNormGrads batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                                  const Tensor& gamma) {
    const size_t c = dy.shape.back();
    const size_t rows = dy.numel() / c;
    require(cache.xhat.same_shape(dy), "batchnorm_backward: cache/dy shape mismatch, " +
                                           cache.xhat.shape_str() + " vs " + dy.shape_str());

    BatchNormGrads g{Tensor(dy.shape), Tensor({c}), Tensor({c})};
    for (size_t r = 0; r < rows; ++r) {
        const double* dyrow = dy.data() + r * c;
        const double* hrow = cache.xhat.data() + r * c;
        for (size_t c0 = 0; c0 < c; ++c0) {
            g.dbeta(c0) += dyrow[c0];
            g.dgamma(c0) += dyrow[c0] * hrow[c0];
        }
    }
    const double n = static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r) {
        const double* dyrow = dy.data() + r * c;
        const double* hrow = cache.xhat.data() + r * c;
        double* dxrow = g.dx.data() + r * c;
        for (size_t c0 = 0; c0 < c; ++c0) {
            dxrow[c0] = gamma(c0) * cache.inv_std(c0) *
                        (dyrow[c0] - g.dbeta(c0) / n - hrow[c0] * g.dgamma(c0) / n);
        }
    }
    g.dx.check_finite("batchnorm_backward.dx");
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    require(x.same_shape(dy), "relu_backward: shape mismatch " + x.shape_str() + " vs " +
                                  dy.shape_str());
    Tensor dx(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) dx.v[i] = x.v[i] > 0.0 ? dy.v[i] : 0.0;
    return dx;
}

namespace {

// one recurrence step; pre [B,4H] already holds x W_x + h W_h + b
void lstm_apply_gates(size_t bsz, size_t h, double* pre, const double* c_prev, double* c_out,
                      double* tanh_c_out, double* h_out) {
    for (size_t bi = 0; bi < bsz; ++bi) {
        double* g = pre + bi * 4 * h;
        const double* cp = c_prev + bi * h;
        double* co = c_out + bi * h;
        double* tc = tanh_c_out + bi * h;
        double* ho = h_out + bi * h;
        for (size_t j = 0; j < h; ++j) {
            double gi = sigmoid(g[j]);
            double gf = sigmoid(g[h + j]);
            double gg = std::tanh(g[2 * h + j]);
            double go = sigmoid(g[3 * h + j]);
            double c = gf * cp[j] + gi * gg;
            g[j] = gi;
            g[h + j] = gf;
            g[2 * h + j] = gg;
            g[3 * h + j] = go;
            co[j] = c;
            tc[j] = std::tanh(c);
            ho[j] = go * tc[j];
        }
    }
}

} // namespace

LstmStep lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                   const LstmParams& p) {
    require(x_t.ndim() == 2 && h_prev.ndim() == 2 && c_prev.ndim() == 2,
            "lstm_cell: x_t, h_prev, c_prev must be [B,*]");
    const size_t bsz = x_t.dim(0), in = x_t.dim(1), h = p.hidden();
    require(p.wx.ndim() == 2 && p.wx.dim(0) == in && p.wx.dim(1) == 4 * h,
            "lstm_cell: wx shape " + p.wx.shape_str() + " does not match input " +
                std::to_string(in) + " and hidden " + std::to_string(h));
    require(p.wh.dim(1) == 4 * h && p.b.numel() == 4 * h, "lstm_cell: wh/b shape mismatch");
    require(h_prev.dim(0) == bsz && h_prev.dim(1) == h && c_prev.dim(0) == bsz &&
                c_prev.dim(1) == h,
            "lstm_cell: state shape mismatch");

    Tensor pre({bsz, 4 * h});
    for (size_t bi = 0; bi < bsz; ++bi)
        for (size_t j = 0; j < 4 * h; ++j) pre(bi, j) = p.b(j);
    gemm(false, false, bsz, 4 * h, in, x_t.data(), p.wx.data(), pre.data(), true);
    gemm(false, false, bsz, 4 * h, h, h_prev.data(), p.wh.data(), pre.data(), true);

    LstmStep out{Tensor({bsz, h}), Tensor({bsz, h})};
    Tensor tanh_c({bsz, h});
    lstm_apply_gates(bsz, h, pre.data(), c_prev.data(), out.c.data(), tanh_c.data(), out.h.data());
    out.h.check_finite("lstm_cell.h");
    out.c.check_finite("lstm_cell.c");
    return out;
}

Tensor lstm_sequence(const Tensor& x, const LstmParams& p, LstmSeqCache* cache) {
    require(x.ndim() == 3, "lstm_sequence: x must be [B,T,In], got " + x.shape_str());
    const size_t bsz = x.dim(0), t_len = x.dim(1), in = x.dim(2), h = p.hidden();
    require(p.wx.dim(0) == in && p.wx.dim(1) == 4 * h && p.wh.dim(1) == 4 * h &&
                p.b.numel() == 4 * h,
            "lstm_sequence: parameter shapes do not match input " + x.shape_str());

    // input contribution for all steps in one pass: [B*T, In] x [In, 4H]
    Tensor pre_x({bsz * t_len, 4 * h});
    gemm(false, false, bsz * t_len, 4 * h, in, x.data(), p.wx.data(), pre_x.data(), false);

    Tensor gates({t_len, bsz, 4 * h});
    Tensor cs({t_len, bsz, h});
    Tensor tanh_c({t_len, bsz, h});
    Tensor hs({t_len, bsz, h});
    Tensor h_prev({bsz, h});
    Tensor c_prev({bsz, h});
    Tensor pre({bsz, 4 * h});

    for (size_t t = 0; t < t_len; ++t) {
        for (size_t bi = 0; bi < bsz; ++bi) {
            const double* px = pre_x.data() + (bi * t_len + t) * 4 * h;
            double* prow = pre.data() + bi * 4 * h;
            for (size_t j = 0; j < 4 * h; ++j) prow[j] = px[j] + p.b(j);
        }
        gemm(false, false, bsz, 4 * h, h, h_prev.data(), p.wh.data(), pre.data(), true);

        double* gts = gates.data() + t * bsz * 4 * h;
        std::copy(pre.data(), pre.data() + bsz * 4 * h, gts);
        lstm_apply_gates(bsz, h, gts, c_prev.data(), cs.data() + t * bsz * h,
                         tanh_c.data() + t * bsz * h, hs.data() + t * bsz * h);
        std::copy(hs.data() + t * bsz * h, hs.data() + (t + 1) * bsz * h, h_prev.data());
        std::copy(cs.data() + t * bsz * h, cs.data() + (t + 1) * bsz * h, c_prev.data());
    }

    // emit [B,T,H]
    Tensor out({bsz, t_len, h});
    for (size_t t = 0; t < t_len; ++t)
        for (size_t bi = 0; bi < bsz; ++bi)
            std::copy(hs.data() + (t * bsz + bi) * h, hs.data() + (t * bsz + bi + 1) * h,
                      out.data() + (bi * t_len + t) * h);
    out.check_finite("lstm_sequence");

    if (cache) {
        cache->gates = std::move(gates);
        cache->cs = std::move(cs);
        cache->tanh_c = std::move(tanh_c);
        cache->hs = std::move(hs);
    }
    return out;
}

LstmGrads lstm_backward(const Tensor& x, const LstmParams& p, const LstmSeqCache& cache,
                        const Tensor& dh_out) {
    const size_t bsz = x.dim(0), t_len = x.dim(1), in = x.dim(2), h = p.hidden();
    require(dh_out.ndim() == 3 && dh_out.dim(0) == bsz && dh_out.dim(1) == t_len &&
                dh_out.dim(2) == h,
            "lstm_backward: dh_out shape " + dh_out.shape_str() + " mismatch");

    LstmGrads g{Tensor(x.shape), Tensor(p.wx.shape), Tensor(p.wh.shape), Tensor(p.b.shape)};
    Tensor dpre_all({t_len, bsz, 4 * h}); // accumulated for the big input-side matmuls
    Tensor dh({bsz, h}), dc({bsz, h}), dpre({bsz, 4 * h});

    for (size_t t = t_len; t-- > 0;) {
        // dh += upstream gradient at step t
        for (size_t bi = 0; bi < bsz; ++bi) {
            const double* up = dh_out.data() + (bi * t_len + t) * h;
            double* dhrow = dh.data() + bi * h;
            for (size_t j = 0; j < h; ++j) dhrow[j] += up[j];
        }
        const double* gts = cache.gates.data() + t * bsz * 4 * h;
        const double* tc = cache.tanh_c.data() + t * bsz * h;
        const double* c_prev = t > 0 ? cache.cs.data() + (t - 1) * bsz * h : nullptr;

        for (size_t bi = 0; bi < bsz; ++bi) {
            const double* gr = gts + bi * 4 * h;
            const double* tcr = tc + bi * h;
            double* dhr = dh.data() + bi * h;
            double* dcr = dc.data() + bi * h;
            double* dpr = dpre.data() + bi * 4 * h;
            for (size_t j = 0; j < h; ++j) {
                double gi = gr[j], gf = gr[h + j], gg = gr[2 * h + j], go = gr[3 * h + j];
                double dho = dhr[j];
                double dtanh = dho * go;
                double dcj = dcr[j] + dtanh * (1.0 - tcr[j] * tcr[j]);
                double cprev_val = c_prev ? c_prev[bi * h + j] : 0.0;
                double di = dcj * gg;
                double df = dcj * cprev_val;
                double dg = dcj * gi;
                double do_ = dho * tcr[j];
                dpr[j] = di * gi * (1.0 - gi);
                dpr[h + j] = df * gf * (1.0 - gf);
                dpr[2 * h + j] = dg * (1.0 - gg * gg);
                dpr[3 * h + j] = do_ * go * (1.0 - go);
                dcr[j] = dcj * gf; // becomes dc for step t-1
            }
        }

        std::copy(dpre.data(), dpre.data() + bsz * 4 * h, dpre_all.data() + t * bsz * 4 * h);

        // recurrent-path gradients
        if (t > 0) {
            const double* h_prev = cache.hs.data() + (t - 1) * bsz * h;
            gemm(true, false, h, 4 * h, bsz, h_prev, dpre.data(), g.dwh.data(), true);
            dh.fill(0.0);
            gemm(false, true, bsz, h, 4 * h, dpre.data(), p.wh.data(), dh.data(), true);
        }
        for (size_t bi = 0; bi < bsz; ++bi) {
            const double* dpr = dpre.data() + bi * 4 * h;
            for (size_t j = 0; j < 4 * h; ++j) g.db(j) += dpr[j];
        }
    }

    // input-side gradients with [B*T] layouts; dpre_all is [T,B,4H], x is [B,T,In]
    Tensor dpre_bt({bsz * t_len, 4 * h});
    for (size_t t = 0; t < t_len; ++t)
        for (size_t bi = 0; bi < bsz; ++bi)
            std::copy(dpre_all.data() + (t * bsz + bi) * 4 * h,
                      dpre_all.data() + (t * bsz + bi + 1) * 4 * h,
                      dpre_bt.data() + (bi * t_len + t) * 4 * h);
    gemm(true, false, in, 4 * h, bsz * t_len, x.data(), dpre_bt.data(), g.dwx.data(), true);
    gemm(false, true, bsz * t_len, in, 4 * h, dpre_bt.data(), p.wx.data(), g.dx.data(), false);

    g.dx.check_finite("lstm_backward.dx");
    g.dwx.check_finite("lstm_backward.dwx");
    g.dwh.check_finite("lstm_backward.dwh");
    return g;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.ndim() == 2 && w.ndim() == 2 && x.dim(1) == w.dim(0),
            "dense: incompatible shapes x " + x.shape_str() + " w " + w.shape_str());
    require(b.numel() == w.dim(1), "dense: bias size mismatch");
    Tensor y({x.dim(0), w.dim(1)});
    for (size_t i = 0; i < x.dim(0); ++i)
        for (size_t j = 0; j < w.dim(1); ++j) y(i, j) = b(j);
    gemm(false, false, x.dim(0), w.dim(1), x.dim(1), x.data(), w.data(), y.data(), true);
    y.check_finite("dense");
    return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
    require(dy.ndim() == 2 && dy.dim(0) == x.dim(0) && dy.dim(1) == w.dim(1),
            "dense_backward: dy shape " + dy.shape_str() + " mismatch");
    DenseGrads g{Tensor(x.shape), Tensor(w.shape), Tensor({w.dim(1)})};
    gemm(true, false, w.dim(0), w.dim(1), x.dim(0), x.data(), dy.data(), g.dw.data(), true);
    gemm(false, true, x.dim(0), x.dim(1), w.dim(1), dy.data(), w.data(), g.dx.data(), false);
    for (size_t i = 0; i < dy.dim(0); ++i)
        for (size_t j = 0; j < dy.dim(1); ++j) g.db(j) += dy(i, j);
    return g;
}

Tensor softmax_t(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0))
        throw ContractError("softmax_t: temperature must be positive, got " +
                            std::to_string(temperature));
    require(logits.ndim() == 1 || logits.ndim() == 2,
            "softmax_t: logits must be [N] or [B,N], got " + logits.shape_str());
    const size_t n = logits.shape.back();
    require(n >= 2, "softmax_t: need at least 2 classes, got " + std::to_string(n));
    const size_t rows = logits.numel() / n;

    Tensor out(logits.shape);
    for (size_t r = 0; r < rows; ++r) {
        const double* z = logits.data() + r * n;
        double* o = out.data() + r * n;
        double m = z[0];
        for (size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            o[i] = std::exp((z[i] - m) / temperature);
            sum += o[i];
        }
        for (size_t i = 0; i < n; ++i) o[i] /= sum;
    }
    out.check_finite("softmax_t");
    return out;
}

Tensor mean_time(const Tensor& x) {
    require(x.ndim() == 3, "mean_time: x must be [B,T,C], got " + x.shape_str());
    const size_t bsz = x.dim(0), t_len = x.dim(1), c = x.dim(2);
    Tensor y({bsz, c});
    for (size_t bi = 0; bi < bsz; ++bi) {
        double* yrow = y.data() + bi * c;
        for (size_t t = 0; t < t_len; ++t) {
            const double* xrow = x.data() + (bi * t_len + t) * c;
            for (size_t ci = 0; ci < c; ++ci) yrow[ci] += xrow[ci];
        }
        for (size_t ci = 0; ci < c; ++ci) yrow[ci] /= static_cast<double>(t_len);
    }
    return y;
}

Tensor mean_time_backward(const Tensor& dy, size_t time_len) {
    require(dy.ndim() == 2, "mean_time_backward: dy must be [B,C]");
    const size_t bsz = dy.dim(0), c = dy.dim(1);
    Tensor dx({bsz, time_len, c});
    for (size_t bi = 0; bi < bsz; ++bi)
        for (size_t t = 0; t < time_len; ++t)
            for (size_t ci = 0; ci < c; ++ci)
                dx(bi, t, ci) = dy(bi, ci) / static_cast<double>(time_len);
    return dx;
}

} // namespace paresis::nd
