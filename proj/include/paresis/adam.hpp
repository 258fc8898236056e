#pragma once

#include <cmath>

#include "paresis/common.hpp"
#include "paresis/tensor.hpp"

namespace paresis {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: applied to the parameter, not the gradient
};

struct AdamState {
    nd::Tensor m, v;
    size_t t = 0;
};

inline void adam_step(nd::Tensor& param, const nd::Tensor& grad, AdamState& st,
                      const AdamConfig& cfg) {
    if (!param.same_shape(grad))
        throw ContractError("adam_step: grad shape " + grad.shape_str() + " != param shape " +
                            param.shape_str());
    if (st.t == 0) {
        st.m = nd::Tensor(param.shape);
        st.v = nd::Tensor(param.shape);
    }
    ++st.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (size_t i = 0; i < param.numel(); ++i) {
        double g = grad.v[i];
        st.m.v[i] = cfg.beta1 * st.m.v[i] + (1.0 - cfg.beta1) * g;
        st.v.v[i] = cfg.beta2 * st.v.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = st.m.v[i] / bc1;
        double vhat = st.v.v[i] / bc2;
        param.v[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param.v[i]);
    }
}

}  // namespace paresis
