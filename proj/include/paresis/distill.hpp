#pragma once

#include <vector>

#include "paresis/tensor.hpp"

namespace paresis {

struct SoftenedDistribution {
    std::vector<double> probs;
    double temperature = 1.0;
};

SoftenedDistribution soften(const double* logits, size_t n, double temperature);

// KL(teacher || student); the teacher is a constant target (no gradient
// flows back into it).
double fkd_loss(const SoftenedDistribution& teacher, const SoftenedDistribution& student);

// -sum_i y_i ln(max(p_i, 1e-12)) for one-hot y
double cross_entropy(const std::vector<double>& onehot, const std::vector<double>& probs);

struct LossFlags {
    bool soft_ce = false;         // compute every CE term on softened probabilities
    bool fkd_t2_scaling = false;  // multiply FKD terms by temperature^2
};

struct LossBreakdown {
    double fusion_ce = 0.0;
    double tcn_ce = 0.0, lstm_ce = 0.0;
    double tcn_fkd = 0.0, lstm_fkd = 0.0;
    double total = 0.0;
};

struct LossGrads {
    nd::Tensor dtcn, dlstm, dfusion;  // d(total)/d(logits), batch-mean included
};

// Batch-mean objective: fusion CE + per-sub-network (FKD + CE). CE uses hard
// targets at temperature 1 unless soft_ce; FKD compares softened
// distributions at the given temperature with the fusion side detached.
// teacher_probs ([B,N], already softened) overrides the teacher, which lets
// finite-difference checks hold the detached side constant.
LossBreakdown total_loss(const nd::Tensor& tcn_logits, const nd::Tensor& lstm_logits,
                         const nd::Tensor& fusion_logits, const std::vector<int>& truth,
                         double temperature, const LossFlags& flags = {},
                         LossGrads* grads = nullptr, const nd::Tensor* teacher_probs = nullptr);

}  // namespace paresis
