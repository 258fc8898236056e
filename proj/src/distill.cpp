#include "paresis/distill.hpp"

#include <cmath>

#include "paresis/common.hpp"
#include "paresis/layers.hpp"

namespace paresis {

namespace {
constexpr double kProbFloor = 1e-12;
}

SoftenedDistribution soften(const double* logits, size_t n, double temperature) {
    nd::Tensor z({n});
    std::copy_n(logits, n, z.v.begin());
    nd::Tensor p = softmax_t(z, temperature);
    return {std::move(p.v), temperature};
}

double fkd_loss(const SoftenedDistribution& teacher, const SoftenedDistribution& student) {
    if (teacher.probs.size() != student.probs.size())
        throw ContractError("fkd_loss: arity mismatch (" + std::to_string(teacher.probs.size()) +
                            " vs " + std::to_string(student.probs.size()) + ")");
    if (teacher.temperature != student.temperature)
        throw ContractError("fkd_loss: temperature mismatch");
    double kl = 0.0;
    for (size_t i = 0; i < teacher.probs.size(); ++i) {
        double t = teacher.probs[i];
        if (t <= 0.0) continue;
        kl += t * std::log(t / std::max(student.probs[i], kProbFloor));
    }
    return kl;
}

double cross_entropy(const std::vector<double>& onehot, const std::vector<double>& probs) {
    if (onehot.size() != probs.size())
        throw ContractError("cross_entropy: arity mismatch");
    size_t ones = 0;
    for (double y : onehot) {
        if (y == 1.0)
            ++ones;
        else if (y != 0.0)
            throw ContractError("cross_entropy: truth is not one-hot");
    }
    if (ones != 1) throw ContractError("cross_entropy: truth is not one-hot");
    double ce = 0.0;
    for (size_t i = 0; i < onehot.size(); ++i)
        if (onehot[i] == 1.0) ce -= std::log(std::max(probs[i], kProbFloor));
    return ce;
}

LossBreakdown total_loss(const nd::Tensor& tcn_logits, const nd::Tensor& lstm_logits,
                         const nd::Tensor& fusion_logits, const std::vector<int>& truth,
                         double temperature, const LossFlags& flags, LossGrads* grads,
                         const nd::Tensor* teacher_probs) {
    if (tcn_logits.shape.size() != 2)
        throw ContractError("total_loss: logits must be [B, N]");
    if (!tcn_logits.same_shape(lstm_logits) || !tcn_logits.same_shape(fusion_logits))
        throw ContractError("total_loss: logit shapes differ: " + tcn_logits.shape_str() + " vs " +
                            lstm_logits.shape_str() + " vs " + fusion_logits.shape_str());
    const size_t b = tcn_logits.shape[0];
    const size_t n = tcn_logits.shape[1];
    if (truth.size() != b) throw ContractError("total_loss: truth length != batch size");
    if (teacher_probs && !teacher_probs->same_shape(fusion_logits))
        throw ContractError("total_loss: teacher override shape " + teacher_probs->shape_str() +
                            " != logits shape " + fusion_logits.shape_str());

    if (grads) {
        grads->dtcn = nd::Tensor({b, n});
        grads->dlstm = nd::Tensor({b, n});
        grads->dfusion = nd::Tensor({b, n});
    }

    const double ce_temp = flags.soft_ce ? temperature : 1.0;
    const double fkd_scale = flags.fkd_t2_scaling ? temperature * temperature : 1.0;
    const double inv_b = 1.0 / static_cast<double>(b);

    LossBreakdown out;
    const nd::Tensor* heads[3] = {&fusion_logits, &tcn_logits, &lstm_logits};
    double* ce_slots[3] = {&out.fusion_ce, &out.tcn_ce, &out.lstm_ce};
    double* fkd_slots[3] = {nullptr, &out.tcn_fkd, &out.lstm_fkd};
    nd::Tensor* grad_slots[3] = {grads ? &grads->dfusion : nullptr,
                                 grads ? &grads->dtcn : nullptr,
                                 grads ? &grads->dlstm : nullptr};

    for (size_t bi = 0; bi < b; ++bi) {
        int label = truth[bi];
        if (label < 0 || static_cast<size_t>(label) >= n)
            throw ContractError("total_loss: label out of range at sample " + std::to_string(bi));

        SoftenedDistribution teacher =
            teacher_probs
                ? SoftenedDistribution{{teacher_probs->v.begin() + static_cast<ptrdiff_t>(bi * n),
                                        teacher_probs->v.begin() + static_cast<ptrdiff_t>((bi + 1) * n)},
                                       temperature}
                : soften(&fusion_logits.v[bi * n], n, temperature);

        for (int head = 0; head < 3; ++head) {
            const double* z = &heads[head]->v[bi * n];
            SoftenedDistribution ce_dist = soften(z, n, ce_temp);
            double ce = -std::log(std::max(ce_dist.probs[static_cast<size_t>(label)], kProbFloor));
            *ce_slots[head] += ce * inv_b;
            if (grad_slots[head]) {
                double* g = &grad_slots[head]->v[bi * n];
                double ce_g = inv_b / ce_temp;
                for (size_t j = 0; j < n; ++j) g[j] += ce_dist.probs[j] * ce_g;
                g[label] -= ce_g;
            }

            if (head == 0) continue;  // the fusion head carries no FKD term
            SoftenedDistribution student = soften(z, n, temperature);
            *fkd_slots[head] += fkd_loss(teacher, student) * fkd_scale * inv_b;
            if (grad_slots[head]) {
                double* g = &grad_slots[head]->v[bi * n];
                double fkd_g = fkd_scale * inv_b / temperature;
                for (size_t j = 0; j < n; ++j)
                    g[j] += (student.probs[j] - teacher.probs[j]) * fkd_g;
            }
        }
    }

    out.total = out.fusion_ce + out.tcn_fkd + out.tcn_ce + out.lstm_fkd + out.lstm_ce;
    return out;
}

}  // namespace paresis
