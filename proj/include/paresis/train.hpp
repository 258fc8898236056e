#pragma once

#include <string>
#include <vector>

#include "paresis/adam.hpp"
#include "paresis/distill.hpp"
#include "paresis/models.hpp"
#include "paresis/windowing.hpp"

namespace paresis {

enum class ModelMode { Fused, TcnOnly, LstmOnly };

const char* model_mode_name(ModelMode m);
ModelMode model_mode_from_name(std::string_view name);

struct TrainConfig {
    double temperature = 4.0;
    double lr = 1e-3;
    size_t batch_size = 64;
    size_t epochs = 10;
    uint64_t seed = 0;
    AdamConfig adam;  // lr field ignored; lr above wins
    LossFlags flags;
    ModelMode mode = ModelMode::Fused;
};

struct EpochRecord {
    size_t epoch = 0;  // 1-based
    LossBreakdown loss;
    double val_accuracy = 0.0;
};

struct TrainResult {
    ModelBundle best;  // parameters at the best validation accuracy
    double best_val_accuracy = 0.0;
    size_t best_epoch = 0;
    std::vector<EpochRecord> history;
};

// Deterministic given cfg.seed: shuffle order, reduction order, and the
// retained checkpoint are all reproducible bit-exactly. A non-finite loss
// aborts with the offending epoch and batch named. With an empty validation
// set, checkpoint selection falls back to train-set accuracy.
TrainResult train(ModelBundle model, const Dataset& data, const TrainConfig& cfg);

// [count, T, F] batch assembled from windows[idx[from .. from+count)]
nd::Tensor batch_tensor(const std::vector<NormalizedWindow>& ws, const std::vector<size_t>& idx,
                        size_t from, size_t count);

std::vector<int> predict(ModelBundle& m, const std::vector<NormalizedWindow>& ws, ModelMode mode,
                         size_t batch_size = 64);

double evaluate_accuracy(ModelBundle& m, const std::vector<NormalizedWindow>& ws, Task task,
                         ModelMode mode, size_t batch_size = 64);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace paresis
