#pragma once

#include <functional>
#include <vector>

#include "dctkd/data.hpp"
#include "dctkd/losses.hpp"
#include "dctkd/metrics.hpp"
#include "dctkd/model.hpp"

namespace dctkd {

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  int lr_decay_every = 12;
  double lr_decay_factor = 0.1;
  int batch_size = 32;
  uint64_t seed = 0;
  LossWeights weights;
  AblationFlags flags;
  Distiller distiller = Distiller::none;
};

void validate(const TrainConfig& config);

// lr(epoch) = lr0 * factor^floor(epoch / decay_every), epochs 0-based.
double lr_at_epoch(const TrainConfig& config, int epoch);

struct ExperimentRecord {
  int epoch = 0;
  double l_dct = 0.0, l_ce = 0.0, l_kd = 0.0, total = 0.0;
  double train_top1 = 0.0, train_top5 = 0.0, train_mca = 0.0;
  double val_top1 = 0.0, val_top5 = 0.0, val_mca = 0.0;
  double gate_open_fraction = 0.0;
  double epoch_wall_time_s = 0.0;
  std::vector<double> per_level_distances;  // epoch means over gated-in samples
};

// Classic momentum SGD with coupled weight decay:
// g' = g + wd*w; v = momentum*v + g'; w = w - lr*v.
struct SgdState {
  std::vector<std::vector<double>> velocity;  // one buffer per parameter
};
void sgd_step(std::vector<std::pair<std::string, TensorPtr>>& params, SgdState& state,
              double lr, double momentum, double weight_decay);

struct TrainResult {
  Model model;
  std::vector<ExperimentRecord> records;
};

using EpochCallback = std::function<void(const ExperimentRecord&)>;

// Distillation loop: per batch, teacher forward without gradients (memoized —
// the teacher is frozen and deterministic, so per-sample outputs are computed
// once and reused), student forward with gangways, map aggregation and
// normalization, combined loss per the configured distiller, backward, SGD
// step. Throws NumericError after emitting a diagnostic record if the loss
// goes non-finite.
TrainResult train_student(const Model& teacher, Model student,
                          const std::vector<SceneSample>& train,
                          const std::vector<SceneSample>& val, const TrainConfig& config,
                          const EpochCallback& on_epoch = nullptr);

// Cross-entropy-only training with the same machinery.
TrainResult train_vanilla(Model model, const std::vector<SceneSample>& train,
                          const std::vector<SceneSample>& val, const TrainConfig& config,
                          const EpochCallback& on_epoch = nullptr);

}  // namespace dctkd
