#pragma once

#include <vector>

#include "dctkd/attention.hpp"
#include "dctkd/dct.hpp"
#include "dctkd/tensor.hpp"

namespace dctkd {

// Scalar knobs of the combined objective. Defaults are alpha=beta=1, delta=0;
// the Hinton-KD combination uses alpha=1, beta=0.1, delta=1.
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double delta = 0.0;
  double temperature = 4.0;
};

// Stage toggles mirroring the ablation rows: the coefficient pipeline builds
// up as DCT -> DC removal -> coefficient normalization, plus prediction
// gating and the optional Hinton term.
struct AblationFlags {
  bool use_dct = true;
  bool dc_removal = true;
  bool coeff_norm = true;
  bool gating = true;
  bool hinton = false;
};

// Validates stage dependencies (dc_removal needs use_dct, coeff_norm needs
// dc_removal) and returns the configuration; throws ConfigError otherwise.
AblationFlags ablation_variant(const AblationFlags& flags);

struct LossReport {
  std::vector<double> per_level_distances;  // batch means per level
  double l_dct = 0.0;
  double l_ce = 0.0;
  double l_kd = 0.0;
  double total = 0.0;
  double gate_open_fraction = 0.0;
};

// Full Eq. 3 distance: dct2 -> remove_dc -> normalize_coeffs on both maps,
// then sqrt(sum of squared coefficient differences). Both maps must be
// min-max normalized and share H x W.
TensorPtr dct_distance(Tape& tape, const ActivationMap& teacher_map,
                       const ActivationMap& student_map);

// Same distance with only the flagged pipeline stages applied (use_dct must
// be on; with dc_removal and coeff_norm off this equals the pixel l2
// distance of the maps by Parseval).
TensorPtr dct_stage_distance(Tape& tape, const ActivationMap& teacher_map,
                             const ActivationMap& student_map, const AblationFlags& flags);

// Per-sample gated level accumulation. When gating is on and the teacher's
// argmax differs from the label the value is exactly zero and no graph is
// built, so no distillation gradient can exist.
struct SampleDctLoss {
  TensorPtr value;                // scalar; null when gated out
  bool gate_open = false;
  std::vector<double> per_level;  // distances, empty when gated out
};
SampleDctLoss l_dct(Tape& tape, const std::vector<ActivationMap>& teacher_maps,
                    const std::vector<ActivationMap>& student_maps,
                    const Tensor& teacher_logits, int label, const AblationFlags& flags);

// AT baseline, per sample: sum over levels of the l2 distance between the
// l2-normalized vectorized raw maps. Scale-invariant in each map.
TensorPtr at_loss(Tape& tape, const std::vector<ActivationMap>& teacher_maps,
                  const std::vector<ActivationMap>& student_maps);

// Hinton response KD: T^2-scaled KL from the T-softened student distribution
// to the T-softened teacher distribution, batch mean. The teacher branch is
// treated as a constant.
TensorPtr hinton_kd(Tape& tape, const TensorPtr& teacher_logits,
                    const TensorPtr& student_logits, double temperature);

// total = alpha * dct + beta * ce + delta * kd. Null terms contribute zero.
struct CombinedLoss {
  TensorPtr total;
  LossReport report;
};
CombinedLoss combined_loss(Tape& tape, const TensorPtr& dct_term, const TensorPtr& ce_term,
                           const TensorPtr& kd_term, double gate_open_fraction,
                           std::vector<double> per_level_distances,
                           const LossWeights& weights);

}  // namespace dctkd
