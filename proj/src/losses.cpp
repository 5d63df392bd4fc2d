#include "dctkd/losses.hpp"

#include <cmath>

namespace dctkd {

AblationFlags ablation_variant(const AblationFlags& flags) {
  if (flags.dc_removal && !flags.use_dct)
    throw ConfigError("dc_removal requires use_dct");
  if (flags.coeff_norm && !flags.dc_removal)
    throw ConfigError("coeff_norm requires dc_removal");
  return flags;
}

namespace {

void check_map_pair(const ActivationMap& t, const ActivationMap& s, bool want_normalized) {
  if (t.h != s.h || t.w != s.w)
    throw DimensionError("activation map shapes disagree: " + t.values->shape.str() +
                         " vs " + s.values->shape.str());
  if (want_normalized && (!t.normalized || !s.normalized))
    throw ContractError("dct distance expects min-max normalized maps");
}

}  // namespace

TensorPtr dct_stage_distance(Tape& tape, const ActivationMap& teacher_map,
                             const ActivationMap& student_map, const AblationFlags& flags) {
  ablation_variant(flags);
  if (!flags.use_dct)
    throw ContractError("dct_stage_distance requires use_dct");
  check_map_pair(teacher_map, student_map, true);

  DctSpectrum ts = dct2(tape, teacher_map);
  DctSpectrum ss = dct2(tape, student_map);
  if (flags.dc_removal) {
    ts = remove_dc(tape, ts);
    ss = remove_dc(tape, ss);
  }
  if (flags.coeff_norm) {
    ts = normalize_coeffs(tape, ts);
    ss = normalize_coeffs(tape, ss);
  }
  return l2_distance(tape, ts.coeffs, ss.coeffs);
}

TensorPtr dct_distance(Tape& tape, const ActivationMap& teacher_map,
                       const ActivationMap& student_map) {
  return dct_stage_distance(tape, teacher_map, student_map, AblationFlags{});
}

SampleDctLoss l_dct(Tape& tape, const std::vector<ActivationMap>& teacher_maps,
                    const std::vector<ActivationMap>& student_maps,
                    const Tensor& teacher_logits, int label, const AblationFlags& flags) {
  ablation_variant(flags);
  if (teacher_maps.size() != student_maps.size() || teacher_maps.empty())
    throw DimensionError("level count mismatch between teacher and student maps");
  if (teacher_logits.shape.rank() != 1)
    throw DimensionError("per-sample teacher logits must be rank 1");

  bool gate_open = true;
  if (flags.gating) {
    int best = 0;
    for (int j = 1; j < teacher_logits.shape[0]; ++j)
      if (teacher_logits(j) > teacher_logits(best)) best = j;
    gate_open = best == label;
  }
  if (!gate_open) return {nullptr, false, {}};

  SampleDctLoss out;
  out.gate_open = true;
  std::vector<TensorPtr> terms;
  terms.reserve(teacher_maps.size());
  for (size_t l = 0; l < teacher_maps.size(); ++l) {
    TensorPtr d = dct_stage_distance(tape, teacher_maps[l], student_maps[l], flags);
    out.per_level.push_back(d->item());
    terms.push_back(std::move(d));
  }
  out.value = add_n(tape, terms);
  return out;
}

namespace {

// || q_t/||q_t|| - q_s/||q_s|| ||_2 on vectorized maps, fused so the student
// gradient goes through its own normalization.
TensorPtr at_level_distance(Tape& tape, const TensorPtr& t, const TensorPtr& s) {
  const int64_t n = t->numel();
  double tn = 0.0, sn = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    tn += t->values[static_cast<size_t>(i)] * t->values[static_cast<size_t>(i)];
    sn += s->values[static_cast<size_t>(i)] * s->values[static_cast<size_t>(i)];
  }
  tn = std::sqrt(tn);
  sn = std::sqrt(sn);
  auto unit = [n](const TensorPtr& x, double norm) {
    std::vector<double> u(static_cast<size_t>(n), 0.0);
    if (norm > 0.0)
      for (int64_t i = 0; i < n; ++i) u[static_cast<size_t>(i)] = x->values[static_cast<size_t>(i)] / norm;
    return u;
  };
  const std::vector<double> ut = unit(t, tn);
  const std::vector<double> us = unit(s, sn);
  double ss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = ut[static_cast<size_t>(i)] - us[static_cast<size_t>(i)];
    ss += d * d;
  }
  const double dist = std::sqrt(ss);
  auto out = make_scalar(dist);

  if (tape.recording() && s->requires_grad && dist > 0.0 && sn > 0.0) {
    out->requires_grad = true;
    tape.push(out, [s, out, ut, us, dist, sn, n] {
      if (out->grad.empty()) return;
      s->ensure_grad();
      // e = (us - ut)/dist; ds = g * (e - us (us . e)) / ||s||
      double dot = 0.0;
      for (int64_t i = 0; i < n; ++i)
        dot += us[static_cast<size_t>(i)] * (us[static_cast<size_t>(i)] - ut[static_cast<size_t>(i)]);
      const double g = out->grad[0] / (dist * sn);
      for (int64_t i = 0; i < n; ++i) {
        const size_t k = static_cast<size_t>(i);
        s->grad[k] += g * ((us[k] - ut[k]) - us[k] * dot);
      }
    });
  }
  return out;
}

}  // namespace

TensorPtr at_loss(Tape& tape, const std::vector<ActivationMap>& teacher_maps,
                  const std::vector<ActivationMap>& student_maps) {
  if (teacher_maps.size() != student_maps.size() || teacher_maps.empty())
    throw DimensionError("level count mismatch between teacher and student maps");
  std::vector<TensorPtr> terms;
  terms.reserve(teacher_maps.size());
  for (size_t l = 0; l < teacher_maps.size(); ++l) {
    check_map_pair(teacher_maps[l], student_maps[l], false);
    terms.push_back(at_level_distance(tape, teacher_maps[l].values, student_maps[l].values));
  }
  return add_n(tape, terms);
}

TensorPtr hinton_kd(Tape& tape, const TensorPtr& teacher_logits,
                    const TensorPtr& student_logits, double temperature) {
  if (temperature <= 0.0) throw InputError("KD temperature must be > 0");
  if (teacher_logits->shape.rank() != 2 || !(teacher_logits->shape == student_logits->shape))
    throw DimensionError("hinton_kd expects matching [B,K] logits");
  const int bsz = teacher_logits->shape[0], k = teacher_logits->shape[1];

  const Tensor pt = softmax_rows(*teacher_logits, temperature);
  const Tensor ps = softmax_rows(*student_logits, temperature);
  double total = 0.0;
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < k; ++j) {
      const double p = pt(i, j);
      total += p * (std::log(p) - std::log(ps(i, j)));
    }
  const double t2 = temperature * temperature;
  auto out = make_scalar(t2 * total / bsz);
  check_finite(*out, "hinton_kd");

  if (tape.recording() && student_logits->requires_grad) {
    out->requires_grad = true;
    auto pt_v = std::make_shared<Tensor>(pt);
    auto ps_v = std::make_shared<Tensor>(ps);
    tape.push(out, [student_logits, out, pt_v, ps_v, bsz, k, temperature] {
      if (out->grad.empty()) return;
      student_logits->ensure_grad();
      const double g = out->grad[0] * temperature / bsz;
      for (int i = 0; i < bsz; ++i)
        for (int j = 0; j < k; ++j)
          student_logits->grad[static_cast<size_t>(i) * k + j] +=
              g * ((*ps_v)(i, j) - (*pt_v)(i, j));
    });
  }
  return out;
}

CombinedLoss combined_loss(Tape& tape, const TensorPtr& dct_term, const TensorPtr& ce_term,
                           const TensorPtr& kd_term, double gate_open_fraction,
                           std::vector<double> per_level_distances,
                           const LossWeights& weights) {
  std::vector<TensorPtr> terms;
  if (dct_term && weights.alpha != 0.0) terms.push_back(scale(tape, dct_term, weights.alpha));
  if (ce_term && weights.beta != 0.0) terms.push_back(scale(tape, ce_term, weights.beta));
  if (kd_term && weights.delta != 0.0) terms.push_back(scale(tape, kd_term, weights.delta));

  CombinedLoss out;
  out.total = terms.empty() ? make_scalar(0.0) : add_n(tape, terms);
  out.report.per_level_distances = std::move(per_level_distances);
  out.report.l_dct = dct_term ? dct_term->item() : 0.0;
  out.report.l_ce = ce_term ? ce_term->item() : 0.0;
  out.report.l_kd = kd_term ? kd_term->item() : 0.0;
  out.report.total = out.total->item();
  out.report.gate_open_fraction = gate_open_fraction;
  return out;
}

}  // namespace dctkd
