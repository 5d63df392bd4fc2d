#include "dctkd/attention.hpp"

#include "minmax.hpp"

namespace dctkd {

ActivationMap aggregate(Tape& tape, const TensorPtr& features, int level, MapRole role) {
  if (features->shape.rank() != 3)
    throw DimensionError("aggregate expects [C,H,W] features, got " + features->shape.str());
  const int c = features->shape[0], h = features->shape[1], w = features->shape[2];
  const int64_t plane = static_cast<int64_t>(h) * w;

  auto out = make_tensor(Shape{h, w});
  for (int ch = 0; ch < c; ++ch) {
    const double* fp = features->values.data() + ch * plane;
    for (int64_t i = 0; i < plane; ++i) out->values[static_cast<size_t>(i)] += fp[i] * fp[i];
  }
  const double inv_c = 1.0 / c;
  for (auto& v : out->values) v *= inv_c;
  check_finite(*out, "aggregate");

  if (tape.recording() && features->requires_grad) {
    out->requires_grad = true;
    tape.push(out, [features, out, c, plane, inv_c] {
      if (out->grad.empty()) return;
      features->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const double* fp = features->values.data() + ch * plane;
        double* dfp = features->grad.data() + ch * plane;
        for (int64_t i = 0; i < plane; ++i)
          dfp[i] += 2.0 * inv_c * fp[i] * out->grad[static_cast<size_t>(i)];
      }
    });
  }
  return {out, h, w, false, level, role};
}

ActivationMap minmax_normalize(Tape& tape, const ActivationMap& map) {
  if (map.normalized) throw ContractError("activation map already normalized");
  const auto& x = map.values;
  const int64_t n = x->numel();

  const auto info = detail::scan_minmax(x->values.data(), n, 0);
  auto out = make_tensor(x->shape);
  const double r = info.max - info.min;
  const bool degenerate = r == 0.0;  // flat map carries no signal -> zeros
  if (!degenerate) {
    for (int64_t i = 0; i < n; ++i)
      out->values[static_cast<size_t>(i)] = (x->values[static_cast<size_t>(i)] - info.min) / r;
  }

  if (tape.recording() && x->requires_grad && !degenerate) {
    out->requires_grad = true;
    tape.push(out, [x, out, n, info] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      detail::minmax_norm_backward(x->values.data(), out->grad.data(), x->grad.data(), n, 0,
                                   info);
    });
  }
  return {out, map.h, map.w, true, map.source_level, map.source_role};
}

}  // namespace dctkd
