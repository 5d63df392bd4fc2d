#include "dctkd/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "gemm.hpp"
#include "minmax.hpp"

namespace dctkd {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

const Tensor& dct_basis(int n) {
  static std::mutex mu;
  static std::map<int, Tensor> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Tensor d(Shape{n, n});
  const double pi = std::acos(-1.0);
  for (int u = 0; u < n; ++u) {
    const double alpha = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int x = 0; x < n; ++x)
      d(u, x) = alpha * std::cos(pi * (2 * x + 1) * u / (2.0 * n));
  }
  return cache.emplace(n, std::move(d)).first->second;
}

namespace {

// S = D_h * X * D_w^T for [h,w] data; transpose_basis applies D^T instead,
// which is the inverse direction for an orthonormal transform.
void transform2d(const double* x, int h, int w, bool transpose_basis, double* out,
                 bool accumulate) {
  const Tensor& dh = dct_basis(h);
  const Tensor& dw = dct_basis(w);
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  if (!transpose_basis) {
    gemm_nn(h, w, h, dh.values.data(), x, tmp.data(), false);
    gemm_nt(h, w, w, tmp.data(), dw.values.data(), out, accumulate);
  } else {
    gemm_tn(h, w, h, dh.values.data(), x, tmp.data(), false);
    gemm_nn(h, w, w, tmp.data(), dw.values.data(), out, accumulate);
  }
}

}  // namespace

DctSpectrum dct2(Tape& tape, const ActivationMap& map) {
  const auto& x = map.values;
  if (x->shape.rank() != 2)
    throw DimensionError("dct2 expects an [H,W] map, got " + x->shape.str());
  const int h = map.h, w = map.w;

  auto out = make_tensor(x->shape);
  transform2d(x->values.data(), h, w, false, out->values.data(), false);
  check_finite(*out, "dct2");

  if (tape.recording() && x->requires_grad) {
    out->requires_grad = true;
    tape.push(out, [x, out, h, w] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      transform2d(out->grad.data(), h, w, true, x->grad.data(), true);
    });
  }
  return {out, h, w, false, false};
}

ActivationMap idct2(Tape& tape, const DctSpectrum& spec) {
  if (spec.dc_removed || spec.normalized)
    throw ContractError("idct2 requires an untransformed spectrum (no DC removal or "
                        "normalization)");
  const auto& s = spec.coeffs;
  const int h = spec.h, w = spec.w;

  auto out = make_tensor(s->shape);
  transform2d(s->values.data(), h, w, true, out->values.data(), false);
  check_finite(*out, "idct2");

  if (tape.recording() && s->requires_grad) {
    out->requires_grad = true;
    tape.push(out, [s, out, h, w] {
      if (out->grad.empty()) return;
      s->ensure_grad();
      transform2d(out->grad.data(), h, w, false, s->grad.data(), true);
    });
  }
  return {out, h, w, false, 0, MapRole::student};
}

DctSpectrum remove_dc(Tape& tape, const DctSpectrum& spec) {
  if (spec.dc_removed) throw ContractError("DC coefficient already removed");
  const auto& s = spec.coeffs;

  auto out = make_tensor(s->shape, s->values);
  out->values[0] = 0.0;

  if (tape.recording() && s->requires_grad) {
    out->requires_grad = true;
    tape.push(out, [s, out] {
      if (out->grad.empty()) return;
      s->ensure_grad();
      for (size_t i = 1; i < out->grad.size(); ++i) s->grad[i] += out->grad[i];
    });
  }
  return {out, spec.h, spec.w, true, spec.normalized};
}

DctSpectrum normalize_coeffs(Tape& tape, const DctSpectrum& spec) {
  if (!spec.dc_removed)
    throw ContractError("normalize_coeffs requires the DC coefficient removed first");
  const auto& x = spec.coeffs;
  const int64_t n = x->numel();

  auto out = make_tensor(x->shape);
  if (n > 1) {
    const auto info = detail::scan_minmax(x->values.data(), n, 1);
    const double r = info.max - info.min;
    if (r != 0.0) {
      for (int64_t i = 1; i < n; ++i)
        out->values[static_cast<size_t>(i)] =
            (x->values[static_cast<size_t>(i)] - info.min) / r;
      if (tape.recording() && x->requires_grad) {
        out->requires_grad = true;
        tape.push(out, [x, out, n, info] {
          if (out->grad.empty()) return;
          x->ensure_grad();
          detail::minmax_norm_backward(x->values.data(), out->grad.data(), x->grad.data(),
                                       n, 1, info);
        });
      }
    }
    // r == 0: all non-DC coefficients equal -> all zeros, zero gradient
  }
  return {out, spec.h, spec.w, true, true};
}

}  // namespace dctkd
