#pragma once

// Central finite-difference oracle for gradient checks. Independent of the
// tape: it only re-evaluates the forward value at perturbed leaf values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dctkd/tensor.hpp"

namespace testsupport {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

// build must construct a fresh graph from the current leaf values and return
// the scalar loss. Analytic gradients come from one recorded backward pass;
// the oracle is (f(x+h) - f(x-h)) / 2h per coordinate.
inline GradCheckResult finite_diff_check(const std::vector<dctkd::TensorPtr>& leaves,
                                         const std::function<dctkd::TensorPtr(dctkd::Tape&)>& build,
                                         double step = 1e-4) {
  for (auto& l : leaves) l->grad.clear();
  dctkd::Tape tape;
  auto loss = build(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    l->ensure_grad();
    analytic.push_back(l->grad);
  }

  auto eval = [&]() {
    dctkd::Tape t;
    t.set_recording(false);
    return build(t)->item();
  };

  GradCheckResult result;
  for (size_t k = 0; k < leaves.size(); ++k) {
    auto& leaf = *leaves[k];
    for (size_t i = 0; i < leaf.values.size(); ++i) {
      const double orig = leaf.values[i];
      leaf.values[i] = orig + step;
      const double fp = eval();
      leaf.values[i] = orig - step;
      const double fm = eval();
      leaf.values[i] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double ag = analytic[k][i];
      const double abs_err = std::abs(fd - ag);
      const double denom = std::max({std::abs(fd), std::abs(ag), 1e-6});
      result.max_abs_err = std::max(result.max_abs_err, abs_err);
      result.max_rel_err = std::max(result.max_rel_err, abs_err / denom);
    }
  }
  for (auto& l : leaves) l->grad.clear();
  return result;
}

}  // namespace testsupport
