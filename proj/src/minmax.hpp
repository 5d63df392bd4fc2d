#pragma once

#include <cstdint>

namespace dctkd::detail {

// Min/max over x[begin..n) with first-occurrence tie breaking.
struct MinMaxInfo {
  int64_t argmin = 0;
  int64_t argmax = 0;
  double min = 0.0;
  double max = 0.0;
};

inline MinMaxInfo scan_minmax(const double* x, int64_t n, int64_t begin) {
  MinMaxInfo info{begin, begin, x[begin], x[begin]};
  for (int64_t i = begin + 1; i < n; ++i) {
    if (x[i] < info.min) {
      info.min = x[i];
      info.argmin = i;
    }
    if (x[i] > info.max) {
      info.max = x[i];
      info.argmax = i;
    }
  }
  return info;
}

// Backward of y_i = (x_i - min) / (max - min) over i in [begin, n), where min
// and max are themselves x[argmin], x[argmax]. The extremal elements receive
// the full subgradient of their slot.
inline void minmax_norm_backward(const double* x, const double* g, double* dx,
                                 int64_t n, int64_t begin, const MinMaxInfo& info) {
  const double r = info.max - info.min;
  const double inv = 1.0 / r;
  const double inv2 = inv * inv;
  double s_min = 0.0, s_max = 0.0;
  for (int64_t i = begin; i < n; ++i) {
    dx[i] += g[i] * inv;
    s_min += g[i] * (x[i] - info.max) * inv2;
    s_max += g[i] * (x[i] - info.min) * inv2;
  }
  dx[info.argmin] += s_min;
  dx[info.argmax] -= s_max;
}

}  // namespace dctkd::detail
