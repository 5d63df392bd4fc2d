#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dctkd {

// Deterministic scalar draws built directly on the mt19937_64 stream. The
// standard <random> distributions are implementation-defined, so everything
// that must reproduce bit-identically across runs goes through these.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller, one fresh pair per draw.
inline double normal01(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  const double two_pi = 2.0 * std::acos(-1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Uniform int in [0, n), rejection sampled.
inline int uniform_int(std::mt19937_64& rng, int n) {
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

// Fisher-Yates with the deterministic draws above.
template <class T>
void shuffle_indices(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform_int(rng, static_cast<int>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace dctkd
