#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dctkd/dct.hpp"
#include "dctkd/rng.hpp"
#include "support/gradcheck.hpp"

using namespace dctkd;
using testsupport::finite_diff_check;

namespace {

// Direct O(N^4) orthonormal DCT-II summation, independent of the separable
// matrix-product implementation.
Tensor oracle_dct2(const Tensor& x) {
  const int h = x.shape[0], w = x.shape[1];
  const double pi = std::acos(-1.0);
  Tensor out(x.shape);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
      const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
      double s = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          s += x(i, j) * std::cos(pi * (2 * i + 1) * u / (2.0 * h)) *
               std::cos(pi * (2 * j + 1) * v / (2.0 * w));
      out(u, v) = au * av * s;
    }
  }
  return out;
}

ActivationMap as_map(const TensorPtr& t) {
  return {t, t->shape[0], t->shape[1], true, 1, MapRole::student};
}

TensorPtr random_map(int h, int w, std::mt19937_64& rng, bool grad = false) {
  auto t = make_tensor(Shape{h, w});
  for (auto& v : t->values) v = uniform01(rng);
  t->requires_grad = grad;
  return t;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("dct2 matches the direct summation oracle") {
  std::mt19937_64 rng(5);
  Tape tape;
  for (int h : {2, 3, 4, 7, 8}) {
    for (int w : {2, 5, 7}) {
      auto x = random_map(h, w, rng);
      auto spec = dct2(tape, as_map(x));
      const Tensor expected = oracle_dct2(*x);
      for (int64_t i = 0; i < x->numel(); ++i)
        CHECK(spec.coeffs->values[static_cast<size_t>(i)] ==
              doctest::Approx(expected.values[static_cast<size_t>(i)]).epsilon(1e-10));
      CHECK_FALSE(spec.dc_removed);
      CHECK_FALSE(spec.normalized);
    }
  }
}

TEST_CASE("dct2 constant map concentrates in the DC coefficient") {
  Tape tape;
  const int h = 5, w = 3;
  const double c = 1.7;
  auto x = make_tensor(Shape{h, w}, std::vector<double>(h * w, c));
  auto spec = dct2(tape, as_map(x));
  CHECK(spec.coeffs->values[0] == doctest::Approx(c * std::sqrt(static_cast<double>(h * w))));
  for (size_t i = 1; i < spec.coeffs->values.size(); ++i)
    CHECK(spec.coeffs->values[i] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dct2 2x2 impulse gives four 0.5 coefficients") {
  Tape tape;
  auto x = make_tensor(Shape{2, 2}, {1.0, 0.0, 0.0, 0.0});
  auto spec = dct2(tape, as_map(x));
  for (double v : spec.coeffs->values) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("Parseval: map and coefficient energies agree") {
  std::mt19937_64 rng(11);
  Tape tape;
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_map(6, 9, rng);
    auto spec = dct2(tape, as_map(x));
    CHECK(l2_norm(x->values) == doctest::Approx(l2_norm(spec.coeffs->values)).epsilon(1e-10));
  }
}

TEST_CASE("linearity of dct2") {
  std::mt19937_64 rng(13);
  Tape tape;
  auto x = random_map(7, 4, rng);
  auto y = random_map(7, 4, rng);
  const double a = 2.25, b = -0.75;
  auto combo = make_tensor(Shape{7, 4});
  for (size_t i = 0; i < combo->values.size(); ++i)
    combo->values[i] = a * x->values[i] + b * y->values[i];
  auto sc = dct2(tape, as_map(combo));
  auto sx = dct2(tape, as_map(x));
  auto sy = dct2(tape, as_map(y));
  for (size_t i = 0; i < sc.coeffs->values.size(); ++i)
    CHECK(sc.coeffs->values[i] ==
          doctest::Approx(a * sx.coeffs->values[i] + b * sy.coeffs->values[i]).epsilon(1e-10));
}

TEST_CASE("idct2 round trip across the required sizes") {
  std::mt19937_64 rng(17);
  Tape tape;
  for (int n : {2, 4, 7, 14, 28, 56}) {
    auto x = random_map(n, n, rng);
    auto back = idct2(tape, dct2(tape, as_map(x)));
    double max_err = 0.0;
    for (size_t i = 0; i < x->values.size(); ++i)
      max_err = std::max(max_err, std::abs(back.values->values[i] - x->values[i]));
    CHECK(max_err < 1e-6);
  }
}

TEST_CASE("idct2 frozen example and flag contract") {
  Tape tape;
  DctSpectrum zero{make_tensor(Shape{3, 3}), 3, 3, false, false};
  auto back = idct2(tape, zero);
  for (double v : back.values->values) CHECK(v == doctest::Approx(0.0));

  DctSpectrum all_half{make_tensor(Shape{2, 2}, std::vector<double>(4, 0.5)), 2, 2, false,
                       false};
  auto imp = idct2(tape, all_half);
  CHECK(imp.values->values[0] == doctest::Approx(1.0));
  for (size_t i = 1; i < 4; ++i)
    CHECK(imp.values->values[i] == doctest::Approx(0.0).epsilon(1e-12));

  DctSpectrum removed{make_tensor(Shape{2, 2}), 2, 2, true, false};
  CHECK_THROWS_AS(idct2(tape, removed), ContractError);
  DctSpectrum normed{make_tensor(Shape{2, 2}), 2, 2, true, true};
  CHECK_THROWS_AS(idct2(tape, normed), ContractError);
}

TEST_CASE("remove_dc zeroes only the DC slot") {
  Tape tape;
  std::mt19937_64 rng(19);
  auto x = random_map(4, 4, rng);
  x->values[0] = 5.0;
  DctSpectrum spec{x, 4, 4, false, false};
  auto removed = remove_dc(tape, spec);
  CHECK(removed.coeffs->values[0] == 0.0);
  CHECK(removed.dc_removed);
  for (size_t i = 1; i < x->values.size(); ++i)
    CHECK(removed.coeffs->values[i] == x->values[i]);
  CHECK_THROWS_AS(remove_dc(tape, removed), ContractError);
}

TEST_CASE("remove_dc on a constant map's spectrum leaves nothing") {
  Tape tape;
  auto x = make_tensor(Shape{4, 6}, std::vector<double>(24, 0.8));
  auto spec = remove_dc(tape, dct2(tape, as_map(x)));
  for (double v : spec.coeffs->values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("remove_dc drops energy by exactly DC^2") {
  std::mt19937_64 rng(23);
  Tape tape;
  auto x = random_map(5, 5, rng);
  auto spec = dct2(tape, as_map(x));
  const double before = l2_norm(spec.coeffs->values);
  const double dc = spec.coeffs->values[0];
  auto removed = remove_dc(tape, spec);
  const double after = l2_norm(removed.coeffs->values);
  CHECK(before * before - after * after == doctest::Approx(dc * dc).epsilon(1e-10));
}

TEST_CASE("normalize_coeffs maps the non-DC range onto [0,1]") {
  Tape tape;
  DctSpectrum spec{make_tensor(Shape{2, 2}, {9.0, -2.0, 0.0, 2.0}), 2, 2, true, false};
  auto norm = normalize_coeffs(tape, spec);
  CHECK(norm.coeffs->values == std::vector<double>{0.0, 0.0, 0.5, 1.0});
  CHECK(norm.normalized);

  // degenerate: all non-DC equal -> all zero
  DctSpectrum flat{make_tensor(Shape{2, 2}, {3.0, 1.5, 1.5, 1.5}), 2, 2, true, false};
  CHECK(normalize_coeffs(tape, flat).coeffs->values == std::vector<double>{0, 0, 0, 0});

  CHECK_THROWS_AS(normalize_coeffs(tape, DctSpectrum{make_tensor(Shape{2, 2}), 2, 2,
                                                     false, false}),
                  ContractError);
}

TEST_CASE("normalize_coeffs attains both endpoints and is idempotent at [0,1]") {
  std::mt19937_64 rng(29);
  Tape tape;
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_map(4, 4, rng);
    auto spec = normalize_coeffs(tape, remove_dc(tape, dct2(tape, as_map(x))));
    double lo = 1e9, hi = -1e9;
    for (size_t i = 1; i < spec.coeffs->values.size(); ++i) {
      lo = std::min(lo, spec.coeffs->values[i]);
      hi = std::max(hi, spec.coeffs->values[i]);
    }
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(1.0));
    CHECK(spec.coeffs->values[0] == 0.0);

    auto again = normalize_coeffs(tape, spec);
    for (size_t i = 0; i < spec.coeffs->values.size(); ++i)
      CHECK(again.coeffs->values[i] == doctest::Approx(spec.coeffs->values[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradients flow correctly through the full coefficient pipeline") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_map(4, 5, rng, true);
    auto target = random_map(4, 5, rng);
    auto r = finite_diff_check({x}, [&](Tape& t) {
      auto spec = normalize_coeffs(t, remove_dc(t, dct2(t, as_map(x))));
      return l2_distance(t, spec.coeffs, target);
    });
    CHECK(r.max_rel_err < 1e-3);
  }
}

TEST_CASE("gradient through plain dct2 is the transposed transform") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_map(3, 6, rng, true);
    auto target = random_map(3, 6, rng);
    auto r = finite_diff_check({x}, [&](Tape& t) {
      return l2_distance(t, dct2(t, as_map(x)).coeffs, target);
    });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("gradient w.r.t. the DC input is zero after remove_dc") {
  std::mt19937_64 rng(41);
  auto x = random_map(4, 4, rng, true);
  Tape tape;
  DctSpectrum spec{x, 4, 4, false, false};
  auto removed = remove_dc(tape, spec);
  auto target = make_tensor(Shape{4, 4});
  auto loss = l2_distance(tape, removed.coeffs, target);
  tape.backward(loss);
  CHECK(x->grad[0] == 0.0);
}
