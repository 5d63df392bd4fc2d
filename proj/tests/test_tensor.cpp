#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dctkd/rng.hpp"
#include "dctkd/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace dctkd;
using testsupport::finite_diff_check;

namespace {

TensorPtr random_param(Shape shape, std::mt19937_64& rng, double spread = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape.numel()));
  for (auto& x : v) x = spread * (uniform01(rng) * 2.0 - 1.0);
  return make_param(std::move(shape), std::move(v));
}

TensorPtr fresh_param(Shape shape) {
  auto t = make_tensor(std::move(shape));
  t->requires_grad = true;
  return t;
}

// sum of all entries of a rank-2 tensor via ones^T * M * ones; [1,1] output
// is scalar as far as backward is concerned
TensorPtr sum2d(Tape& tape, const TensorPtr& m) {
  auto left = make_tensor(Shape{1, m->shape[0]}, std::vector<double>(
                                                     static_cast<size_t>(m->shape[0]), 1.0));
  auto right = make_tensor(Shape{m->shape[1], 1}, std::vector<double>(
                                                      static_cast<size_t>(m->shape[1]), 1.0));
  return matmul(tape, matmul(tape, left, m), right);
}

}  // namespace

TEST_CASE("shape basics") {
  Shape s{2, 3, 4};
  CHECK(s.numel() == 24);
  CHECK(s.rank() == 3);
  CHECK(Shape{}.numel() == 1);
  CHECK_THROWS_AS(Shape{0}, DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("matmul identity and hand value") {
  Tape tape;
  auto eye = make_tensor(Shape{3, 3});
  for (int i = 0; i < 3; ++i) (*eye)(i, i) = 1.0;
  auto a = make_tensor(Shape{3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto out = matmul(tape, eye, a);
  for (int i = 0; i < 9; ++i) CHECK(out->values[i] == doctest::Approx(a->values[i]));

  auto row = make_tensor(Shape{1, 2}, {1, 2});
  auto col = make_tensor(Shape{2, 1}, {3, 4});
  CHECK(matmul(tape, row, col)->values[0] == doctest::Approx(11.0));

  auto bad = make_tensor(Shape{2, 3});
  CHECK_THROWS_AS(matmul(tape, a, bad), DimensionError);
}

TEST_CASE("matmul gradients vs central differences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_param(Shape{4, 5}, rng);
    auto b = random_param(Shape{5, 2}, rng);
    auto r = finite_diff_check({a, b}, [&](Tape& t) { return sum2d(t, matmul(t, a, b)); });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("conv2d identity kernel and constant bias") {
  Tape tape;
  std::mt19937_64 rng(1);
  auto x = random_param(Shape{1, 4, 4}, rng);
  auto w = make_tensor(Shape{1, 1, 1, 1}, {1.0});
  auto b = make_tensor(Shape{1}, {0.0});
  auto out = conv2d(tape, x, w, b, 1, 0);
  for (size_t i = 0; i < x->values.size(); ++i)
    CHECK(out->values[i] == doctest::Approx(x->values[i]));

  auto w0 = make_tensor(Shape{2, 1, 3, 3});
  auto bc = make_tensor(Shape{2}, {0.5, -1.5});
  auto out2 = conv2d(tape, x, w0, bc, 1, 1);
  CHECK(out2->shape == Shape{2, 4, 4});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 16; ++i)
      CHECK((*out2)(c, i / 4, i % 4) == doctest::Approx(bc->values[static_cast<size_t>(c)]));
}

TEST_CASE("conv2d rejects bad geometry") {
  Tape tape;
  auto x = make_tensor(Shape{1, 6, 6});
  auto w_even = make_tensor(Shape{1, 1, 2, 2});
  auto b = make_tensor(Shape{1});
  CHECK_THROWS_AS(conv2d(tape, x, w_even, b, 1, 0), DimensionError);
  auto w = make_tensor(Shape{1, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(tape, x, w, b, 2, 0), DimensionError);  // (6-3)%2 != 0
  auto x_badc = make_tensor(Shape{2, 6, 6});
  CHECK_THROWS_AS(conv2d(tape, x_badc, w, b, 1, 0), DimensionError);
}

TEST_CASE("conv2d gradients vs central differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_param(Shape{2, 5, 5}, rng);
    auto w = random_param(Shape{3, 2, 3, 3}, rng);
    auto b = random_param(Shape{3}, rng);
    const int stride = trial % 2 == 0 ? 1 : 2;
    const int pad = 1;
    auto target = make_tensor(Shape{3, stride == 1 ? 5 : 3, stride == 1 ? 5 : 3});
    auto r = finite_diff_check({x, w, b}, [&](Tape& t) {
      return l2_distance(t, conv2d(t, x, w, b, stride, pad), target);
    });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("conv2d batched matches per-sample") {
  std::mt19937_64 rng(3);
  auto w = random_param(Shape{3, 2, 3, 3}, rng);
  auto b = random_param(Shape{3}, rng);
  auto batch = random_param(Shape{4, 2, 6, 6}, rng);
  Tape tape;
  auto out = conv2d(tape, batch, w, b, 1, 1);
  CHECK(out->shape == Shape{4, 3, 6, 6});
  for (int s = 0; s < 4; ++s) {
    auto single = make_tensor(Shape{2, 6, 6});
    std::copy(batch->values.begin() + s * 72, batch->values.begin() + (s + 1) * 72,
              single->values.begin());
    auto ref = conv2d(tape, single, w, b, 1, 1);
    for (int i = 0; i < 3 * 36; ++i)
      CHECK(out->values[static_cast<size_t>(s * 108 + i)] ==
            doctest::Approx(ref->values[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("relu values and gradient") {
  Tape tape;
  auto x = make_tensor(Shape{3}, {-1.0, 0.0, 2.0});
  auto out = relu(tape, x);
  CHECK(out->values == std::vector<double>{0.0, 0.0, 2.0});

  auto pos = make_tensor(Shape{3}, {1.0, 2.0, 3.0});
  CHECK(relu(tape, pos)->values == pos->values);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    // keep inputs away from the kink
    auto a = fresh_param(Shape{4, 3});
    for (auto& v : a->values) {
      v = uniform01(rng) * 2.0 - 1.0;
      if (std::abs(v) < 5e-2) v += v >= 0 ? 5e-2 : -5e-2;
    }
    auto target = make_tensor(Shape{4, 3});
    auto r = finite_diff_check(
        {a}, [&](Tape& t) { return l2_distance(t, relu(t, a), target); });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("maxpool2d values, errors, gradient") {
  Tape tape;
  auto flat = make_tensor(Shape{1, 2, 2}, {3.0, 3.0, 3.0, 3.0});
  CHECK(maxpool2d(tape, flat, 2, 2)->values[0] == doctest::Approx(3.0));

  auto x = make_tensor(Shape{1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(maxpool2d(tape, x, 2, 2)->values[0] == doctest::Approx(4.0));

  auto tiny = make_tensor(Shape{1, 2, 2});
  CHECK_THROWS_AS(maxpool2d(tape, tiny, 3, 1), DimensionError);

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    // tie-free random input: distinct values by construction
    auto a = fresh_param(Shape{2, 4, 4});
    for (size_t i = 0; i < 32; ++i)
      a->values[i] = static_cast<double>(i) * 0.1 + 0.01 * uniform01(rng);
    shuffle_indices(a->values, rng);
    auto target = make_tensor(Shape{2, 2, 2});
    auto r = finite_diff_check(
        {a}, [&](Tape& t) { return l2_distance(t, maxpool2d(t, a, 2, 2), target); });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("maxpool2d ties route to first row-major element") {
  Tape tape;
  auto x = make_param(Shape{1, 2, 2}, {7.0, 7.0, 7.0, 7.0});
  auto out = maxpool2d(tape, x, 2, 2);
  tape.backward(out);
  CHECK(x->grad == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("global_avg_pool values and gradient") {
  Tape tape;
  auto c = make_tensor(Shape{2, 3, 3}, std::vector<double>(18, 2.5));
  auto out = global_avg_pool(tape, c);
  CHECK(out->shape == Shape{2});
  CHECK(out->values[0] == doctest::Approx(2.5));

  auto x = make_tensor(Shape{1, 2, 2}, {1.0, 3.0, 5.0, 7.0});
  CHECK(global_avg_pool(tape, x)->values[0] == doctest::Approx(4.0));

  auto p = make_param(Shape{1, 2, 2}, {1.0, 3.0, 5.0, 7.0});
  Tape t2;
  auto pooled = global_avg_pool(t2, p);
  t2.backward(pooled);
  for (double g : p->grad) CHECK(g == doctest::Approx(0.25));  // 1/(H*W)
}

TEST_CASE("softmax_cross_entropy values") {
  Tape tape;
  const int k = 7;
  auto uniform = make_tensor(Shape{2, k}, std::vector<double>(2 * k, 0.3));
  auto loss = softmax_cross_entropy(tape, uniform, {0, 3});
  CHECK(loss->item() == doctest::Approx(std::log(static_cast<double>(k))));

  auto sharp = make_tensor(Shape{1, 3}, {50.0, 0.0, 0.0});
  CHECK(softmax_cross_entropy(tape, sharp, {0})->item() == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS_AS(softmax_cross_entropy(tape, sharp, {3}), InputError);
  CHECK_THROWS_AS(softmax_cross_entropy(tape, sharp, {-1}), InputError);
}

TEST_CASE("softmax_cross_entropy gradient vs central differences") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto logits = random_param(Shape{4, 6}, rng, 2.0);
    std::vector<int> labels{0, 2, 5, 1};
    auto r = finite_diff_check(
        {logits}, [&](Tape& t) { return softmax_cross_entropy(t, logits, labels); });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("backward contract") {
  // loss = sum x^2 via x * x^T
  auto x = make_param(Shape{1, 2}, {1.0, 2.0});
  Tape tape;
  auto xt = make_param(Shape{2, 1}, {1.0, 2.0});  // same values, separate leaf
  auto loss = matmul(tape, x, xt);
  tape.backward(loss);
  CHECK(x->grad == std::vector<double>{1.0, 2.0});  // d/dx (x . y) = y
  CHECK_THROWS_AS(tape.backward(loss), ContractError);

  Tape t2;
  auto y = make_param(Shape{2, 2}, {1, 2, 3, 4});
  auto big = add(t2, y, y);
  CHECK_THROWS_AS(t2.backward(big), ContractError);  // non-scalar

  // loss = sum x^2 with x feeding both operands: grad accumulates to 2x
  auto z = make_param(Shape{1, 1}, {3.0});
  Tape t3;
  auto zz = matmul(t3, z, z);
  t3.backward(zz);
  CHECK(z->grad == std::vector<double>{6.0});
}

TEST_CASE("loss independent of leaf leaves grad empty") {
  auto x = make_param(Shape{2}, {1.0, 2.0});
  Tape tape;
  auto a = make_param(Shape{1, 1}, {3.0});
  auto b = make_tensor(Shape{1, 1}, {2.0});
  auto loss = matmul(tape, a, b);
  tape.backward(loss);
  CHECK(x->grad.empty());  // never touched
  CHECK(a->grad == std::vector<double>{2.0});
}

TEST_CASE("elementwise ops and select") {
  Tape tape;
  auto a = make_tensor(Shape{2, 2}, {1, 2, 3, 4});
  auto b = make_tensor(Shape{2, 2}, {10, 20, 30, 40});
  CHECK(add(tape, a, b)->values == std::vector<double>{11, 22, 33, 44});
  CHECK(scale(tape, a, -2.0)->values == std::vector<double>{-2, -4, -6, -8});
  CHECK(add_n(tape, {a, a, a})->values == std::vector<double>{3, 6, 9, 12});

  auto m = make_tensor(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  auto v = make_tensor(Shape{3}, {10, 20, 30});
  CHECK(add_rowvec(tape, m, v)->values == std::vector<double>{11, 22, 33, 14, 25, 36});

  auto x = make_tensor(Shape{3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(select(tape, x, 1)->values == std::vector<double>{3, 4});
  CHECK_THROWS_AS(select(tape, x, 3), DimensionError);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_param(Shape{3, 4}, rng);
    auto q = random_param(Shape{4}, rng);
    auto target = make_tensor(Shape{4});
    auto r = finite_diff_check({p, q}, [&](Tape& t) {
      auto rows = add_rowvec(t, p, q);
      return l2_distance(t, select(t, rows, 1), target);
    });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("l2_distance basics and gradient") {
  Tape tape;
  auto a = make_tensor(Shape{3}, {1, 2, 3});
  CHECK(l2_distance(tape, a, a)->item() == doctest::Approx(0.0));
  auto b = make_tensor(Shape{3}, {1, 2, 7});
  CHECK(l2_distance(tape, a, b)->item() == doctest::Approx(4.0));
  CHECK_THROWS_AS(l2_distance(tape, a, make_tensor(Shape{4})), DimensionError);

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_param(Shape{5}, rng);
    auto q = random_param(Shape{5}, rng);
    auto r = finite_diff_check({p, q}, [&](Tape& t) { return l2_distance(t, p, q); });
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("determinism: identical seeds give bit-identical outputs and gradients") {
  auto run = [] {
    std::mt19937_64 rng(99);
    auto x = fresh_param(Shape{3, 2, 8, 8});
    for (auto& v : x->values) v = uniform01(rng) - 0.5;
    auto w = fresh_param(Shape{4, 2, 3, 3});
    for (auto& v : w->values) v = uniform01(rng) - 0.5;
    auto b = make_param(Shape{4}, std::vector<double>(4, 0.1));
    Tape tape;
    auto y = maxpool2d(tape, relu(tape, conv2d(tape, x, w, b, 1, 1)), 2, 2);
    auto target = make_tensor(y->shape);
    auto loss = l2_distance(tape, y, target);
    tape.backward(loss);
    return std::tuple{y->values, w->grad, x->grad, loss->item()};
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(std::get<0>(r1) == std::get<0>(r2));
  CHECK(std::get<1>(r1) == std::get<1>(r2));
  CHECK(std::get<2>(r1) == std::get<2>(r2));
  CHECK(std::get<3>(r1) == std::get<3>(r2));
}

TEST_CASE("non-finite outputs are rejected") {
  Tape tape;
  auto x = make_tensor(Shape{1, 2, 2},
                       {1.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0});
  auto w = make_tensor(Shape{1, 1, 1, 1}, {1.0});
  auto b = make_tensor(Shape{1});
  CHECK_THROWS_AS(conv2d(tape, x, w, b, 1, 0), NumericError);
}
