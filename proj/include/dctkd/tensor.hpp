#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dctkd/errors.hpp"

namespace dctkd {

struct Shape {
  std::vector<int> dims;

  Shape() = default;
  Shape(std::initializer_list<int> d);
  explicit Shape(std::vector<int> d);

  int rank() const { return static_cast<int>(dims.size()); }
  int operator[](int i) const { return dims[static_cast<size_t>(i)]; }
  int64_t numel() const;
  bool operator==(const Shape& other) const = default;
  std::string str() const;
};

// Dense row-major double tensor. Doubles throughout so finite-difference
// checks have headroom. `grad` stays empty until a backward pass touches it.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> v);
  static Tensor scalar(double v);

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  double item() const;

  double& operator()(int i) { return values[static_cast<size_t>(i)]; }
  double operator()(int i) const { return values[static_cast<size_t>(i)]; }
  double& operator()(int i, int j);
  double operator()(int i, int j) const;
  double& operator()(int i, int j, int k);
  double operator()(int i, int j, int k) const;
  double& operator()(int b, int c, int i, int j);
  double operator()(int b, int c, int i, int j) const;

  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape s, double fill = 0.0);
TensorPtr make_tensor(Shape s, std::vector<double> v);
TensorPtr make_param(Shape s, std::vector<double> v);
TensorPtr make_scalar(double v);

// Copy of the values with grad tracking severed.
TensorPtr detach(const TensorPtr& t);

// Reverse-mode tape. Ops append steps in execution order; backward() replays
// them in reverse, visiting each recorded node exactly once. A tape is
// single-owner: one training step records and consumes one tape.
class Tape {
 public:
  // Recording off turns the tape into a pure evaluation context: ops compute
  // values but register nothing, so nothing downstream requires grad.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  void push(TensorPtr out, std::function<void()> pull);
  void backward(const TensorPtr& loss);
  size_t size() const { return steps_.size(); }

 private:
  struct Step {
    TensorPtr out;
    std::function<void()> pull;
  };
  std::vector<Step> steps_;
  bool recording_ = true;
  bool consumed_ = false;
};

// --- differentiable operations ---------------------------------------------

// [M,K] x [K,N] -> [M,N]
TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// Cross-correlation plus bias. x: [C,H,W] or [B,C,H,W]; w: [Co,Ci,k,k];
// b: [Co]. k must be odd and the output extent integral.
TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w,
                 const TensorPtr& b, int stride, int pad);

TensorPtr relu(Tape& tape, const TensorPtr& x);

// Windowed maxima over [C,H,W] or [B,C,H,W]; gradient routes to the first
// (row-major) maximal element per window.
TensorPtr maxpool2d(Tape& tape, const TensorPtr& x, int k, int stride);

// Per-channel mean: [C,H,W] -> [C] or [B,C,H,W] -> [B,C].
TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x);

// Mean over the batch of -log softmax(logits)[label], max-stabilized.
TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits,
                                const std::vector<int>& labels);

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// [B,K] + [K] broadcast over rows.
TensorPtr add_rowvec(Tape& tape, const TensorPtr& m, const TensorPtr& v);

TensorPtr scale(Tape& tape, const TensorPtr& x, double c);

// Elementwise sum of one or more same-shape tensors.
TensorPtr add_n(Tape& tape, const std::vector<TensorPtr>& xs);

// Slice along dim 0: x[index]. Gradient scatters back into the slice.
TensorPtr select(Tape& tape, const TensorPtr& x, int index);

// sqrt(sum((a-b)^2)) as a scalar; subgradient 0 at a == b.
TensorPtr l2_distance(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// --- plain helpers ----------------------------------------------------------

Tensor softmax_rows(const Tensor& logits, double temperature = 1.0);
int argmax_row(const Tensor& logits, int row);  // first maximal index
void check_finite(const Tensor& t, const char* where);

}  // namespace dctkd
