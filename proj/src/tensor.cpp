#include "dctkd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "gemm.hpp"
#include "parallel.hpp"

namespace dctkd {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

// --- Shape / Tensor ---------------------------------------------------------

namespace {
void validate_dims(const std::vector<int>& dims) {
  for (int d : dims) {
    if (d < 1) throw DimensionError("shape extent must be >= 1, got " + std::to_string(d));
  }
}
}  // namespace

Shape::Shape(std::initializer_list<int> d) : dims(d) { validate_dims(dims); }
Shape::Shape(std::vector<int> d) : dims(std::move(d)) { validate_dims(dims); }

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s, double fill)
    : shape(std::move(s)), values(static_cast<size_t>(shape.numel()), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (static_cast<int64_t>(values.size()) != shape.numel())
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape.str());
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a scalar, got " + shape.str());
  return values[0];
}

double& Tensor::operator()(int i, int j) {
  return values[static_cast<size_t>(i) * shape[1] + j];
}
double Tensor::operator()(int i, int j) const {
  return values[static_cast<size_t>(i) * shape[1] + j];
}
double& Tensor::operator()(int i, int j, int k) {
  return values[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
}
double Tensor::operator()(int i, int j, int k) const {
  return values[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
}
double& Tensor::operator()(int b, int c, int i, int j) {
  return values[((static_cast<size_t>(b) * shape[1] + c) * shape[2] + i) * shape[3] + j];
}
double Tensor::operator()(int b, int c, int i, int j) const {
  return values[((static_cast<size_t>(b) * shape[1] + c) * shape[2] + i) * shape[3] + j];
}

void Tensor::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

TensorPtr make_tensor(Shape s, double fill) {
  return std::make_shared<Tensor>(std::move(s), fill);
}
TensorPtr make_tensor(Shape s, std::vector<double> v) {
  return std::make_shared<Tensor>(std::move(s), std::move(v));
}
TensorPtr make_param(Shape s, std::vector<double> v) {
  auto t = make_tensor(std::move(s), std::move(v));
  t->requires_grad = true;
  return t;
}
TensorPtr make_scalar(double v) { return std::make_shared<Tensor>(Tensor::scalar(v)); }

TensorPtr detach(const TensorPtr& t) {
  auto out = make_tensor(t->shape, t->values);
  out->requires_grad = false;
  return out;
}

void check_finite(const Tensor& t, const char* where) {
  if (!t.all_finite())
    throw NumericError(std::string(where) + " produced a non-finite value");
}

// --- Tape -------------------------------------------------------------------

void Tape::push(TensorPtr out, std::function<void()> pull) {
  steps_.push_back({std::move(out), std::move(pull)});
}

void Tape::backward(const TensorPtr& loss) {
  if (consumed_)
    throw ContractError("backward already ran on this tape; gradients would accumulate");
  if (loss->numel() != 1)
    throw ContractError("backward requires a scalar loss, got " + loss->shape.str());
  consumed_ = true;
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->pull();
}

// --- op helpers -------------------------------------------------------------

namespace {

bool track(const Tape& tape, std::initializer_list<const TensorPtr*> inputs) {
  if (!tape.recording()) return false;
  for (const TensorPtr* t : inputs)
    if (*t && (*t)->requires_grad) return true;
  return false;
}

// im2col with cols laid out [Ci*k*k, Ho*Wo].
void im2col(const double* x, int c_in, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* cols) {
  const int howo = ho * wo;
  for (int c = 0; c < c_in; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* dst = cols + (static_cast<int64_t>((c * k + ki) * k + kj)) * howo;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) {
            std::fill(dst + oi * wo, dst + (oi + 1) * wo, 0.0);
            continue;
          }
          const double* xrow = x + (static_cast<int64_t>(c) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            dst[oi * wo + oj] = (jj >= 0 && jj < w) ? xrow[jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int c_in, int h, int w, int k, int stride,
                int pad, int ho, int wo, double* dx) {
  const int howo = ho * wo;
  for (int c = 0; c < c_in; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* src = cols + (static_cast<int64_t>((c * k + ki) * k + kj)) * howo;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          double* xrow = dx + (static_cast<int64_t>(c) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < w) xrow[jj] += src[oi * wo + oj];
          }
        }
      }
    }
  }
}

}  // namespace

// --- matmul -----------------------------------------------------------------

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.rank() != 2 || b->shape.rank() != 2)
    throw DimensionError("matmul expects rank-2 tensors, got " + a->shape.str() + " and " +
                         b->shape.str());
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  if (b->shape[0] != k)
    throw DimensionError("matmul inner dimensions disagree: " + a->shape.str() + " vs " +
                         b->shape.str());
  auto out = make_tensor(Shape{m, n});
  gemm_nn(m, n, k, a->values.data(), b->values.data(), out->values.data(), false);
  check_finite(*out, "matmul");
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.push(out, [a, b, out, m, k, n] {
      if (out->grad.empty()) return;
      const double* g = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();
        gemm_nt(m, k, n, g, b->values.data(), a->grad.data(), true);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        gemm_tn(k, n, m, a->values.data(), g, b->grad.data(), true);
      }
    });
  }
  return out;
}

// --- conv2d -----------------------------------------------------------------

TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w,
                 const TensorPtr& b, int stride, int pad) {
  if (w->shape.rank() != 4)
    throw DimensionError("conv2d weight must be [Co,Ci,k,k], got " + w->shape.str());
  const int co = w->shape[0], ci = w->shape[1], k = w->shape[2];
  if (w->shape[3] != k) throw DimensionError("conv2d kernel must be square");
  if (k % 2 == 0) throw DimensionError("conv2d kernel size must be odd");
  if (b->shape.rank() != 1 || b->shape[0] != co)
    throw DimensionError("conv2d bias must be [Co]");
  const int rank = x->shape.rank();
  if (rank != 3 && rank != 4)
    throw DimensionError("conv2d input must be [C,H,W] or [B,C,H,W], got " + x->shape.str());
  const bool batched = rank == 4;
  const int bsz = batched ? x->shape[0] : 1;
  const int c_in = batched ? x->shape[1] : x->shape[0];
  const int h = batched ? x->shape[2] : x->shape[1];
  const int wdt = batched ? x->shape[3] : x->shape[2];
  if (c_in != ci)
    throw DimensionError("conv2d channel mismatch: input " + x->shape.str() + " vs weight " +
                         w->shape.str());
  if ((h + 2 * pad - k) % stride != 0 || (wdt + 2 * pad - k) % stride != 0)
    throw DimensionError("conv2d output size is not integral");
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wdt + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw DimensionError("conv2d output would be empty");

  const int ckk = ci * k * k;
  const int howo = ho * wo;
  auto out = batched ? make_tensor(Shape{bsz, co, ho, wo}) : make_tensor(Shape{co, ho, wo});

  const int64_t in_stride = static_cast<int64_t>(c_in) * h * wdt;
  const int64_t out_stride = static_cast<int64_t>(co) * howo;

  detail::parallel_chunks(bsz, [&](int, int lo, int hi) {
    std::vector<double> cols(static_cast<size_t>(ckk) * howo);
    for (int s = lo; s < hi; ++s) {
      const double* xs = x->values.data() + s * in_stride;
      double* ys = out->values.data() + s * out_stride;
      im2col(xs, c_in, h, wdt, k, stride, pad, ho, wo, cols.data());
      gemm_nn(co, howo, ckk, w->values.data(), cols.data(), ys, false);
      for (int oc = 0; oc < co; ++oc) {
        const double bias = b->values[static_cast<size_t>(oc)];
        double* row = ys + static_cast<int64_t>(oc) * howo;
        for (int i = 0; i < howo; ++i) row[i] += bias;
      }
    }
  });
  check_finite(*out, "conv2d");

  if (track(tape, {&x, &w, &b})) {
    out->requires_grad = true;
    tape.push(out, [x, w, b, out, stride, pad, bsz, c_in, h, wdt, k, co, ho, wo,
                    ckk, howo, in_stride, out_stride] {
      if (out->grad.empty()) return;
      const bool need_x = x->requires_grad;
      const bool need_w = w->requires_grad;
      const bool need_b = b->requires_grad;
      if (need_x) x->ensure_grad();

      const int chunks = detail::parallel_chunk_count(bsz);
      std::vector<std::vector<double>> dw_buf(static_cast<size_t>(chunks));
      std::vector<std::vector<double>> db_buf(static_cast<size_t>(chunks));
      detail::parallel_chunks(bsz, [&](int t, int lo, int hi) {
        std::vector<double> cols(static_cast<size_t>(ckk) * howo);
        std::vector<double> dcols;
        if (need_x) dcols.resize(static_cast<size_t>(ckk) * howo);
        auto& dw = dw_buf[static_cast<size_t>(t)];
        auto& db = db_buf[static_cast<size_t>(t)];
        if (need_w) dw.assign(w->values.size(), 0.0);
        if (need_b) db.assign(b->values.size(), 0.0);
        for (int s = lo; s < hi; ++s) {
          const double* gy = out->grad.data() + s * out_stride;
          if (need_w) {
            const double* xs = x->values.data() + s * in_stride;
            im2col(xs, c_in, h, wdt, k, stride, pad, ho, wo, cols.data());
            gemm_nt(co, ckk, howo, gy, cols.data(), dw.data(), true);
          }
          if (need_b) {
            for (int oc = 0; oc < co; ++oc) {
              const double* row = gy + static_cast<int64_t>(oc) * howo;
              double s0 = 0.0;
              for (int i = 0; i < howo; ++i) s0 += row[i];
              db[static_cast<size_t>(oc)] += s0;
            }
          }
          if (need_x) {
            gemm_tn(ckk, howo, co, w->values.data(), gy, dcols.data(), false);
            col2im_add(dcols.data(), c_in, h, wdt, k, stride, pad, ho, wo,
                       x->grad.data() + s * in_stride);
          }
        }
      });
      if (need_w) {
        w->ensure_grad();
        for (const auto& dw : dw_buf)
          if (!dw.empty())
            for (size_t i = 0; i < dw.size(); ++i) w->grad[i] += dw[i];
      }
      if (need_b) {
        b->ensure_grad();
        for (const auto& db : db_buf)
          if (!db.empty())
            for (size_t i = 0; i < db.size(); ++i) b->grad[i] += db[i];
      }
    });
  }
  return out;
}

// --- relu -------------------------------------------------------------------

TensorPtr relu(Tape& tape, const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->values.size(); ++i)
    out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.push(out, [x, out] {
      if (out->grad.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < x->values.size(); ++i)
        if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

// --- maxpool2d ---------------------------------------------------------------

TensorPtr maxpool2d(Tape& tape, const TensorPtr& x, int k, int stride) {
  const int rank = x->shape.rank();
  if (rank != 3 && rank != 4)
    throw DimensionError("maxpool2d input must be [C,H,W] or [B,C,H,W]");
  const int h = x->shape[rank - 2], w = x->shape[rank - 1];
  if (k > h || k > w) throw DimensionError("maxpool2d window larger than input");
  if (h % stride != 0 || w % stride != 0)
    throw DimensionError("maxpool2d requires H and W divisible by stride");
  const int ho = (h - k) / stride + 1;
  const int wo = (w - k) / stride + 1;
  const int planes = static_cast<int>(x->numel() / (static_cast<int64_t>(h) * w));

  std::vector<int> out_dims = x->shape.dims;
  out_dims[static_cast<size_t>(rank - 2)] = ho;
  out_dims[static_cast<size_t>(rank - 1)] = wo;
  auto out = make_tensor(Shape(out_dims));
  auto argmax = std::make_shared<std::vector<int32_t>>(out->values.size());

  for (int p = 0; p < planes; ++p) {
    const double* xp = x->values.data() + static_cast<int64_t>(p) * h * w;
    double* yp = out->values.data() + static_cast<int64_t>(p) * ho * wo;
    int32_t* ap = argmax->data() + static_cast<int64_t>(p) * ho * wo;
    for (int oi = 0; oi < ho; ++oi) {
      for (int oj = 0; oj < wo; ++oj) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int ki = 0; ki < k; ++ki) {
          const int ii = oi * stride + ki;
          for (int kj = 0; kj < k; ++kj) {
            const int jj = oj * stride + kj;
            const double v = xp[ii * w + jj];
            if (v > best) {  // strict: first row-major maximum wins
              best = v;
              best_idx = ii * w + jj;
            }
          }
        }
        yp[oi * wo + oj] = best;
        ap[oi * wo + oj] = best_idx;
      }
    }
  }

  if (track(tape, {&x})) {
    out->requires_grad = true;
    const int64_t in_plane = static_cast<int64_t>(h) * w;
    const int64_t out_plane = static_cast<int64_t>(ho) * wo;
    tape.push(out, [x, out, argmax, planes, in_plane, out_plane] {
      if (out->grad.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (int p = 0; p < planes; ++p) {
        const double* gp = out->grad.data() + p * out_plane;
        const int32_t* ap = argmax->data() + p * out_plane;
        double* dxp = x->grad.data() + p * in_plane;
        for (int64_t i = 0; i < out_plane; ++i) dxp[ap[i]] += gp[i];
      }
    });
  }
  return out;
}

// --- global_avg_pool ----------------------------------------------------------

TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x) {
  const int rank = x->shape.rank();
  if (rank != 3 && rank != 4)
    throw DimensionError("global_avg_pool input must be [C,H,W] or [B,C,H,W]");
  const int h = x->shape[rank - 2], w = x->shape[rank - 1];
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int planes = static_cast<int>(x->numel() / plane);

  std::vector<int> out_dims(x->shape.dims.begin(), x->shape.dims.end() - 2);
  auto out = make_tensor(Shape(out_dims));
  for (int p = 0; p < planes; ++p) {
    const double* xp = x->values.data() + p * plane;
    double s = 0.0;
    for (int64_t i = 0; i < plane; ++i) s += xp[i];
    out->values[static_cast<size_t>(p)] = s / static_cast<double>(plane);
  }

  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.push(out, [x, out, planes, plane] {
      if (out->grad.empty() || !x->requires_grad) return;
      x->ensure_grad();
      const double inv = 1.0 / static_cast<double>(plane);
      for (int p = 0; p < planes; ++p) {
        const double g = out->grad[static_cast<size_t>(p)] * inv;
        double* dxp = x->grad.data() + p * plane;
        for (int64_t i = 0; i < plane; ++i) dxp[i] += g;
      }
    });
  }
  return out;
}

// --- softmax_cross_entropy ----------------------------------------------------

TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits,
                                const std::vector<int>& labels) {
  if (logits->shape.rank() != 2)
    throw DimensionError("softmax_cross_entropy expects [B,K] logits");
  const int bsz = logits->shape[0], k = logits->shape[1];
  if (static_cast<int>(labels.size()) != bsz)
    throw DimensionError("label count does not match batch size");
  for (int lbl : labels)
    if (lbl < 0 || lbl >= k)
      throw InputError("label " + std::to_string(lbl) + " out of range [0," +
                       std::to_string(k) + ")");

  auto probs = std::make_shared<std::vector<double>>(logits->values.size());
  double total = 0.0;
  for (int i = 0; i < bsz; ++i) {
    const double* row = logits->values.data() + static_cast<int64_t>(i) * k;
    double* prow = probs->data() + static_cast<int64_t>(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - m);
      z += prow[j];
    }
    for (int j = 0; j < k; ++j) prow[j] /= z;
    total += -(row[labels[static_cast<size_t>(i)]] - m) + std::log(z);
  }
  auto out = make_scalar(total / bsz);
  check_finite(*out, "softmax_cross_entropy");

  if (track(tape, {&logits})) {
    out->requires_grad = true;
    auto labels_copy = labels;
    tape.push(out, [logits, out, probs, labels_copy, bsz, k] {
      if (out->grad.empty() || !logits->requires_grad) return;
      logits->ensure_grad();
      const double g = out->grad[0] / bsz;
      for (int i = 0; i < bsz; ++i) {
        const double* prow = probs->data() + static_cast<int64_t>(i) * k;
        double* drow = logits->grad.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) drow[j] += g * prow[j];
        drow[labels_copy[static_cast<size_t>(i)]] -= g;
      }
    });
  }
  return out;
}

// --- elementwise / structural ops ---------------------------------------------

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (!(a->shape == b->shape))
    throw DimensionError("add shape mismatch: " + a->shape.str() + " vs " + b->shape.str());
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = a->values[i] + b->values[i];
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.push(out, [a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr add_rowvec(Tape& tape, const TensorPtr& m, const TensorPtr& v) {
  if (m->shape.rank() != 2 || v->shape.rank() != 1 || m->shape[1] != v->shape[0])
    throw DimensionError("add_rowvec expects [B,K] + [K]");
  const int bsz = m->shape[0], k = m->shape[1];
  auto out = make_tensor(m->shape);
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < k; ++j)
      (*out)(i, j) = (*m)(i, j) + v->values[static_cast<size_t>(j)];
  if (track(tape, {&m, &v})) {
    out->requires_grad = true;
    tape.push(out, [m, v, out, bsz, k] {
      if (out->grad.empty()) return;
      if (m->requires_grad) {
        m->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) m->grad[i] += out->grad[i];
      }
      if (v->requires_grad) {
        v->ensure_grad();
        for (int i = 0; i < bsz; ++i)
          for (int j = 0; j < k; ++j)
            v->grad[static_cast<size_t>(j)] += out->grad[static_cast<size_t>(i) * k + j];
      }
    });
  }
  return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double c) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->values.size(); ++i) out->values[i] = c * x->values[i];
  check_finite(*out, "scale");
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.push(out, [x, out, c] {
      if (out->grad.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

TensorPtr add_n(Tape& tape, const std::vector<TensorPtr>& xs) {
  if (xs.empty()) throw ContractError("add_n requires at least one tensor");
  auto out = make_tensor(xs[0]->shape);
  bool any_grad = false;
  for (const auto& x : xs) {
    if (!(x->shape == xs[0]->shape)) throw DimensionError("add_n shape mismatch");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] += x->values[i];
    any_grad = any_grad || x->requires_grad;
  }
  if (tape.recording() && any_grad) {
    out->requires_grad = true;
    auto inputs = xs;
    tape.push(out, [inputs, out] {
      if (out->grad.empty()) return;
      for (const auto& x : inputs) {
        if (!x->requires_grad) continue;
        x->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr select(Tape& tape, const TensorPtr& x, int index) {
  if (x->shape.rank() < 1) throw DimensionError("select requires rank >= 1");
  const int n = x->shape[0];
  if (index < 0 || index >= n) throw DimensionError("select index out of range");
  std::vector<int> out_dims(x->shape.dims.begin() + 1, x->shape.dims.end());
  auto out = make_tensor(Shape(out_dims));
  const int64_t stride = out->numel();
  std::copy(x->values.begin() + index * stride, x->values.begin() + (index + 1) * stride,
            out->values.begin());
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.push(out, [x, out, index, stride] {
      if (out->grad.empty() || !x->requires_grad) return;
      x->ensure_grad();
      double* dst = x->grad.data() + index * stride;
      for (int64_t i = 0; i < stride; ++i) dst[i] += out->grad[static_cast<size_t>(i)];
    });
  }
  return out;
}

TensorPtr l2_distance(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (!(a->shape == b->shape))
    throw DimensionError("l2_distance shape mismatch: " + a->shape.str() + " vs " +
                         b->shape.str());
  double ss = 0.0;
  for (size_t i = 0; i < a->values.size(); ++i) {
    const double d = a->values[i] - b->values[i];
    ss += d * d;
  }
  const double dist = std::sqrt(ss);
  auto out = make_scalar(dist);
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.push(out, [a, b, out, dist] {
      if (out->grad.empty() || dist == 0.0) return;  // subgradient 0 at coincidence
      const double g = out->grad[0] / dist;
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      for (size_t i = 0; i < a->values.size(); ++i) {
        const double d = g * (a->values[i] - b->values[i]);
        if (a->requires_grad) a->grad[i] += d;
        if (b->requires_grad) b->grad[i] -= d;
      }
    });
  }
  return out;
}

// --- plain helpers ------------------------------------------------------------

Tensor softmax_rows(const Tensor& logits, double temperature) {
  if (logits.shape.rank() != 2) throw DimensionError("softmax_rows expects [B,K]");
  if (temperature <= 0.0) throw InputError("temperature must be > 0");
  const int bsz = logits.shape[0], k = logits.shape[1];
  Tensor out(logits.shape);
  for (int i = 0; i < bsz; ++i) {
    const double* row = logits.values.data() + static_cast<int64_t>(i) * k;
    double* orow = out.values.data() + static_cast<int64_t>(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
      orow[j] = std::exp((row[j] - m) / temperature);
      z += orow[j];
    }
    for (int j = 0; j < k; ++j) orow[j] /= z;
  }
  return out;
}

int argmax_row(const Tensor& logits, int row) {
  if (logits.shape.rank() != 2) throw DimensionError("argmax_row expects [B,K]");
  const int k = logits.shape[1];
  const double* r = logits.values.data() + static_cast<int64_t>(row) * k;
  int best = 0;
  for (int j = 1; j < k; ++j)
    if (r[j] > r[best]) best = j;
  return best;
}

}  // namespace dctkd
