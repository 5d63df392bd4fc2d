#include "dctkd/metrics.hpp"

#include <cmath>

namespace dctkd {

double topk(const Tensor& logits, const std::vector<int>& labels, int k) {
  if (logits.shape.rank() != 2) throw DimensionError("topk expects [B,K] logits");
  const int bsz = logits.shape[0], classes = logits.shape[1];
  if (static_cast<int>(labels.size()) != bsz)
    throw DimensionError("label count does not match batch size");
  if (k < 1 || k > classes) throw InputError("k must lie in [1, K]");

  int hits = 0;
  for (int i = 0; i < bsz; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= classes) throw InputError("label out of range");
    const double lv = logits(i, label);
    int rank = 0;
    for (int j = 0; j < classes; ++j) {
      if (logits(i, j) > lv || (logits(i, j) == lv && j < label)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * hits / bsz;
}

double mca(const std::vector<std::vector<int64_t>>& confusion) {
  if (confusion.empty()) throw InputError("empty confusion matrix");
  double sum = 0.0;
  for (size_t c = 0; c < confusion.size(); ++c) {
    int64_t row = 0;
    for (int64_t v : confusion[c]) row += v;
    if (row == 0)
      throw InputError("class " + std::to_string(c) + " has no validation samples");
    sum += static_cast<double>(confusion[c][c]) / static_cast<double>(row);
  }
  return 100.0 * sum / static_cast<double>(confusion.size());
}

namespace {

constexpr double kC1 = 0.01 * 0.01;  // dynamic range 1
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kWindow * kWindow);
    const int half = kWindow / 2;
    double sum = 0.0;
    for (int y = 0; y < kWindow; ++y)
      for (int x = 0; x < kWindow; ++x) {
        const double dy = y - half, dx = x - half;
        w[static_cast<size_t>(y * kWindow + x)] =
            std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        sum += w[static_cast<size_t>(y * kWindow + x)];
      }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return win;
}

double ssim_window(const double* a, const double* b, int stride, int wh, int ww,
                   const double* weights) {
  double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
  for (int y = 0; y < wh; ++y)
    for (int x = 0; x < ww; ++x) {
      const double w = weights ? weights[y * ww + x] : 1.0 / (wh * ww);
      const double va = a[y * stride + x], vb = b[y * stride + x];
      mu_a += w * va;
      mu_b += w * vb;
      aa += w * va * va;
      bb += w * vb * vb;
      ab += w * va * vb;
    }
  const double var_a = aa - mu_a * mu_a;
  const double var_b = bb - mu_b * mu_b;
  const double cov = ab - mu_a * mu_b;
  return ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
}

}  // namespace

double ssim(const ActivationMap& a, const ActivationMap& b) {
  if (a.h != b.h || a.w != b.w)
    throw DimensionError("ssim shape mismatch: " + a.values->shape.str() + " vs " +
                         b.values->shape.str());
  const double* pa = a.values->values.data();
  const double* pb = b.values->values.data();
  if (a.h < kWindow || a.w < kWindow)
    return ssim_window(pa, pb, a.w, a.h, a.w, nullptr);

  const auto& win = gaussian_window();
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y + kWindow <= a.h; ++y)
    for (int x = 0; x + kWindow <= a.w; ++x) {
      sum += ssim_window(pa + y * a.w + x, pb + y * b.w + x, a.w, kWindow, kWindow,
                         win.data());
      ++count;
    }
  return sum / count;
}

EvalResult evaluate(const Model& model, const std::vector<SceneSample>& samples,
                    int batch_size) {
  const int k = model.config.class_count;
  EvalResult result;
  result.confusion.assign(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));

  BatchIterator it(samples, batch_size, 0, false);
  int top1_hits = 0, top5_hits = 0;
  const int kk = std::min(5, k);
  for (const auto& idx : it.epoch_indices()) {
    Batch batch = it.assemble(idx);
    Tape tape;
    tape.set_recording(false);
    auto fwd = forward_with_gangways(tape, model, make_tensor(batch.images.shape,
                                                              batch.images.values));
    const Tensor& logits = *fwd.logits;
    for (size_t i = 0; i < idx.size(); ++i) {
      const int row = static_cast<int>(i);
      const int pred = argmax_row(logits, row);
      const int label = batch.labels[i];
      result.confusion[static_cast<size_t>(label)][static_cast<size_t>(pred)]++;
      const double lv = logits(row, label);
      int rank = 0;
      for (int j = 0; j < k; ++j)
        if (logits(row, j) > lv || (logits(row, j) == lv && j < label)) ++rank;
      if (rank < 1) ++top1_hits;
      if (rank < kk) ++top5_hits;
    }
  }
  const double n = static_cast<double>(samples.size());
  result.top1 = 100.0 * top1_hits / n;
  result.top5 = 100.0 * top5_hits / n;
  result.mca = mca(result.confusion);
  return result;
}

SimilarityTable similarity_table(const Model& teacher, const Model& student,
                                 const std::vector<SceneSample>& samples, int batch_size,
                                 const std::string& split) {
  if (!(teacher.gangway_spec() == student.gangway_spec()))
    throw ConfigError("teacher and student gangway specs disagree");
  const int levels = teacher.config.gangways;

  SimilarityTable table;
  table.split = split;
  table.per_level.assign(static_cast<size_t>(levels), 0.0);

  BatchIterator it(samples, batch_size, 0, false);
  int64_t count = 0;
  for (const auto& idx : it.epoch_indices()) {
    Batch batch = it.assemble(idx);
    auto images = make_tensor(batch.images.shape, batch.images.values);
    Tape tape;
    tape.set_recording(false);
    auto t_fwd = forward_with_gangways(tape, teacher, images);
    auto s_fwd = forward_with_gangways(tape, student, images);
    for (size_t i = 0; i < idx.size(); ++i) {
      for (int l = 0; l < levels; ++l) {
        auto t_map = minmax_normalize(
            tape, aggregate(tape, select(tape, t_fwd.gangways[static_cast<size_t>(l)],
                                         static_cast<int>(i)),
                            l + 1, MapRole::teacher));
        auto s_map = minmax_normalize(
            tape, aggregate(tape, select(tape, s_fwd.gangways[static_cast<size_t>(l)],
                                         static_cast<int>(i)),
                            l + 1, MapRole::student));
        table.per_level[static_cast<size_t>(l)] += ssim(t_map, s_map);
      }
      ++count;
    }
  }
  double total = 0.0;
  for (auto& v : table.per_level) {
    v /= static_cast<double>(count);
    total += v;
  }
  table.average = total / levels;
  return table;
}

}  // namespace dctkd
