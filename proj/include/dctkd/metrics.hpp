#pragma once

#include <string>
#include <vector>

#include "dctkd/attention.hpp"
#include "dctkd/data.hpp"
#include "dctkd/model.hpp"
#include "dctkd/tensor.hpp"

namespace dctkd {

struct EvalResult {
  double top1 = 0.0;  // percent
  double top5 = 0.0;
  double mca = 0.0;
  std::vector<std::vector<int64_t>> confusion;  // [K][K], row = true class
};

// Fraction (in percent) of samples whose label is among the k highest logits;
// ties rank the lower class index first.
double topk(const Tensor& logits, const std::vector<int>& labels, int k);

// Mean over classes of diagonal / row sum, in percent.
double mca(const std::vector<std::vector<int64_t>>& confusion);

// Standard SSIM between [0,1]-normalized maps: Gaussian 11x11 sigma 1.5
// window, C1=0.01^2, C2=0.03^2. Maps smaller than the window fall back to a
// single uniform window covering the whole map.
double ssim(const ActivationMap& a, const ActivationMap& b);

struct SimilarityTable {
  std::vector<double> per_level;
  double average = 0.0;
  std::string split;
};

// Per level, mean over samples of ssim(teacher map, student map), both
// min-max normalized first.
SimilarityTable similarity_table(const Model& teacher, const Model& student,
                                 const std::vector<SceneSample>& samples,
                                 int batch_size = 32, const std::string& split = "val");

EvalResult evaluate(const Model& model, const std::vector<SceneSample>& samples,
                    int batch_size = 32);

}  // namespace dctkd
