#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dctkd/tensor.hpp"

namespace dctkd {

// One synthetic scene: a noise background with textured concept patches
// placed across the image. The label is determined by the set of concepts
// present, never by where they sit.
struct SceneSample {
  struct Placement {
    int concept_id = 0;
    int y0 = 0, x0 = 0, h = 0, w = 0;
  };
  Tensor image;  // [C,H,W], values in [0,1]
  int label = 0;
  std::vector<Placement> concept_layout;
};

struct DatasetSpec {
  int class_count = 10;
  int concepts_per_image = 4;
  int concept_pool = 8;
  int image_h = 32;
  int image_w = 32;
  int channels = 3;
  int train_count = 2000;
  int val_count = 500;
  double background_noise = 0.5;   // uniform background amplitude
  double concept_jitter = 0.15;    // per-placement brightness jitter
  uint64_t seed = 7;
};

void validate(const DatasetSpec& spec);

struct SceneDataset {
  std::vector<SceneSample> train;
  std::vector<SceneSample> val;
  std::vector<std::vector<int>> class_concepts;  // sorted concept ids per class
  std::vector<Tensor> prototypes;                // rendered [C,ph,pw] per concept
};

// Deterministic from spec.seed. Classes share individual concepts (the first
// class_count size-m combinations of the pool in lexicographic order), so
// only co-occurrence disambiguates them.
SceneDataset generate_scene_dataset(const DatasetSpec& spec);

// --- IDX ---------------------------------------------------------------------

// Loads an IDX file of unsigned bytes, scaled to [0,1].
Tensor load_idx(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
void save_idx(const std::string& path, const Tensor& data);
void save_idx_labels(const std::string& path, const std::vector<int>& labels);

// --- TNSRBOX1 container --------------------------------------------------------

// Layout: 8-byte magic "TNSRBOX1", u32 little-endian header length, UTF-8
// JSON header (meta + per-tensor name/shape/dtype/offset), then contiguous
// little-endian float64 payloads.
void save_tensor_file(const std::string& path,
                      const std::vector<std::pair<std::string, Tensor>>& tensors,
                      const nlohmann::json& meta = nlohmann::json::object());

struct TensorFile {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json meta;
};
TensorFile load_tensor_file(const std::string& path);

// --- batching ------------------------------------------------------------------

struct Batch {
  Tensor images;            // [B,C,H,W]
  std::vector<int> labels;
  std::vector<int> indices;  // positions in the sample vector
};

// Deterministic shuffled epochs; the final partial batch is included.
class BatchIterator {
 public:
  BatchIterator(const std::vector<SceneSample>& samples, int batch_size, uint64_t seed,
                bool shuffle);
  std::vector<std::vector<int>> epoch_indices();  // advances the shuffle stream
  Batch assemble(const std::vector<int>& indices) const;

 private:
  const std::vector<SceneSample>* samples_;
  int batch_size_;
  bool shuffle_;
  std::mt19937_64 rng_;
};

}  // namespace dctkd
