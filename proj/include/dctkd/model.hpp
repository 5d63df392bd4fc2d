#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dctkd/tensor.hpp"

namespace dctkd {

enum class Role { teacher, student };

struct GangwayLevel {
  int index = 0;  // depth index l, 1-based
  int h = 0;
  int w = 0;
  bool operator==(const GangwayLevel&) const = default;
};

// Tap points where teacher and student expose features with identical
// spatial sizes; sizes halve with depth.
struct GangwaySpec {
  std::vector<GangwayLevel> levels;
  bool operator==(const GangwaySpec&) const = default;
  int count() const { return static_cast<int>(levels.size()); }
};

struct ModelConfig {
  std::vector<int> stage_channels{8, 16, 32, 64};
  int blocks_per_stage = 1;
  int input_channels = 3;
  int input_h = 32;
  int input_w = 32;
  int class_count = 10;
  int gangways = 3;  // L
  uint64_t seed = 0;
};

void validate(const ModelConfig& config);
ModelConfig default_teacher_config();
ModelConfig default_student_config();

// Plain CNN: stages of [conv3x3 + bias + ReLU] x blocks_per_stage with a 2x
// max-pool between stages, then global average pooling and a linear head.
// Gangway l taps the output of stage l+1 at resolution input/2^l.
struct Model {
  ModelConfig config;
  Role role = Role::student;
  std::vector<std::pair<std::string, TensorPtr>> params;  // fixed order

  GangwaySpec gangway_spec() const;
  int64_t param_count() const;
  void set_requires_grad(bool on);
  void zero_grad();
  const TensorPtr& param(const std::string& name) const;
};

// He-initialized from config.seed; deterministic.
Model build(const ModelConfig& config, Role role);

struct ForwardResult {
  TensorPtr logits;                 // [B,K]
  std::vector<TensorPtr> gangways;  // L tensors [B,C_l,H_l,W_l]
};
ForwardResult forward_with_gangways(Tape& tape, const Model& model, const TensorPtr& batch);

enum class Distiller { none, dct, at, kd, dct_kd };

// Count of everything the optimizer touches. None of the supported
// distillers introduces parameters, so this is the model's own count.
int64_t trainable_param_count(const Model& model, Distiller distiller);

// Checkpoint container: a TNSRBOX1 file carrying the model config and role in
// the JSON header plus the named parameter tensors.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace dctkd
