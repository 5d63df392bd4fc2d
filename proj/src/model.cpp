#include "dctkd/model.hpp"

#include <cmath>

#include "dctkd/config_json.hpp"
#include "dctkd/data.hpp"
#include "dctkd/rng.hpp"

namespace dctkd {

void validate(const ModelConfig& config) {
  if (config.stage_channels.empty())
    throw ConfigError("model needs at least one stage");
  for (int c : config.stage_channels)
    if (c < 1) throw ConfigError("stage channel counts must be >= 1");
  if (config.blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
  if (config.input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (config.class_count < 2) throw ConfigError("class_count must be >= 2");
  const int stages = static_cast<int>(config.stage_channels.size());
  if (config.gangways < 1 || config.gangways > stages - 1)
    throw ConfigError("gangway count must lie in [1, stages-1]");
  const int pool_div = 1 << (stages - 1);
  if (config.input_h % pool_div != 0 || config.input_w % pool_div != 0)
    throw ConfigError("input size must be divisible by 2^(stages-1)");
  const int gangway_div = 1 << config.gangways;
  if (config.input_h % gangway_div != 0 || config.input_w % gangway_div != 0)
    throw ConfigError("input size must be divisible by 2^gangways");
}

ModelConfig default_teacher_config() {
  ModelConfig c;
  c.stage_channels = {32, 64, 128, 256};
  c.blocks_per_stage = 2;
  c.seed = 11;
  return c;
}

ModelConfig default_student_config() {
  ModelConfig c;
  c.stage_channels = {8, 16, 32, 64};
  c.blocks_per_stage = 1;
  c.seed = 21;
  return c;
}

GangwaySpec Model::gangway_spec() const {
  GangwaySpec spec;
  for (int l = 1; l <= config.gangways; ++l)
    spec.levels.push_back({l, config.input_h >> l, config.input_w >> l});
  return spec;
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params) n += p->numel();
  return n;
}

void Model::set_requires_grad(bool on) {
  for (auto& [name, p] : params) p->requires_grad = on;
}

void Model::zero_grad() {
  for (auto& [name, p] : params) p->zero_grad();
}

const TensorPtr& Model::param(const std::string& name) const {
  for (const auto& [n, p] : params)
    if (n == name) return p;
  throw ContractError("no parameter named " + name);
}

Model build(const ModelConfig& config, Role role) {
  validate(config);
  Model model;
  model.config = config;
  model.role = role;

  std::mt19937_64 rng(config.seed);
  auto he_tensor = [&rng](Shape shape, int fan_in) {
    std::vector<double> v(static_cast<size_t>(shape.numel()));
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (auto& x : v) x = std_dev * normal01(rng);
    return make_param(std::move(shape), std::move(v));
  };

  const int stages = static_cast<int>(config.stage_channels.size());
  int in_ch = config.input_channels;
  for (int s = 0; s < stages; ++s) {
    const int out_ch = config.stage_channels[static_cast<size_t>(s)];
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      const std::string prefix =
          "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".conv";
      model.params.emplace_back(prefix + ".weight",
                                he_tensor(Shape{out_ch, in_ch, 3, 3}, in_ch * 9));
      model.params.emplace_back(prefix + ".bias",
                                make_param(Shape{out_ch}, std::vector<double>(
                                                              static_cast<size_t>(out_ch), 0.0)));
      in_ch = out_ch;
    }
  }
  model.params.emplace_back("head.weight",
                            he_tensor(Shape{in_ch, config.class_count}, in_ch));
  model.params.emplace_back(
      "head.bias", make_param(Shape{config.class_count},
                              std::vector<double>(static_cast<size_t>(config.class_count), 0.0)));
  return model;
}

ForwardResult forward_with_gangways(Tape& tape, const Model& model, const TensorPtr& batch) {
  const auto& cfg = model.config;
  if (batch->shape.rank() != 4)
    throw DimensionError("forward expects a [B,C,H,W] batch, got " + batch->shape.str());
  if (batch->shape[1] != cfg.input_channels || batch->shape[2] != cfg.input_h ||
      batch->shape[3] != cfg.input_w)
    throw DimensionError("batch shape " + batch->shape.str() + " does not match model input");

  ForwardResult result;
  const int stages = static_cast<int>(cfg.stage_channels.size());
  TensorPtr x = batch;
  size_t pi = 0;
  for (int s = 0; s < stages; ++s) {
    if (s > 0) x = maxpool2d(tape, x, 2, 2);
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const auto& w = model.params[pi++].second;
      const auto& bias = model.params[pi++].second;
      x = relu(tape, conv2d(tape, x, w, bias, 1, 1));
    }
    if (s >= 1 && s <= cfg.gangways) result.gangways.push_back(x);
  }
  TensorPtr feats = global_avg_pool(tape, x);  // [B,C]
  const auto& head_w = model.params[pi++].second;
  const auto& head_b = model.params[pi++].second;
  result.logits = add_rowvec(tape, matmul(tape, feats, head_w), head_b);
  return result;
}

int64_t trainable_param_count(const Model& model, Distiller) {
  // No supported distiller carries trainable state of its own.
  return model.param_count();
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.reserve(model.params.size());
  for (const auto& [name, p] : model.params) tensors.emplace_back(name, *p);
  nlohmann::json meta = {{"format", "dctkd-checkpoint"},
                         {"config", model.config},
                         {"role", model.role == Role::teacher ? "teacher" : "student"}};
  save_tensor_file(path, tensors, meta);
}

Model load_checkpoint(const std::string& path) {
  TensorFile file = load_tensor_file(path);
  if (file.meta.value("format", "") != "dctkd-checkpoint")
    throw FormatError(path + ": not a model checkpoint");
  ModelConfig config;
  from_json(file.meta.at("config"), config);
  const Role role = file.meta.value("role", "student") == "teacher" ? Role::teacher
                                                                    : Role::student;
  Model model = build(config, role);
  if (model.params.size() != file.tensors.size())
    throw FormatError(path + ": parameter count does not match config");
  for (size_t i = 0; i < model.params.size(); ++i) {
    auto& [name, p] = model.params[i];
    const auto& [fname, ft] = file.tensors[i];
    if (name != fname)
      throw FormatError(path + ": unexpected parameter " + fname + ", wanted " + name);
    if (!(ft.shape == p->shape))
      throw FormatError(path + ": shape mismatch for " + fname);
    p->values = ft.values;
  }
  return model;
}

}  // namespace dctkd
