#pragma once

#include <string>

#include "json.hpp"

#include "dctkd/data.hpp"
#include "dctkd/losses.hpp"
#include "dctkd/model.hpp"
#include "dctkd/trainer.hpp"

// JSON bindings for the config types. from_json merges present keys over the
// object's current values, so partial config files act as overrides.

namespace dctkd {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"stage_channels", c.stage_channels}, {"blocks_per_stage", c.blocks_per_stage},
       {"input_channels", c.input_channels}, {"input_h", c.input_h},
       {"input_w", c.input_w},               {"class_count", c.class_count},
       {"gangways", c.gangways},             {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.stage_channels = j.value("stage_channels", c.stage_channels);
  c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
  c.input_channels = j.value("input_channels", c.input_channels);
  c.input_h = j.value("input_h", c.input_h);
  c.input_w = j.value("input_w", c.input_w);
  c.class_count = j.value("class_count", c.class_count);
  c.gangways = j.value("gangways", c.gangways);
  c.seed = j.value("seed", c.seed);
}

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = {{"class_count", s.class_count},
       {"concepts_per_image", s.concepts_per_image},
       {"concept_pool", s.concept_pool},
       {"image_h", s.image_h},
       {"image_w", s.image_w},
       {"channels", s.channels},
       {"train_count", s.train_count},
       {"val_count", s.val_count},
       {"background_noise", s.background_noise},
       {"concept_jitter", s.concept_jitter},
       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
  s.class_count = j.value("class_count", s.class_count);
  s.concepts_per_image = j.value("concepts_per_image", s.concepts_per_image);
  s.concept_pool = j.value("concept_pool", s.concept_pool);
  s.image_h = j.value("image_h", s.image_h);
  s.image_w = j.value("image_w", s.image_w);
  s.channels = j.value("channels", s.channels);
  s.train_count = j.value("train_count", s.train_count);
  s.val_count = j.value("val_count", s.val_count);
  s.background_noise = j.value("background_noise", s.background_noise);
  s.concept_jitter = j.value("concept_jitter", s.concept_jitter);
  s.seed = j.value("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"alpha", w.alpha}, {"beta", w.beta}, {"delta", w.delta},
       {"temperature", w.temperature}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
  w.alpha = j.value("alpha", w.alpha);
  w.beta = j.value("beta", w.beta);
  w.delta = j.value("delta", w.delta);
  w.temperature = j.value("temperature", w.temperature);
}

inline void to_json(nlohmann::json& j, const AblationFlags& f) {
  j = {{"use_dct", f.use_dct},
       {"dc_removal", f.dc_removal},
       {"coeff_norm", f.coeff_norm},
       {"gating", f.gating},
       {"hinton", f.hinton}};
}

inline void from_json(const nlohmann::json& j, AblationFlags& f) {
  f.use_dct = j.value("use_dct", f.use_dct);
  f.dc_removal = j.value("dc_removal", f.dc_removal);
  f.coeff_norm = j.value("coeff_norm", f.coeff_norm);
  f.gating = j.value("gating", f.gating);
  f.hinton = j.value("hinton", f.hinton);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"lr_decay_every", c.lr_decay_every},
       {"lr_decay_factor", c.lr_decay_factor},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"weights", c.weights},
       {"flags", c.flags}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
  c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("weights")) from_json(j.at("weights"), c.weights);
  if (j.contains("flags")) from_json(j.at("flags"), c.flags);
}

}  // namespace dctkd
