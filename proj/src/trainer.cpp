#include "dctkd/trainer.hpp"

#include <chrono>
#include <cmath>

namespace dctkd {

void validate(const TrainConfig& config) {
  if (config.lr <= 0.0) throw ConfigError("lr must be > 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0)
    throw ConfigError("momentum must lie in [0,1)");
  if (config.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
  if (config.lr_decay_factor <= 0.0) throw ConfigError("lr_decay_factor must be > 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.weights.temperature <= 0.0) throw ConfigError("KD temperature must be > 0");
  ablation_variant(config.flags);
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  return config.lr * std::pow(config.lr_decay_factor, epoch / config.lr_decay_every);
}

void sgd_step(std::vector<std::pair<std::string, TensorPtr>>& params, SgdState& state,
              double lr, double momentum, double weight_decay) {
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const auto& [name, p] : params)
      state.velocity.emplace_back(p->values.size(), 0.0);
  }
  if (state.velocity.size() != params.size())
    throw DimensionError("optimizer state does not match parameter list");
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].second;
    auto& v = state.velocity[i];
    if (v.size() != p.values.size())
      throw DimensionError("velocity shape does not match parameter " + params[i].first);
    p.ensure_grad();
    for (size_t j = 0; j < v.size(); ++j) {
      const double g = p.grad[j] + weight_decay * p.values[j];
      v[j] = momentum * v[j] + g;
      p.values[j] -= lr * v[j];
    }
  }
}

namespace {

// Per-sample outputs of the frozen teacher, computed once per run. The
// teacher has no stochastic layers, so recomputing per forward pass would be
// bit-identical; the memo just skips the repeated work.
struct TeacherCache {
  bool ready = false;
  std::vector<Tensor> logits;                         // [K] per sample
  std::vector<bool> correct;                          // argmax == label
  std::vector<std::vector<TensorPtr>> norm_maps;      // [sample][level], min-max maps
  std::vector<std::vector<TensorPtr>> raw_maps;       // [sample][level], raw maps
  double top1_fraction = 0.0;
};

TeacherCache build_teacher_cache(const Model& teacher,
                                 const std::vector<SceneSample>& samples, int batch_size,
                                 bool want_norm_maps, bool want_raw_maps) {
  TeacherCache cache;
  const size_t n = samples.size();
  cache.logits.resize(n);
  cache.correct.resize(n);
  if (want_norm_maps) cache.norm_maps.resize(n);
  if (want_raw_maps) cache.raw_maps.resize(n);

  const int levels = teacher.config.gangways;
  BatchIterator it(samples, batch_size, 0, false);
  int64_t hits = 0;
  for (const auto& idx : it.epoch_indices()) {
    Batch batch = it.assemble(idx);
    Tape tape;
    tape.set_recording(false);
    auto fwd = forward_with_gangways(tape, teacher,
                                     make_tensor(batch.images.shape, batch.images.values));
    const int k = teacher.config.class_count;
    for (size_t i = 0; i < idx.size(); ++i) {
      const size_t s = static_cast<size_t>(idx[i]);
      Tensor row(Shape{k});
      for (int j = 0; j < k; ++j) row(j) = (*fwd.logits)(static_cast<int>(i), j);
      cache.correct[s] = argmax_row(*fwd.logits, static_cast<int>(i)) == batch.labels[i];
      hits += cache.correct[s] ? 1 : 0;
      cache.logits[s] = std::move(row);
      for (int l = 0; l < levels && (want_norm_maps || want_raw_maps); ++l) {
        auto raw = aggregate(tape,
                             select(tape, fwd.gangways[static_cast<size_t>(l)],
                                    static_cast<int>(i)),
                             l + 1, MapRole::teacher);
        if (want_raw_maps) cache.raw_maps[s].push_back(raw.values);
        if (want_norm_maps)
          cache.norm_maps[s].push_back(minmax_normalize(tape, raw).values);
      }
    }
  }
  cache.top1_fraction = static_cast<double>(hits) / static_cast<double>(n);
  cache.ready = true;
  return cache;
}

struct EpochAccumulator {
  double l_dct = 0.0, l_ce = 0.0, l_kd = 0.0, total = 0.0;
  std::vector<double> per_level;
  int64_t per_level_samples = 0;
  int64_t gate_open = 0;
  int64_t samples = 0;
  int top1_hits = 0, top5_hits = 0;
  std::vector<std::vector<int64_t>> confusion;
};

TrainResult train_loop(const Model* teacher, Model student,
                       const std::vector<SceneSample>& train,
                       const std::vector<SceneSample>& val, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  validate(config);
  const bool uses_maps =
      config.distiller == Distiller::dct || config.distiller == Distiller::dct_kd ||
      config.distiller == Distiller::at;
  const bool uses_dct_maps =
      config.distiller == Distiller::dct || config.distiller == Distiller::dct_kd;
  const bool uses_kd =
      config.distiller == Distiller::kd || config.distiller == Distiller::dct_kd;
  const bool uses_teacher = config.distiller != Distiller::none;

  if (uses_teacher) {
    if (teacher == nullptr) throw ContractError("distillation requires a teacher");
    if (uses_maps && !(teacher->gangway_spec() == student.gangway_spec()))
      throw ConfigError("teacher and student gangway specs disagree");
    if (teacher->config.class_count != student.config.class_count)
      throw ConfigError("teacher and student class counts disagree");
    if (teacher->config.input_h != student.config.input_h ||
        teacher->config.input_w != student.config.input_w ||
        teacher->config.input_channels != student.config.input_channels)
      throw ConfigError("teacher and student input shapes disagree");
  }

  const int levels = student.config.gangways;
  const GangwaySpec gspec = student.gangway_spec();
  const bool want_dct_term = uses_dct_maps && config.weights.alpha != 0.0;
  const bool want_at_term =
      config.distiller == Distiller::at && config.weights.alpha != 0.0;

  TeacherCache cache;
  if (uses_teacher)
    cache = build_teacher_cache(*teacher, train, config.batch_size,
                                want_dct_term, want_at_term);

  SgdState sgd;
  BatchIterator it(train, config.batch_size, config.seed, true);
  TrainResult result;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(config, epoch);
    EpochAccumulator acc;
    acc.per_level.assign(static_cast<size_t>(levels), 0.0);
    acc.confusion.assign(static_cast<size_t>(student.config.class_count),
                         std::vector<int64_t>(static_cast<size_t>(student.config.class_count), 0));

    for (const auto& idx : it.epoch_indices()) {
      Batch batch = it.assemble(idx);
      const int bsz = static_cast<int>(idx.size());
      Tape tape;
      auto images = make_tensor(batch.images.shape, batch.images.values);
      auto fwd = forward_with_gangways(tape, student, images);

      TensorPtr ce = softmax_cross_entropy(tape, fwd.logits, batch.labels);

      TensorPtr dct_term;
      std::vector<double> batch_levels(static_cast<size_t>(levels), 0.0);
      int64_t batch_gated_in = 0;
      if (want_dct_term) {
        std::vector<TensorPtr> sample_terms;
        for (int i = 0; i < bsz; ++i) {
          const size_t s = static_cast<size_t>(idx[static_cast<size_t>(i)]);
          std::vector<ActivationMap> t_maps, s_maps;
          for (int l = 0; l < levels; ++l) {
            t_maps.push_back({cache.norm_maps[s][static_cast<size_t>(l)],
                              gspec.levels[static_cast<size_t>(l)].h,
                              gspec.levels[static_cast<size_t>(l)].w,
                              true, l + 1, MapRole::teacher});
            s_maps.push_back(minmax_normalize(
                tape, aggregate(tape,
                                select(tape, fwd.gangways[static_cast<size_t>(l)], i),
                                l + 1, MapRole::student)));
          }
          SampleDctLoss sl = l_dct(tape, t_maps, s_maps, cache.logits[s],
                                   batch.labels[static_cast<size_t>(i)], config.flags);
          if (sl.gate_open) {
            ++batch_gated_in;
            for (int l = 0; l < levels; ++l)
              batch_levels[static_cast<size_t>(l)] += sl.per_level[static_cast<size_t>(l)];
            sample_terms.push_back(sl.value);
          }
        }
        if (!sample_terms.empty())
          dct_term = scale(tape, add_n(tape, sample_terms), 1.0 / bsz);
      } else if (want_at_term) {
        std::vector<TensorPtr> sample_terms;
        for (int i = 0; i < bsz; ++i) {
          const size_t s = static_cast<size_t>(idx[static_cast<size_t>(i)]);
          std::vector<ActivationMap> t_maps, s_maps;
          for (int l = 0; l < levels; ++l) {
            t_maps.push_back({cache.raw_maps[s][static_cast<size_t>(l)],
                              gspec.levels[static_cast<size_t>(l)].h,
                              gspec.levels[static_cast<size_t>(l)].w,
                              false, l + 1, MapRole::teacher});
            s_maps.push_back(aggregate(
                tape, select(tape, fwd.gangways[static_cast<size_t>(l)], i), l + 1,
                MapRole::student));
          }
          sample_terms.push_back(at_loss(tape, t_maps, s_maps));
        }
        dct_term = scale(tape, add_n(tape, sample_terms), 1.0 / bsz);
      }

      // the reported gate fraction is teacher correctness on the batch; with
      // gating on it coincides with the fraction of open Eq. 5 gates
      double batch_gate_fraction = 0.0;
      if (uses_teacher) {
        int64_t open = 0;
        for (int i = 0; i < bsz; ++i)
          open += cache.correct[static_cast<size_t>(idx[static_cast<size_t>(i)])] ? 1 : 0;
        batch_gate_fraction = static_cast<double>(open) / bsz;
      }

      TensorPtr kd_term;
      if (uses_kd && config.weights.delta != 0.0) {
        auto t_logits = make_tensor(Shape{bsz, student.config.class_count});
        for (int i = 0; i < bsz; ++i) {
          const size_t s = static_cast<size_t>(idx[static_cast<size_t>(i)]);
          for (int j = 0; j < student.config.class_count; ++j)
            (*t_logits)(i, j) = cache.logits[s](j);
        }
        kd_term = hinton_kd(tape, t_logits, fwd.logits, config.weights.temperature);
      }

      CombinedLoss loss = combined_loss(tape, dct_term, ce, kd_term, batch_gate_fraction,
                                        batch_levels, config.weights);
      if (!std::isfinite(loss.report.total)) {
        ExperimentRecord diag;
        diag.epoch = epoch;
        diag.l_dct = loss.report.l_dct;
        diag.l_ce = loss.report.l_ce;
        diag.l_kd = loss.report.l_kd;
        diag.total = loss.report.total;
        if (on_epoch) on_epoch(diag);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      }

      tape.backward(loss.total);
      sgd_step(student.params, sgd, lr, config.momentum, config.weight_decay);
      student.zero_grad();

      // streaming train metrics from the pre-update logits
      const Tensor& logits = *fwd.logits;
      const int k = student.config.class_count;
      const int kk = std::min(5, k);
      for (int i = 0; i < bsz; ++i) {
        const int label = batch.labels[static_cast<size_t>(i)];
        const int pred = argmax_row(logits, i);
        acc.confusion[static_cast<size_t>(label)][static_cast<size_t>(pred)]++;
        const double lv = logits(i, label);
        int rank = 0;
        for (int j = 0; j < k; ++j)
          if (logits(i, j) > lv || (logits(i, j) == lv && j < label)) ++rank;
        if (rank < 1) ++acc.top1_hits;
        if (rank < kk) ++acc.top5_hits;
      }
      acc.l_dct += loss.report.l_dct * bsz;
      acc.l_ce += loss.report.l_ce * bsz;
      acc.l_kd += loss.report.l_kd * bsz;
      acc.total += loss.report.total * bsz;
      acc.gate_open += static_cast<int64_t>(std::llround(batch_gate_fraction * bsz));
      acc.samples += bsz;
      acc.per_level_samples += batch_gated_in;
      for (int l = 0; l < levels; ++l)
        acc.per_level[static_cast<size_t>(l)] += batch_levels[static_cast<size_t>(l)];
    }

    EvalResult val_result = evaluate(student, val, config.batch_size);

    ExperimentRecord rec;
    rec.epoch = epoch;
    const double n = static_cast<double>(acc.samples);
    rec.l_dct = acc.l_dct / n;
    rec.l_ce = acc.l_ce / n;
    rec.l_kd = acc.l_kd / n;
    rec.total = acc.total / n;
    rec.train_top1 = 100.0 * acc.top1_hits / n;
    rec.train_top5 = 100.0 * acc.top5_hits / n;
    // lenient mean over classes that actually appeared in the train stream
    {
      double sum = 0.0;
      int present = 0;
      for (size_t c = 0; c < acc.confusion.size(); ++c) {
        int64_t row = 0;
        for (int64_t v : acc.confusion[c]) row += v;
        if (row == 0) continue;
        sum += static_cast<double>(acc.confusion[c][c]) / static_cast<double>(row);
        ++present;
      }
      rec.train_mca = present > 0 ? 100.0 * sum / present : 0.0;
    }
    rec.val_top1 = val_result.top1;
    rec.val_top5 = val_result.top5;
    rec.val_mca = val_result.mca;
    rec.gate_open_fraction = uses_teacher ? static_cast<double>(acc.gate_open) / n : 0.0;
    rec.per_level_distances.assign(static_cast<size_t>(levels), 0.0);
    if (acc.per_level_samples > 0)
      for (int l = 0; l < levels; ++l)
        rec.per_level_distances[static_cast<size_t>(l)] =
            acc.per_level[static_cast<size_t>(l)] / static_cast<double>(acc.per_level_samples);
    rec.epoch_wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(rec);
    result.records.push_back(std::move(rec));
  }

  result.model = std::move(student);
  return result;
}

}  // namespace

TrainResult train_student(const Model& teacher, Model student,
                          const std::vector<SceneSample>& train,
                          const std::vector<SceneSample>& val, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  return train_loop(&teacher, std::move(student), train, val, config, on_epoch);
}

TrainResult train_vanilla(Model model, const std::vector<SceneSample>& train,
                          const std::vector<SceneSample>& val, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  TrainConfig vanilla = config;
  vanilla.distiller = Distiller::none;
  return train_loop(nullptr, std::move(model), train, val, vanilla, on_epoch);
}

}  // namespace dctkd
