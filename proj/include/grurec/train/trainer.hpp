#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "grurec/data/augment.hpp"
#include "grurec/data/normalize.hpp"
#include "grurec/data/protocol.hpp"
#include "grurec/model/model.hpp"
#include "grurec/nn/loss.hpp"
#include "grurec/train/adam.hpp"
#include "grurec/train/metrics.hpp"

namespace grurec {

enum class Precision { f32, f64 };

struct TrainConfig {
  AdamConfig adam;
  Index batch_size = 128;
  Index max_epochs = 500;
  Index patience = 50;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  AugmentSpec augmentation;
  double val_fraction = 0.1;  // stratified hold-out when no validation set is given
  int threads = 1;            // augmentation workers
  bool record_time = false;   // wall-clock elapsed_s; off keeps histories reproducible byte for byte
  Precision precision = Precision::f32;  // read by callers choosing the Model<T> instantiation

  void validate() const {
    adam.validate();
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batch norm), got " + std::to_string(batch_size));
    if (max_epochs < 1) throw ConfigError("max epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("validation fraction must be in [0, 1)");
    if (threads < 1) throw ConfigError("threads must be at least 1");
  }
};

NLOHMANN_JSON_SERIALIZE_ENUM(Precision, {{Precision::f32, "f32"}, {Precision::f64, "f64"}})

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}, {"weight_decay", c.weight_decay}};
}
inline void from_json(const nlohmann::json& j, AdamConfig& c) {
  j.at("lr").get_to(c.lr);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("eps").get_to(c.eps);
  j.at("weight_decay").get_to(c.weight_decay);
}

inline void to_json(nlohmann::json& j, const AugmentSpec& a) {
  j = {{"scale_factor", a.scale_factor},
       {"translate_factor", a.translate_factor},
       {"rotate_factor", a.rotate_factor},
       {"point_layout", a.point_layout},
       {"gpsr", {{"enabled", a.gpsr.enabled}, {"n_factor", a.gpsr.n_factor}, {"r_factor", a.gpsr.r_factor}}}};
}
inline void from_json(const nlohmann::json& j, AugmentSpec& a) {
  j.at("scale_factor").get_to(a.scale_factor);
  j.at("translate_factor").get_to(a.translate_factor);
  j.at("rotate_factor").get_to(a.rotate_factor);
  j.at("point_layout").get_to(a.point_layout);
  const auto& g = j.at("gpsr");
  g.at("enabled").get_to(a.gpsr.enabled);
  g.at("n_factor").get_to(a.gpsr.n_factor);
  g.at("r_factor").get_to(a.gpsr.r_factor);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"adam", c.adam},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"seed", c.seed},
       {"augmentation", c.augmentation},
       {"val_fraction", c.val_fraction},
       {"threads", c.threads},
       {"record_time", c.record_time},
       {"precision", c.precision}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("adam").get_to(c.adam);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("seed").get_to(c.seed);
  j.at("augmentation").get_to(c.augmentation);
  j.at("val_fraction").get_to(c.val_fraction);
  j.at("threads").get_to(c.threads);
  j.at("record_time").get_to(c.record_time);
  j.at("precision").get_to(c.precision);
}

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
  double elapsed_s = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},     {"train_loss", r.train_loss}, {"train_acc", r.train_acc},
          {"val_acc", r.val_acc}, {"val_loss", r.val_loss},     {"elapsed_s", r.elapsed_s}};
}

template <typename T>
struct TrainResult {
  Model<T> model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  Index best_epoch = 0;
  double best_val_acc = 0.0;
};

namespace detail {

// Eval-mode metrics over samples that are already z-scored.
template <typename T>
Metrics evaluate_prepared(const Model<T>& model, std::span<const GestureSample> samples, Index num_classes,
                          Index batch_size) {
  std::vector<Index> predicted;
  std::vector<Index> truth;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(samples.size() - start, static_cast<std::size_t>(batch_size));
    const Batch<T> batch = pad_batch<T>(samples.subspan(start, count));
    const Matrix<T> logits = infer(model, batch);
    loss_sum += static_cast<double>(cross_entropy(logits, std::span<const Index>(batch.labels)).loss) *
                static_cast<double>(count);
    for (Index i = 0; i < logits.rows(); ++i) {
      Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      predicted.push_back(arg);
      truth.push_back(batch.labels[static_cast<std::size_t>(i)]);
    }
  }
  Metrics m = metrics_from_predictions(predicted, truth, num_classes);
  m.loss = samples.empty() ? std::numeric_limits<double>::quiet_NaN() : loss_sum / static_cast<double>(samples.size());
  return m;
}

template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline void check_dataset(const Dataset& data, Index dim, const char* what) {
  for (const auto& s : data.samples) {
    validate_sample(s);
    if (s.dim() != dim) {
      throw DataError(std::string(what) + " sample '" + s.id + "' has feature dimension " + std::to_string(s.dim()) +
                      ", expected " + std::to_string(dim));
    }
  }
}

}  // namespace detail

/// Eval-mode metrics on raw (un-normalized) samples; the model's z-score
/// statistics are applied first. Class indices must follow the model's
/// class order (see with_classes). Never augments.
template <typename T>
Metrics evaluate(const Model<T>& model, const Dataset& data, Index batch_size = 128) {
  detail::check_dataset(data, model.config.input_dim, "evaluation");
  const Dataset prepared = model.norm.empty() ? data : zscore_apply(data, model.norm);
  return detail::evaluate_prepared(model, std::span<const GestureSample>(prepared.samples), model.config.num_classes,
                                   batch_size);
}

/// Mini-batch training with Adam.
///
/// Z-score statistics are fitted on the training samples and stored in the
/// model. Each epoch visits the training set in a seeded shuffled order;
/// every sample is augmented on the fly from an RNG stream keyed by
/// (seed, epoch, sample index). A trailing batch of one sample is skipped
/// because batch norm cannot train on it. After each epoch the model is
/// evaluated on the validation data (given, or a stratified hold-out of the
/// training set, or the clean training set when the hold-out is empty) and
/// the best epoch's parameters are kept: higher accuracy wins, ties go to
/// lower loss. Training stops after `patience` epochs without improvement.
template <typename T>
TrainResult<T> train(Model<T> model, const Dataset& train_set, const Dataset* val_set, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  model.config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  detail::check_dataset(train_set, model.config.input_dim, "training");
  if (train_set.num_classes() != model.config.num_classes) {
    throw DataError("training data has " + std::to_string(train_set.num_classes()) + " classes, model expects " +
                    std::to_string(model.config.num_classes));
  }
  cfg.augmentation.validate(model.config.input_dim);

  const SeededRng root(cfg.seed);
  Dataset fit_set;
  Dataset val;
  if (val_set != nullptr) {
    detail::check_dataset(*val_set, model.config.input_dim, "validation");
    fit_set = train_set;
    val = with_classes(*val_set, train_set.classes);
  } else if (cfg.val_fraction > 0.0) {
    std::tie(fit_set, val) = stratified_split(train_set, cfg.val_fraction, root.fork(RngPurpose::split));
  } else {
    fit_set = train_set;
  }
  if (fit_set.empty()) throw DataError("no training samples left after the validation split");

  model.classes = train_set.classes;
  model.norm = zscore_fit(std::span<const GestureSample>(fit_set.samples));
  fit_set = zscore_apply(std::move(fit_set), model.norm);
  const bool clean_train_signal = val.empty();
  if (!clean_train_signal) val = zscore_apply(std::move(val), model.norm);
  const Dataset& signal = clean_train_signal ? fit_set : val;

  TrainResult<T> result{model, {}, 0, -1.0};
  double best_loss = std::numeric_limits<double>::infinity();
  AdamState<T> adam;
  std::vector<Matrix<T>*> params = model.params.trainable_tensors();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = fit_set.samples.size();
  Index since_improvement = 0;
  std::uint64_t step = 0;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SeededRng shuffle_rng = root.fork(RngPurpose::shuffle, static_cast<std::uint64_t>(epoch));
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    std::int64_t correct = 0;
    std::int64_t seen = 0;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(n - begin, static_cast<std::size_t>(cfg.batch_size));
      if (count < 2) continue;
      std::vector<GestureSample> augmented(count);
      detail::parallel_for(count, cfg.threads, [&](std::size_t k) {
        const std::size_t idx = order[begin + k];
        SeededRng aug_rng = root.fork(RngPurpose::augment, static_cast<std::uint64_t>(epoch), idx);
        augmented[k] = augment_sample(fit_set.samples[idx], cfg.augmentation, aug_rng);
      });
      const Batch<T> batch = pad_batch<T>(std::span<const GestureSample>(augmented));

      ForwardCache<T> cache;
      const SeededRng dropout_rng = root.fork(RngPurpose::dropout, step);
      const Matrix<T> logits = forward(model.params, model.config, batch, Mode::train, dropout_rng, &cache);
      const LossResult<T> loss = cross_entropy(logits, std::span<const Index>(batch.labels));
      if (!std::isfinite(static_cast<double>(loss.loss))) {
        throw DivergenceError(static_cast<std::size_t>(epoch),
                              "training loss became non-finite at epoch " + std::to_string(epoch));
      }
      const ModelParams<T> grads = backward(model.params, cache, loss.grad_logits);
      update_running_stats(model.params, cache);
      adam_step<T>(params, grads.trainable_tensors(), adam, cfg.adam);
      ++step;

      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(count);
      for (Index i = 0; i < logits.rows(); ++i) {
        Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        if (arg == batch.labels[static_cast<std::size_t>(i)]) ++correct;
      }
      seen += static_cast<std::int64_t>(count);
    }
    if (seen == 0) throw DataError("training set has fewer than 2 samples");

    const Metrics vm = detail::evaluate_prepared(model, std::span<const GestureSample>(signal.samples),
                                                 model.config.num_classes, cfg.batch_size);
    if (!std::isfinite(vm.loss)) {
      throw DivergenceError(static_cast<std::size_t>(epoch),
                            "validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    rec.val_acc = vm.accuracy;
    rec.val_loss = vm.loss;
    rec.elapsed_s = cfg.record_time
                        ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                        : 0.0;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (vm.accuracy > result.best_val_acc || (vm.accuracy == result.best_val_acc && vm.loss < best_loss)) {
      result.best_val_acc = vm.accuracy;
      best_loss = vm.loss;
      result.best_epoch = epoch;
      result.model = model;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace grurec
