#pragma once

// The full recognizer:
//
//   encoder (stacked GRUs) -> attention [c; c'] (or h_last when disabled)
//   -> BN -> dropout -> F1 -> ReLU -> BN -> dropout -> F2 -> logits
//
// With fc_count == 1 the second stage is absent: BN -> dropout -> F -> logits.
// Softmax is applied only by the loss and by predict().

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grurec/data/normalize.hpp"
#include "grurec/data/sample.hpp"
#include "grurec/model/config.hpp"
#include "grurec/nn/attention.hpp"
#include "grurec/nn/batchnorm.hpp"
#include "grurec/nn/dense.hpp"
#include "grurec/nn/dropout.hpp"
#include "grurec/nn/gru.hpp"
#include "grurec/nn/mode.hpp"

namespace grurec {

template <typename T>
struct ClassifierStage {
  BatchNormParams<T> bn;
  DenseParams<T> fc;
};

template <typename T>
struct ModelParams {
  std::vector<GruParams<T>> encoder;
  std::optional<AttentionParams<T>> attention;
  std::vector<ClassifierStage<T>> classifier;

  /// Parameters shaped for `config`, all zero (batch-norm scale one).
  static ModelParams shaped(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    Index in = config.input_dim;
    for (Index h : config.encoder_widths) {
      p.encoder.push_back(GruParams<T>::zeros(in, h));
      in = h;
    }
    if (config.use_attention) p.attention = AttentionParams<T>::zeros(config.hidden_dim());
    Index d = config.feature_dim();
    if (config.fc_count == 2) {
      p.classifier.push_back({BatchNormParams<T>::identity(d), DenseParams<T>::zeros(d, config.fc_width)});
      d = config.fc_width;
    }
    p.classifier.push_back({BatchNormParams<T>::identity(d), DenseParams<T>::zeros(d, config.num_classes)});
    return p;
  }

  /// Zero tensors with this parameter set's shapes, for gradients.
  ModelParams zeros_like() const {
    ModelParams g = *this;
    g.for_each_trainable([](std::string_view, Matrix<T>& m) { m.setZero(); });
    return g;
  }

  /// Visits every trainable tensor as f(name, matrix) in a fixed order.
  template <typename F>
  void for_each_trainable(F&& f) {
    visit_trainable(*this, f);
  }
  template <typename F>
  void for_each_trainable(F&& f) const {
    visit_trainable(*this, f);
  }

  /// Visits batch-norm running statistics.
  template <typename F>
  void for_each_buffer(F&& f) {
    visit_buffers(*this, f);
  }
  template <typename F>
  void for_each_buffer(F&& f) const {
    visit_buffers(*this, f);
  }

  std::vector<Matrix<T>*> trainable_tensors() {
    std::vector<Matrix<T>*> out;
    for_each_trainable([&](std::string_view, Matrix<T>& m) { out.push_back(&m); });
    return out;
  }
  std::vector<const Matrix<T>*> trainable_tensors() const {
    std::vector<const Matrix<T>*> out;
    for_each_trainable([&](std::string_view, const Matrix<T>& m) { out.push_back(&m); });
    return out;
  }

  Index trainable_count() const {
    Index n = 0;
    for_each_trainable([&](std::string_view, const Matrix<T>& m) { n += m.size(); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void visit_trainable(Self& self, F& f) {
    for (std::size_t i = 0; i < self.encoder.size(); ++i) {
      const std::string prefix = "encoder." + std::to_string(i) + ".";
      self.encoder[i].for_each([&](std::string_view n, auto& m) { f(prefix + std::string(n), m); });
    }
    if (self.attention) {
      self.attention->for_each([&](std::string_view n, auto& m) { f("attention." + std::string(n), m); });
    }
    for (std::size_t i = 0; i < self.classifier.size(); ++i) {
      const std::string prefix = "classifier." + std::to_string(i) + ".";
      self.classifier[i].bn.for_each([&](std::string_view n, auto& m) { f(prefix + "bn." + std::string(n), m); });
      self.classifier[i].fc.for_each([&](std::string_view n, auto& m) { f(prefix + "fc." + std::string(n), m); });
    }
  }

  template <typename Self, typename F>
  static void visit_buffers(Self& self, F& f) {
    for (std::size_t i = 0; i < self.classifier.size(); ++i) {
      const std::string prefix = "classifier." + std::to_string(i) + ".bn.";
      self.classifier[i].bn.for_each_buffer([&](std::string_view n, auto& m) { f(prefix + std::string(n), m); });
    }
  }
};

template <typename T>
struct Model {
  ModelConfig config;
  ModelParams<T> params;
  NormStats norm;                    // empty until trained
  std::vector<std::string> classes;  // class names by index; may be empty
};

template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  Model<T> model{config, ModelParams<T>::shaped(config), {}, {}};
  const SeededRng root = SeededRng(seed).fork(RngPurpose::init);
  std::uint64_t stream = 0;
  for (auto& layer : model.params.encoder) {
    SeededRng rng = root.fork(stream++);
    init_uniform(layer, rng);
  }
  if (model.params.attention) {
    SeededRng rng = root.fork(stream++);
    init_uniform(*model.params.attention, rng);
  }
  for (auto& stage : model.params.classifier) {
    SeededRng rng = root.fork(stream++);
    init_uniform(stage.fc, rng);
  }
  return model;
}

/// The same model in another precision.
template <typename To, typename From>
Model<To> model_cast(const Model<From>& m) {
  Model<To> out{m.config, ModelParams<To>::shaped(m.config), m.norm, m.classes};
  auto dst = out.params.trainable_tensors();
  auto src = m.params.trainable_tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = src[i]->template cast<To>();
  std::vector<Matrix<To>*> dst_buf;
  std::vector<const Matrix<From>*> src_buf;
  out.params.for_each_buffer([&](std::string_view, Matrix<To>& t) { dst_buf.push_back(&t); });
  m.params.for_each_buffer([&](std::string_view, const Matrix<From>& t) { src_buf.push_back(&t); });
  for (std::size_t i = 0; i < dst_buf.size(); ++i) *dst_buf[i] = src_buf[i]->template cast<To>();
  return out;
}

template <typename T>
struct ForwardCache {
  struct Stage {
    BatchNormCache<T> bn;
    DropoutCache<T> dropout;
    Matrix<T> fc_input;
    Matrix<T> fc_output;  // before ReLU
  };
  std::vector<GruLayerCache<T>> encoder;
  AttentionCache<T> attention;
  std::vector<Stage> stages;
  Index batch_size = 0;
  Index steps = 0;
};

/// Logits for a batch. Does not modify the parameters; in train mode the
/// batch-norm statistics are left in the cache for update_running_stats().
/// The dropout mask of stage k, row i comes from dropout_rng.fork(k).fork(i).
template <typename T>
Matrix<T> forward(const ModelParams<T>& params, const ModelConfig& config, const Batch<T>& batch, Mode mode,
                  const SeededRng& dropout_rng, ForwardCache<T>* cache = nullptr) {
  if (batch.dim() != config.input_dim) {
    throw ShapeError("model expects feature dimension " + std::to_string(config.input_dim) + ", batch has " +
                     std::to_string(batch.dim()));
  }
  if (params.encoder.size() != config.encoder_widths.size() || params.attention.has_value() != config.use_attention ||
      static_cast<int>(params.classifier.size()) != config.fc_count) {
    throw ShapeError("model parameters do not match the configuration");
  }
  if (cache) {
    cache->encoder.assign(params.encoder.size(), {});
    cache->stages.assign(params.classifier.size(), {});
    cache->batch_size = batch.size();
    cache->steps = batch.steps();
  }

  const std::span<const Index> lengths(batch.lengths);
  GruLayerOutput<T> enc;
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    const Matrix<T>& input = l == 0 ? batch.data : enc.hidden_all;
    enc = gru_layer_forward(input, lengths, params.encoder[l], cache ? &cache->encoder[l] : nullptr);
  }

  Matrix<T> x = params.attention
                    ? attention_forward(enc.hidden_all, enc.h_last, lengths, *params.attention,
                                        cache ? &cache->attention : nullptr)
                    : enc.h_last;

  for (std::size_t k = 0; k < params.classifier.size(); ++k) {
    const auto& stage = params.classifier[k];
    auto* sc = cache ? &cache->stages[k] : nullptr;
    x = batchnorm_apply(x, stage.bn, mode, sc ? &sc->bn : nullptr);
    x = dropout_forward(x, config.dropout_rate, mode, dropout_rng.fork(static_cast<std::uint64_t>(k)),
                        sc ? &sc->dropout : nullptr);
    Matrix<T> y = dense_forward(x, stage.fc);
    if (sc) {
      sc->fc_input = std::move(x);
      sc->fc_output = y;
    }
    x = k + 1 < params.classifier.size() ? activate(y, Activation::relu) : std::move(y);
  }
  debug_check_finite(x, "logits");
  return x;
}

/// Applies a train-mode forward's batch statistics to the running ones.
template <typename T>
void update_running_stats(ModelParams<T>& params, const ForwardCache<T>& cache) {
  if (cache.stages.size() != params.classifier.size()) throw ContractError("cache does not match the model");
  for (std::size_t k = 0; k < params.classifier.size(); ++k) {
    batchnorm_update_running(params.classifier[k].bn, cache.stages[k].bn);
  }
}

/// Reverse pass from d loss / d logits to gradients for every trainable tensor.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const Matrix<T>& d_logits) {
  if (cache.encoder.size() != params.encoder.size() || cache.stages.size() != params.classifier.size()) {
    throw ContractError("backward: cache was not produced by this model");
  }
  ModelParams<T> grads = params.zeros_like();
  Matrix<T> d = d_logits;
  for (std::size_t k = params.classifier.size(); k-- > 0;) {
    const auto& stage = params.classifier[k];
    const auto& sc = cache.stages[k];
    if (k + 1 < params.classifier.size()) d = relu_backward(sc.fc_output, d);
    d = dense_backward(stage.fc, sc.fc_input, d, grads.classifier[k].fc);
    d = dropout_backward(sc.dropout, d);
    d = batchnorm_backward(stage.bn, sc.bn, d, grads.classifier[k].bn);
  }

  Matrix<T> d_hidden_all;
  Matrix<T> d_h_last;
  if (params.attention) {
    auto g = attention_backward(*params.attention, cache.attention, d, *grads.attention);
    d_hidden_all = std::move(g.d_hidden_all);
    d_h_last = std::move(g.d_h_last);
  } else {
    d_h_last = std::move(d);
  }
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    d_hidden_all = gru_layer_backward(params.encoder[l], cache.encoder[l], d_hidden_all, d_h_last, grads.encoder[l]);
    d_h_last.resize(0, 0);
  }
  return grads;
}

/// Eval-mode logits for already-normalized samples.
template <typename T>
Matrix<T> infer(const Model<T>& model, const Batch<T>& batch) {
  return forward(model.params, model.config, batch, Mode::eval, SeededRng(0));
}

struct Prediction {
  Index label = -1;
  std::vector<double> probs;
};

/// Z-scores raw samples with the model's statistics, runs eval-mode
/// inference in chunks, and returns argmax labels with probabilities.
template <typename T>
std::vector<Prediction> predict_batch(const Model<T>& model, std::span<const GestureSample> samples,
                                      Index chunk = 64) {
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(chunk));
    std::vector<GestureSample> normed;
    for (std::size_t i = start; i < end; ++i) {
      if (samples[i].dim() != model.config.input_dim) {
        throw DataError("sample '" + samples[i].id + "' has feature dimension " + std::to_string(samples[i].dim()) +
                        ", model expects " + std::to_string(model.config.input_dim));
      }
      validate_sample(samples[i]);
      normed.push_back(model.norm.empty() ? samples[i] : zscore_apply(samples[i], model.norm));
    }
    const Matrix<T> probs = softmax_rows(infer(model, pad_batch<T>(std::span<const GestureSample>(normed))));
    for (Index i = 0; i < probs.rows(); ++i) {
      Prediction p;
      probs.row(i).maxCoeff(&p.label);
      p.probs.assign(probs.row(i).data(), probs.row(i).data() + probs.cols());
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename T>
Prediction predict(const Model<T>& model, const GestureSample& sample) {
  return predict_batch(model, std::span<const GestureSample>(&sample, 1)).front();
}

}  // namespace grurec
