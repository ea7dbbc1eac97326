#pragma once

// 64-bit gradient-check suite: every layer's backward pass, and the whole
// model end to end, against central finite differences. Layers are checked
// through a random linear projection sum(G o y) of their output so every
// output coordinate contributes.

#include <algorithm>
#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grurec/finite_diff.hpp"
#include "grurec/model/model.hpp"
#include "grurec/nn/loss.hpp"

namespace grurec {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int instantiations = 10;  // random parameter/input draws per component
  double step = 1e-4;
  Stencil stencil = Stencil::four_point;
  double threshold = 1e-4;
  double floor = 1e-6;  // denominator floor of the relative error
  std::string perturb;  // test hook: corrupt this component's analytic gradients
};

struct ComponentResult {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<ComponentResult> components;
  bool passed = false;
  double seconds = 0.0;
};

inline const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> names{"gru_cell", "gru_layer", "attention", "batchnorm",
                                              "dropout",  "dense",     "cross_entropy", "model"};
  return names;
}

namespace detail::gc {

using M = Matrix<double>;

struct Probe {
  double step;
  Stencil stencil;
  double floor;
  bool corrupt;

  double compare(M& param, M analytic, const std::function<double()>& loss) const {
    if (corrupt) analytic = (analytic * 1.01).array() + 1e-3;
    return max_relative_error(analytic, finite_diff_grad(param, loss, step, stencil), floor);
  }
};

inline M random(Index rows, Index cols, SeededRng& rng, double scale = 1.0) {
  M m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

inline void fill_uniform(M& m, SeededRng& rng, double lo, double hi) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
}

inline double project(const M& y, const M& g) { return (y.array() * g.array()).sum(); }

template <typename P>
std::vector<M*> tensors(P& p) {
  std::vector<M*> out;
  p.for_each([&](std::string_view, M& m) { out.push_back(&m); });
  return out;
}

template <typename P>
double compare_all(const Probe& pr, P& params, P& grads, const std::function<double()>& loss) {
  const auto ps = tensors(params);
  const auto gs = tensors(grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) worst = std::max(worst, pr.compare(*ps[i], *gs[i], loss));
  return worst;
}

inline GruParams<double> random_gru(Index in, Index h, SeededRng& rng) {
  GruParams<double> p = GruParams<double>::zeros(in, h);
  for (M* m : tensors(p)) fill_uniform(*m, rng, -0.6, 0.6);
  return p;
}

inline double gru_cell(const Probe& pr, SeededRng rng) {
  const Index b = 2, n = 4, h = 5;
  GruParams<double> p = random_gru(n, h, rng);
  M x = random(b, n, rng);
  M h_prev = random(b, h, rng, 0.5);
  const M g = random(b, h, rng);
  GruCellCache<double> cache;
  gru_cell_forward(x, h_prev, p, &cache);
  GruParams<double> grads = GruParams<double>::zeros(n, h);
  const GruCellGrads<double> d = gru_cell_backward(p, cache, g, grads);
  const auto loss = [&] { return project(gru_cell_forward(x, h_prev, p), g); };
  double worst = compare_all(pr, p, grads, loss);
  worst = std::max(worst, pr.compare(x, d.dx, loss));
  return std::max(worst, pr.compare(h_prev, d.dh_prev, loss));
}

inline double gru_layer(const Probe& pr, SeededRng rng) {
  const Index n = 4, h = 5;
  const std::vector<Index> lengths{3, 5};
  const Index b = 2, steps = 5;
  GruParams<double> p = random_gru(n, h, rng);
  M inputs = random(steps * b, n, rng);
  for (Index t = 3; t < steps; ++t) inputs.row(t * b).setZero();
  const M g_all = random(steps * b, h, rng);
  const M g_last = random(b, h, rng);
  GruLayerCache<double> cache;
  gru_layer_forward(inputs, std::span<const Index>(lengths), p, &cache);
  GruParams<double> grads = GruParams<double>::zeros(n, h);
  const M dx = gru_layer_backward(p, cache, g_all, g_last, grads);
  const auto loss = [&] {
    const auto out = gru_layer_forward(inputs, std::span<const Index>(lengths), p);
    return project(out.hidden_all, g_all) + project(out.h_last, g_last);
  };
  return std::max(compare_all(pr, p, grads, loss), pr.compare(inputs, dx, loss));
}

inline double attention(const Probe& pr, SeededRng rng) {
  const Index h = 5, b = 2, steps = 5;
  const std::vector<Index> lengths{3, 5};
  AttentionParams<double> p = AttentionParams<double>::zeros(h);
  for (M* m : tensors(p)) fill_uniform(*m, rng, -0.6, 0.6);
  M hidden = random(steps * b, h, rng, 0.7);
  M h_last = random(b, h, rng, 0.7);
  const M g = random(b, 2 * h, rng);
  AttentionCache<double> cache;
  attention_forward(hidden, h_last, std::span<const Index>(lengths), p, &cache);
  AttentionParams<double> grads = AttentionParams<double>::zeros(h);
  const auto d = attention_backward(p, cache, g, grads);
  const auto loss = [&] { return project(attention_forward(hidden, h_last, std::span<const Index>(lengths), p), g); };
  double worst = compare_all(pr, p, grads, loss);
  worst = std::max(worst, pr.compare(hidden, d.d_hidden_all, loss));
  return std::max(worst, pr.compare(h_last, d.d_h_last, loss));
}

inline double batchnorm(const Probe& pr, SeededRng rng) {
  const Index b = 4, dim = 3;
  double worst = 0.0;
  for (Mode mode : {Mode::train, Mode::eval}) {
    BatchNormParams<double> p = BatchNormParams<double>::identity(dim);
    fill_uniform(p.gamma, rng, 0.5, 1.5);
    fill_uniform(p.beta, rng, -0.5, 0.5);
    fill_uniform(p.running_mean, rng, -0.5, 0.5);
    fill_uniform(p.running_var, rng, 0.5, 1.5);
    M x = random(b, dim, rng);
    const M g = random(b, dim, rng);
    BatchNormCache<double> cache;
    batchnorm_apply(x, p, mode, &cache);
    BatchNormParams<double> grads = BatchNormParams<double>::identity(dim);
    grads.gamma.setZero();
    const M dx = batchnorm_backward(p, cache, g, grads);
    const auto loss = [&] { return project(batchnorm_apply(x, p, mode), g); };
    worst = std::max({worst, compare_all(pr, p, grads, loss), pr.compare(x, dx, loss)});
  }
  return worst;
}

inline double dropout(const Probe& pr, SeededRng rng) {
  M x = random(4, 6, rng);
  const M g = random(4, 6, rng);
  const SeededRng mask_rng = rng.fork(1);
  DropoutCache<double> cache;
  dropout_forward(x, 0.3, Mode::train, mask_rng, &cache);
  const M dx = dropout_backward(cache, g);
  return pr.compare(x, dx, [&] { return project(dropout_forward(x, 0.3, Mode::train, mask_rng), g); });
}

// Draws with a ReLU input within this distance of zero are redrawn; finite
// differences straddling the kink are meaningless.
inline constexpr double kKinkMargin = 1e-3;

inline double dense(const Probe& pr, SeededRng rng) {
  DenseParams<double> p = DenseParams<double>::zeros(4, 5);
  M x;
  M y;
  do {
    for (M* m : tensors(p)) fill_uniform(*m, rng, -0.8, 0.8);
    x = random(3, 4, rng);
    y = dense_forward(x, p);
  } while (y.cwiseAbs().minCoeff() < kKinkMargin);
  const M g = random(3, 5, rng);
  DenseParams<double> grads = DenseParams<double>::zeros(4, 5);
  const M dx = dense_backward(p, x, relu_backward(y, g), grads);
  const auto loss = [&] { return project(activate(dense_forward(x, p), Activation::relu), g); };
  return std::max(compare_all(pr, p, grads, loss), pr.compare(x, dx, loss));
}

inline double cross_entropy_check(const Probe& pr, SeededRng rng) {
  M logits = random(3, 4, rng, 2.0);
  std::vector<Index> labels(3);
  for (auto& y : labels) y = static_cast<Index>(rng.uniform_index(4));
  const auto result = cross_entropy(logits, std::span<const Index>(labels));
  return pr.compare(logits, result.grad_logits,
                    [&] { return cross_entropy(logits, std::span<const Index>(labels)).loss; });
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.input_dim = 4;
  c.num_classes = 3;
  c.encoder_widths = {8, 8, 6};
  c.use_attention = true;
  c.fc_count = 2;
  c.fc_width = 12;
  c.dropout_rate = 0.5;
  return c;
}

// Batch norm over two rows approaches a sign function once the batch
// variance falls to the order of epsilon, and finite differences stop
// resolving it. End-to-end draws whose BN inputs are that degenerate (or sit
// on a ReLU kink) are redrawn. A column that is exactly zero in both rows is
// a dead ReLU and stays flat, so it is allowed.
inline constexpr double kMinBatchVar = 1e-4;
inline constexpr int kMaxRedraws = 1000;

inline bool well_conditioned(const ForwardCache<double>& cache) {
  for (std::size_t k = 0; k < cache.stages.size(); ++k) {
    for (double v : cache.stages[k].bn.batch_var.reshaped()) {
      if (v != 0.0 && v < kMinBatchVar) return false;
    }
    if (k + 1 < cache.stages.size() && cache.stages[k].fc_output.cwiseAbs().minCoeff() < kKinkMargin) return false;
  }
  return true;
}

inline double model(const Probe& pr, SeededRng rng) {
  const ModelConfig cfg = tiny_config();
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Model<double> m = build_model<double>(cfg, rng.next_u64());
    for (auto& layer : m.params.encoder) {
      for (M* t : tensors(layer)) fill_uniform(*t, rng, -1.5, 1.5);
    }
    for (M* t : tensors(*m.params.attention)) fill_uniform(*t, rng, -1.5, 1.5);
    for (auto& stage : m.params.classifier) {
      fill_uniform(stage.bn.gamma, rng, 0.5, 1.5);
      fill_uniform(stage.bn.beta, rng, -0.5, 0.5);
      fill_uniform(stage.fc.bias, rng, -0.3, 0.3);
    }
    std::vector<GestureSample> samples(2);
    const Index lengths[] = {3, 5};
    for (std::size_t i = 0; i < 2; ++i) {
      samples[i].id = "s" + std::to_string(i);
      samples[i].frames = random(lengths[i], cfg.input_dim, rng);
      samples[i].class_index = static_cast<Index>(rng.uniform_index(3));
    }
    const Batch<double> batch = pad_batch<double>(std::span<const GestureSample>(samples));
    const SeededRng dropout_rng = rng.fork(static_cast<std::uint64_t>(attempt));
    const std::span<const Index> labels(batch.labels);

    ForwardCache<double> cache;
    const M logits = forward(m.params, cfg, batch, Mode::train, dropout_rng, &cache);
    if (!well_conditioned(cache)) continue;
    ModelParams<double> grads = backward(m.params, cache, cross_entropy(logits, labels).grad_logits);
    const auto loss = [&] {
      return cross_entropy(forward(m.params, cfg, batch, Mode::train, dropout_rng), labels).loss;
    };
    const auto ps = m.params.trainable_tensors();
    const auto gs = grads.trainable_tensors();
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) worst = std::max(worst, pr.compare(*ps[i], *gs[i], loss));
    return worst;
  }
  throw OracleError("gradcheck: no well-conditioned model draw found");
}

}  // namespace detail::gc

/// Runs every component `instantiations` times with fresh random draws and
/// reports the worst relative error seen per component.
inline GradcheckReport run_gradcheck(const GradcheckOptions& opt = {}) {
  using Check = double (*)(const detail::gc::Probe&, SeededRng);
  const Check checks[] = {detail::gc::gru_cell,  detail::gc::gru_layer, detail::gc::attention,
                          detail::gc::batchnorm, detail::gc::dropout,   detail::gc::dense,
                          detail::gc::cross_entropy_check, detail::gc::model};
  const auto& names = gradcheck_components();
  if (!opt.perturb.empty() && std::find(names.begin(), names.end(), opt.perturb) == names.end()) {
    throw ConfigError("unknown gradcheck component '" + opt.perturb + "'");
  }
  if (opt.instantiations < 1) throw ConfigError("gradcheck needs at least one instantiation");

  const auto start = std::chrono::steady_clock::now();
  const SeededRng root = SeededRng(opt.seed).fork(RngPurpose::gradcheck);
  GradcheckReport report;
  report.passed = true;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const detail::gc::Probe probe{opt.step, opt.stencil, opt.floor, names[k] == opt.perturb};
    ComponentResult r{names[k], 0.0, false};
    for (int i = 0; i < opt.instantiations; ++i) {
      r.max_rel_error = std::max(r.max_rel_error, checks[k](probe, root.fork(k, static_cast<std::uint64_t>(i))));
    }
    r.passed = r.max_rel_error < opt.threshold;
    report.passed = report.passed && r.passed;
    report.components.push_back(r);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline nlohmann::json to_json(const GradcheckReport& r, double threshold) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.components) {
    comps.push_back({{"component", c.name}, {"max_rel_error", c.max_rel_error}, {"passed", c.passed}});
  }
  return {{"components", comps}, {"threshold", threshold}, {"passed", r.passed}};
}

}  // namespace grurec
