#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "grurec/tensor.hpp"

namespace grurec {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient folded into the gradient

  void validate() const {
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  }
};

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m;  // first moments
  std::vector<Matrix<T>> v;  // second moments
  std::uint64_t step = 0;
};

/// One Adam update with bias correction. Weight decay is coupled:
/// g <- g + wd * p before the moment updates. Moments are created on the
/// first call.
template <typename T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>* const> grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ContractError("adam: parameter and gradient lists differ in length");
  if (state.m.empty()) {
    for (const Matrix<T>* p : params) {
      state.m.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam: state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix<T>& g = *grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols() || state.m[i].rows() != g.rows() ||
        state.m[i].cols() != g.cols()) {
      throw ContractError("adam: tensor " + std::to_string(i) + " gradient " + shape_of(g) + " vs parameter " +
                          shape_of(*params[i]));
    }
  }

  ++state.step;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  const T wd = static_cast<T>(cfg.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->array();
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    if (wd != T(0)) {
      const Matrix<T> g = *grads[i] + wd * *params[i];
      m = b1 * m + (T(1) - b1) * g.array();
      v = b2 * v + (T(1) - b2) * g.array().square();
    } else {
      m = b1 * m + (T(1) - b1) * grads[i]->array();
      v = b2 * v + (T(1) - b2) * grads[i]->array().square();
    }
    p -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

}  // namespace grurec
