#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "grurec/nn/mode.hpp"
#include "grurec/tensor.hpp"

namespace grurec {

template <typename T>
struct BatchNormParams {
  Matrix<T> gamma;  // 1 x D
  Matrix<T> beta;   // 1 x D
  Matrix<T> running_mean;  // 1 x D, not trained
  Matrix<T> running_var;   // 1 x D, not trained
  T momentum = T(0.1);
  T epsilon = T(1e-5);

  static BatchNormParams identity(Index dim) {
    BatchNormParams p;
    p.gamma = Matrix<T>::Ones(1, dim);
    p.beta = Matrix<T>::Zero(1, dim);
    p.running_mean = Matrix<T>::Zero(1, dim);
    p.running_var = Matrix<T>::Ones(1, dim);
    return p;
  }

  Index dim() const { return gamma.cols(); }

  /// Trainable tensors only.
  template <typename F>
  void for_each(F&& f) {
    f(std::string_view("gamma"), gamma);
    f(std::string_view("beta"), beta);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string_view("gamma"), gamma);
    f(std::string_view("beta"), beta);
  }

  /// Running statistics, persisted but not trained.
  template <typename F>
  void for_each_buffer(F&& f) {
    f(std::string_view("running_mean"), running_mean);
    f(std::string_view("running_var"), running_var);
  }
  template <typename F>
  void for_each_buffer(F&& f) const {
    f(std::string_view("running_mean"), running_mean);
    f(std::string_view("running_var"), running_var);
  }

  void validate() const {
    const Index d = dim();
    if (gamma.rows() != 1 || beta.rows() != 1 || beta.cols() != d || running_mean.cols() != d ||
        running_var.cols() != d) {
      throw ShapeError("batch norm parameters inconsistent");
    }
    if (!(epsilon > T(0))) throw ConfigError("batch norm epsilon must be positive");
    if ((running_var.array() < T(0)).any()) throw ConfigError("batch norm running variance is negative");
  }
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::eval;
  Matrix<T> x_hat;       // B x D
  Matrix<T> inv_std;     // 1 x D
  Matrix<T> batch_mean;  // 1 x D, train mode only
  Matrix<T> batch_var;   // 1 x D, biased, train mode only
};

/// Pure forward. Train mode normalizes by batch statistics (recorded in the
/// cache for batchnorm_update_running); eval mode uses the running ones.
template <typename T>
Matrix<T> batchnorm_apply(const Matrix<T>& x, const BatchNormParams<T>& p, Mode mode,
                          BatchNormCache<T>* cache = nullptr) {
  p.validate();
  if (x.cols() != p.dim()) {
    throw ShapeError("batch norm: input " + shape_of(x) + " for dim " + std::to_string(p.dim()));
  }
  const Index b = x.rows();
  Matrix<T> mean;
  Matrix<T> var;
  if (mode == Mode::train) {
    if (b < 2) throw BatchTooSmallError("batch norm needs at least 2 rows in train mode, got " + std::to_string(b));
    mean = x.colwise().mean();
    var = (x.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  const Matrix<T> inv_std = (var.array() + p.epsilon).rsqrt().matrix();
  Matrix<T> x_hat = ((x.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array()).matrix();
  Matrix<T> y = (x_hat.array().rowwise() * p.gamma.row(0).array()).matrix();
  y.rowwise() += p.beta.row(0);
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
    cache->batch_mean = mode == Mode::train ? mean : Matrix<T>();
    cache->batch_var = mode == Mode::train ? var : Matrix<T>();
  }
  return y;
}

/// Folds a train-mode batch into the running statistics with momentum.
/// The running variance uses the unbiased batch estimate.
template <typename T>
void batchnorm_update_running(BatchNormParams<T>& p, const BatchNormCache<T>& cache) {
  if (cache.mode != Mode::train) return;
  const Index b = cache.x_hat.rows();
  if (cache.batch_mean.cols() != p.dim() || b < 2) throw ContractError("batch norm: cache has no batch statistics");
  const T unbias = static_cast<T>(b) / static_cast<T>(b - 1);
  p.running_mean = (T(1) - p.momentum) * p.running_mean + p.momentum * cache.batch_mean;
  p.running_var = (T(1) - p.momentum) * p.running_var + p.momentum * unbias * cache.batch_var;
}

/// batchnorm_apply followed, in train mode, by the running-stat update.
template <typename T>
Matrix<T> batchnorm_forward(const Matrix<T>& x, BatchNormParams<T>& p, Mode mode,
                            BatchNormCache<T>* cache = nullptr) {
  BatchNormCache<T> local;
  BatchNormCache<T>& c = cache ? *cache : local;
  Matrix<T> y = batchnorm_apply(x, p, mode, &c);
  batchnorm_update_running(p, c);
  return y;
}

template <typename T>
Matrix<T> batchnorm_backward(const BatchNormParams<T>& p, const BatchNormCache<T>& cache, const Matrix<T>& dy,
                             BatchNormParams<T>& grads) {
  if (cache.x_hat.cols() != p.dim() || dy.rows() != cache.x_hat.rows() || dy.cols() != p.dim()) {
    throw ContractError("batch norm backward: cache or upstream gradient does not match the layer");
  }
  grads.gamma += (dy.array() * cache.x_hat.array()).colwise().sum().matrix();
  grads.beta += dy.colwise().sum();
  const Matrix<T> dx_hat = (dy.array().rowwise() * p.gamma.row(0).array()).matrix();
  if (cache.mode == Mode::eval) {
    return (dx_hat.array().rowwise() * cache.inv_std.row(0).array()).matrix();
  }
  const T n = static_cast<T>(dy.rows());
  const Matrix<T> sum_dx_hat = dx_hat.colwise().sum();
  const Matrix<T> sum_dx_hat_x_hat = (dx_hat.array() * cache.x_hat.array()).colwise().sum().matrix();
  Matrix<T> dx = ((n * dx_hat.array()).rowwise() - sum_dx_hat.row(0).array()).matrix();
  dx -= (cache.x_hat.array().rowwise() * sum_dx_hat_x_hat.row(0).array()).matrix();
  dx = (dx.array().rowwise() * (cache.inv_std.row(0).array() / n)).matrix();
  return dx;
}

}  // namespace grurec
