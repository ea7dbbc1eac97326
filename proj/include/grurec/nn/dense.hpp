#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "grurec/rng.hpp"
#include "grurec/tensor.hpp"

namespace grurec {

template <typename T>
struct DenseParams {
  Matrix<T> weight;  // D_out x D_in
  Matrix<T> bias;    // 1 x D_out

  static DenseParams zeros(Index in_dim, Index out_dim) {
    return {Matrix<T>::Zero(out_dim, in_dim), Matrix<T>::Zero(1, out_dim)};
  }

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }

  template <typename F>
  void for_each(F&& f) {
    f(std::string_view("weight"), weight);
    f(std::string_view("bias"), bias);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string_view("weight"), weight);
    f(std::string_view("bias"), bias);
  }
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], bias zero.
template <typename T>
void init_uniform(DenseParams<T>& p, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_dim()));
  for (Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  p.bias.setZero();
}

/// X W^T + b, broadcast over rows.
template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, const DenseParams<T>& p) {
  if (x.cols() != p.in_dim() || p.bias.rows() != 1 || p.bias.cols() != p.out_dim()) {
    throw ShapeError("dense: input " + shape_of(x) + " with weight " + shape_of(p.weight) + " and bias " +
                     shape_of(p.bias));
  }
  Matrix<T> y = x * p.weight.transpose();
  y.rowwise() += p.bias.row(0);
  return y;
}

/// Accumulates weight/bias gradients; returns dX.
template <typename T>
Matrix<T> dense_backward(const DenseParams<T>& p, const Matrix<T>& x, const Matrix<T>& dy, DenseParams<T>& grads) {
  if (x.cols() != p.in_dim() || dy.cols() != p.out_dim() || dy.rows() != x.rows()) {
    throw ContractError("dense backward: input " + shape_of(x) + " / gradient " + shape_of(dy) +
                        " do not match weight " + shape_of(p.weight));
  }
  grads.weight.noalias() += dy.transpose() * x;
  grads.bias += dy.colwise().sum();
  return dy * p.weight;
}

template <typename T>
Matrix<T> relu_backward(const Matrix<T>& x, const Matrix<T>& dy) {
  if (x.rows() != dy.rows() || x.cols() != dy.cols()) throw ContractError("relu backward: shape mismatch");
  return (x.array() > T(0)).select(dy, Matrix<T>::Zero(dy.rows(), dy.cols()));
}

}  // namespace grurec
