#pragma once

#include <cmath>
#include <span>
#include <string>

#include "grurec/tensor.hpp"

namespace grurec {

template <typename T>
struct LossResult {
  T loss;
  Matrix<T> grad_logits;  // (softmax - onehot) / B
};

/// Mean negative log-likelihood of the labels under row-wise softmax.
template <typename T>
LossResult<T> cross_entropy(const Matrix<T>& logits, std::span<const Index> labels) {
  const Index b = logits.rows();
  const Index c = logits.cols();
  if (b == 0 || static_cast<Index>(labels.size()) != b) {
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for logits " + shape_of(logits));
  }
  LossResult<T> out{T(0), Matrix<T>(b, c)};
  for (Index i = 0; i < b; ++i) {
    const Index y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) {
      throw DataError("cross entropy: label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    }
    const T peak = logits.row(i).maxCoeff();
    const T log_norm = peak + std::log((logits.row(i).array() - peak).exp().sum());
    out.loss += log_norm - logits(i, y);
    out.grad_logits.row(i) = (logits.row(i).array() - log_norm).exp().matrix();
    out.grad_logits(i, y) -= T(1);
  }
  out.loss /= static_cast<T>(b);
  out.grad_logits /= static_cast<T>(b);
  return out;
}

}  // namespace grurec
