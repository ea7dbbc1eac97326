#pragma once

#include <string>

#include "grurec/nn/mode.hpp"
#include "grurec/rng.hpp"
#include "grurec/tensor.hpp"

namespace grurec {

template <typename T>
struct DropoutCache {
  Matrix<T> mask;  // 0 or 1/(1-rate); empty when the layer was the identity
};

inline void validate_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

/// Inverted dropout. Row i draws its mask from rng.fork(i), so the result
/// does not depend on the order rows are processed in.
template <typename T>
Matrix<T> dropout_forward(const Matrix<T>& x, double rate, Mode mode, const SeededRng& rng,
                          DropoutCache<T>* cache = nullptr) {
  validate_dropout_rate(rate);
  if (mode == Mode::eval || rate == 0.0) {
    if (cache) cache->mask.resize(0, 0);
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> mask(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    SeededRng row_rng = rng.fork(static_cast<std::uint64_t>(i));
    for (Index j = 0; j < x.cols(); ++j) mask(i, j) = row_rng.bernoulli(rate) ? T(0) : keep_scale;
  }
  Matrix<T> y = x.cwiseProduct(mask);
  if (cache) cache->mask = std::move(mask);
  return y;
}

template <typename T>
Matrix<T> dropout_backward(const DropoutCache<T>& cache, const Matrix<T>& dy) {
  if (cache.mask.size() == 0) return dy;
  if (cache.mask.rows() != dy.rows() || cache.mask.cols() != dy.cols()) {
    throw ContractError("dropout backward: mask " + shape_of(cache.mask) + " vs gradient " + shape_of(dy));
  }
  return dy.cwiseProduct(cache.mask);
}

}  // namespace grurec
