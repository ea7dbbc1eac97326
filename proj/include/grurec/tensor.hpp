#pragma once

// Dense numeric substrate: row-major matrices backed by Eigen, the
// activation kernels used by the model, and a stable softmax.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "grurec/errors.hpp"

#if !defined(NDEBUG) && !defined(GRUREC_DEBUG_CHECKS)
#define GRUREC_DEBUG_CHECKS 1
#endif

namespace grurec {

using Index = Eigen::Index;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Activation { sigmoid, tanh, relu };

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

/// Throws NumericError when any entry is NaN or Inf.
template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite value in ") + what);
  }
}

/// check_finite, compiled only into debug builds.
template <typename Derived>
void debug_check_finite([[maybe_unused]] const Eigen::DenseBase<Derived>& m,
                        [[maybe_unused]] const char* what) {
#if GRUREC_DEBUG_CHECKS
  check_finite(m, what);
#endif
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_of(a) + " by " + shape_of(b));
  }
  Matrix<T> out = a * b;
  debug_check_finite(out, "matmul");
  return out;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Elementwise sigmoid/tanh/relu on any Eigen expression.
template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& v, Activation kind) {
  using T = typename Derived::Scalar;
  using Plain = typename Derived::PlainObject;
  Plain out(v.rows(), v.cols());
  switch (kind) {
    case Activation::sigmoid:
      out = v.unaryExpr([](T x) { return sigmoid(x); });
      break;
    case Activation::tanh:
      out = v.array().tanh().matrix();
      break;
    case Activation::relu:
      out = v.cwiseMax(T(0));
      break;
  }
  return out;
}

/// Softmax of a vector with max subtraction.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& v) {
  using Plain = typename Derived::PlainObject;
  if (v.size() == 0) throw ShapeError("softmax: empty input");
  const auto peak = v.maxCoeff();
  Plain out = (v.array() - peak).exp().matrix();
  out /= out.sum();
  return out;
}

/// Row-wise softmax of a B x C matrix.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax(logits.row(i));
  return out;
}

template <typename To, typename From>
Matrix<To> cast_matrix(const Matrix<From>& m) {
  return m.template cast<To>();
}

}  // namespace grurec
