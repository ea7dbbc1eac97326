#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "grurec/tensor.hpp"

namespace grurec {

enum class Stencil { two_point, four_point };

namespace detail {

inline double checked(double v, Index coord) {
  if (!std::isfinite(v)) {
    throw OracleError("finite difference: objective is non-finite at coordinate " +
                      std::to_string(coord));
  }
  return v;
}

// Derivative along one coordinate; eval(v) evaluates with the coordinate at v.
template <typename F>
double central(F&& eval, double x, double h, Stencil stencil, Index coord) {
  const double p1 = checked(eval(x + h), coord);
  const double m1 = checked(eval(x - h), coord);
  if (stencil == Stencil::two_point) return (p1 - m1) / (2.0 * h);
  const double p2 = checked(eval(x + 2.0 * h), coord);
  const double m2 = checked(eval(x - 2.0 * h), coord);
  return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
}

}  // namespace detail

/// Central-difference gradient of f at x. The two-point stencil is
/// (f(x+h) - f(x-h)) / 2h; the four-point one adds the +-2h samples for an
/// O(h^4) error. Always 64-bit.
inline Vector<double> finite_diff_grad(const std::function<double(const Vector<double>&)>& f,
                                       const Vector<double>& x, double h,
                                       Stencil stencil = Stencil::two_point) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Vector<double> grad(x.size());
  Vector<double> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    grad[i] = detail::central(
        [&](double v) {
          probe[i] = v;
          return f(probe);
        },
        x[i], h, stencil, i);
    probe[i] = x[i];
  }
  return grad;
}

/// Same oracle, perturbing a parameter tensor in place. `f` must read
/// `param` on every call; the tensor is restored before returning.
inline Matrix<double> finite_diff_grad(Matrix<double>& param, const std::function<double()>& f, double h,
                                       Stencil stencil = Stencil::two_point) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Matrix<double> grad(param.rows(), param.cols());
  double* data = param.data();
  for (Index i = 0; i < param.size(); ++i) {
    const double saved = data[i];
    grad.data()[i] = detail::central(
        [&](double v) {
          data[i] = v;
          return f();
        },
        saved, h, stencil, i);
    data[i] = saved;
  }
  return grad;
}

/// Largest |a - n| / max(|a|, |n|, floor) over all entries. The floor keeps
/// entries whose true gradient is ~0 from dominating through rounding noise.
template <typename DA, typename DB>
double max_relative_error(const Eigen::MatrixBase<DA>& analytic, const Eigen::MatrixBase<DB>& numeric,
                          double floor = 1e-6) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ShapeError("relative error: shape " + shape_of(analytic) + " vs " + shape_of(numeric));
  }
  double worst = 0.0;
  for (Index r = 0; r < analytic.rows(); ++r) {
    for (Index c = 0; c < analytic.cols(); ++c) {
      const double a = static_cast<double>(analytic(r, c));
      const double n = static_cast<double>(numeric(r, c));
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

}  // namespace grurec
