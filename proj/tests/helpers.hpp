#pragma once

#include <string>
#include <vector>

#include "grurec/grurec.hpp"

namespace grurec::testing {

inline Matrix<double> random_matrix(Index rows, Index cols, SeededRng& rng, double scale = 1.0) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

// Triple-loop reference product.
inline Matrix<double> naive_matmul(const Matrix<double>& a, const Matrix<double>& b) {
  Matrix<double> c = Matrix<double>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline GestureSample make_sample(const std::string& id, const std::string& label, Index length, Index dim,
                                 SeededRng& rng) {
  GestureSample s;
  s.id = id;
  s.label = label;
  s.frames = random_matrix(length, dim, rng);
  return s;
}

inline ModelConfig small_config(Index input_dim, Index classes) {
  ModelConfig c;
  c.input_dim = input_dim;
  c.num_classes = classes;
  c.encoder_widths = {16, 12};
  c.fc_width = 10;
  return c;
}

}  // namespace grurec::testing
