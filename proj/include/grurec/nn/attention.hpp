#pragma once

// Global attention over encoder states, queried by the final hidden state.
//
//   s_t = h_last^T W_c h_t            (t < length, -inf elsewhere)
//   c   = sum_t softmax(s)_t h_t
//   c'  = GRU_attn(input = c, hidden = h_last)
//   out = [c ; c']

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grurec/nn/gru.hpp"

namespace grurec {

template <typename T>
struct AttentionParams {
  Matrix<T> w_c;     // H x H
  GruParams<T> gru;  // input H, hidden H

  static AttentionParams zeros(Index hidden_dim) {
    AttentionParams p;
    p.w_c = Matrix<T>::Zero(hidden_dim, hidden_dim);
    p.gru = GruParams<T>::zeros(hidden_dim, hidden_dim);
    return p;
  }

  Index hidden_dim() const { return w_c.rows(); }

  template <typename F>
  void for_each(F&& f) {
    f(std::string_view("w_c"), w_c);
    gru.for_each([&](std::string_view name, Matrix<T>& m) { f(std::string("gru.").append(name), m); });
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string_view("w_c"), w_c);
    gru.for_each([&](std::string_view name, const Matrix<T>& m) { f(std::string("gru.").append(name), m); });
  }

  void validate() const {
    gru.validate();
    if (w_c.rows() != w_c.cols() || gru.input_dim() != w_c.rows() || gru.hidden_dim() != w_c.rows()) {
      throw ShapeError("attention parameters inconsistent: w_c " + shape_of(w_c) + ", gru " +
                       shape_string(gru.input_dim(), gru.hidden_dim()));
    }
  }
};

template <typename T>
void init_uniform(AttentionParams<T>& p, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim()));
  for (Index i = 0; i < p.w_c.size(); ++i) p.w_c.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  init_uniform(p.gru, rng);
}

template <typename T>
struct AttentionCache {
  Matrix<T> hidden_all;  // (steps*B) x H
  Matrix<T> h_last;      // B x H
  std::vector<Index> lengths;
  Matrix<T> query;    // B x H, h_last W_c
  Matrix<T> weights;  // B x steps, exactly zero at padded steps
  Matrix<T> context;  // B x H
  GruCellCache<T> gru;
};

template <typename T>
Matrix<T> attention_forward(const Matrix<T>& hidden_all, const Matrix<T>& h_last, std::span<const Index> lengths,
                            const AttentionParams<T>& p, AttentionCache<T>* cache = nullptr) {
  p.validate();
  const Index b = static_cast<Index>(lengths.size());
  const Index h = p.hidden_dim();
  if (b == 0 || h_last.rows() != b || h_last.cols() != h || hidden_all.cols() != h || hidden_all.rows() % b != 0) {
    throw ShapeError("attention: hidden states " + shape_of(hidden_all) + ", h_last " + shape_of(h_last) +
                     " for batch " + std::to_string(b) + " and width " + std::to_string(h));
  }
  const Index steps = hidden_all.rows() / b;

  Matrix<T> query = h_last * p.w_c;
  Matrix<T> weights = Matrix<T>::Zero(b, steps);
  Matrix<T> context = Matrix<T>::Zero(b, h);
  for (Index i = 0; i < b; ++i) {
    const Index len = lengths[static_cast<std::size_t>(i)];
    if (len < 1 || len > steps) throw ShapeError("attention: invalid length " + std::to_string(len));
    Vector<T> scores(len);
    for (Index t = 0; t < len; ++t) scores[t] = query.row(i).dot(hidden_all.row(t * b + i));
    const Vector<T> w = softmax(scores);
    for (Index t = 0; t < len; ++t) {
      weights(i, t) = w[t];
      context.row(i) += w[t] * hidden_all.row(t * b + i);
    }
  }

  Matrix<T> out(b, 2 * h);
  out.leftCols(h) = context;
  out.rightCols(h) = gru_cell_forward(context, h_last, p.gru, cache ? &cache->gru : nullptr);
  if (cache) {
    cache->hidden_all = hidden_all;
    cache->h_last = h_last;
    cache->lengths.assign(lengths.begin(), lengths.end());
    cache->query = std::move(query);
    cache->weights = std::move(weights);
    cache->context = std::move(context);
  }
  return out;
}

template <typename T>
struct AttentionInputGrads {
  Matrix<T> d_hidden_all;
  Matrix<T> d_h_last;
};

template <typename T>
AttentionInputGrads<T> attention_backward(const AttentionParams<T>& p, const AttentionCache<T>& cache,
                                          const Matrix<T>& d_out, AttentionParams<T>& grads) {
  const Index b = static_cast<Index>(cache.lengths.size());
  const Index h = p.hidden_dim();
  if (b == 0 || cache.h_last.rows() != b || cache.h_last.cols() != h || cache.hidden_all.cols() != h ||
      d_out.rows() != b || d_out.cols() != 2 * h) {
    throw ContractError("attention backward: cache or upstream gradient does not match the layer");
  }
  const Index steps = cache.hidden_all.rows() / b;

  const GruCellGrads<T> cell = gru_cell_backward(p.gru, cache.gru, Matrix<T>(d_out.rightCols(h)), grads.gru);
  const Matrix<T> dc = d_out.leftCols(h) + cell.dx;

  AttentionInputGrads<T> out;
  out.d_hidden_all = Matrix<T>::Zero(steps * b, h);
  Matrix<T> dq = Matrix<T>::Zero(b, h);
  for (Index i = 0; i < b; ++i) {
    const Index len = cache.lengths[static_cast<std::size_t>(i)];
    Vector<T> dw(len);
    for (Index t = 0; t < len; ++t) dw[t] = dc.row(i).dot(cache.hidden_all.row(t * b + i));
    T expected = T(0);
    for (Index t = 0; t < len; ++t) expected += cache.weights(i, t) * dw[t];
    for (Index t = 0; t < len; ++t) {
      const T w = cache.weights(i, t);
      const T ds = w * (dw[t] - expected);
      out.d_hidden_all.row(t * b + i) += w * dc.row(i) + ds * cache.query.row(i);
      dq.row(i) += ds * cache.hidden_all.row(t * b + i);
    }
  }
  grads.w_c.noalias() += cache.h_last.transpose() * dq;
  out.d_h_last = cell.dh_prev;
  out.d_h_last.noalias() += dq * p.w_c.transpose();
  return out;
}

}  // namespace grurec
