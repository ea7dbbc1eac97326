#pragma once

// Gated recurrent unit with the update convention
//
//   r_t = sigmoid(W_x^r x_t + b_x^r + W_h^r h_{t-1} + b_h^r)
//   u_t = sigmoid(W_x^u x_t + b_x^u + W_h^u h_{t-1} + b_h^u)
//   c_t = tanh(W_x^c x_t + b_x^c + r_t o (W_h^c h_{t-1} + b_h^c))
//   h_t = u_t o h_{t-1} + (1 - u_t) o c_t
//
// Sequence batches are time-major: step t of a batch of B sequences
// occupies rows [t*B, (t+1)*B) of a (steps*B) x features matrix.

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grurec/rng.hpp"
#include "grurec/tensor.hpp"

namespace grurec {

enum class Gate : Index { reset = 0, update = 1, candidate = 2 };

template <typename T>
struct GruParams {
  Matrix<T> w_x;  // 3H x N_in, row blocks ordered reset, update, candidate
  Matrix<T> w_h;  // 3H x H
  Matrix<T> b_x;  // 1 x 3H
  Matrix<T> b_h;  // 1 x 3H

  static GruParams zeros(Index input_dim, Index hidden_dim) {
    GruParams p;
    p.w_x = Matrix<T>::Zero(3 * hidden_dim, input_dim);
    p.w_h = Matrix<T>::Zero(3 * hidden_dim, hidden_dim);
    p.b_x = Matrix<T>::Zero(1, 3 * hidden_dim);
    p.b_h = Matrix<T>::Zero(1, 3 * hidden_dim);
    return p;
  }

  Index input_dim() const { return w_x.cols(); }
  Index hidden_dim() const { return w_h.cols(); }

  auto w_x_gate(Gate g) { return w_x.middleRows(static_cast<Index>(g) * hidden_dim(), hidden_dim()); }
  auto w_h_gate(Gate g) { return w_h.middleRows(static_cast<Index>(g) * hidden_dim(), hidden_dim()); }
  auto b_x_gate(Gate g) { return b_x.middleCols(static_cast<Index>(g) * hidden_dim(), hidden_dim()); }
  auto b_h_gate(Gate g) { return b_h.middleCols(static_cast<Index>(g) * hidden_dim(), hidden_dim()); }

  template <typename F>
  void for_each(F&& f) {
    f(std::string_view("w_x"), w_x);
    f(std::string_view("w_h"), w_h);
    f(std::string_view("b_x"), b_x);
    f(std::string_view("b_h"), b_h);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string_view("w_x"), w_x);
    f(std::string_view("w_h"), w_h);
    f(std::string_view("b_x"), b_x);
    f(std::string_view("b_h"), b_h);
  }

  void validate() const {
    const Index h = hidden_dim();
    if (h <= 0 || w_x.rows() != 3 * h || w_h.rows() != 3 * h || b_x.rows() != 1 ||
        b_x.cols() != 3 * h || b_h.rows() != 1 || b_h.cols() != 3 * h) {
      throw ShapeError("GRU parameters inconsistent: w_x " + shape_of(w_x) + ", w_h " + shape_of(w_h) +
                       ", b_x " + shape_of(b_x) + ", b_h " + shape_of(b_h));
    }
  }
};

/// Weights uniform in [-1/sqrt(H), 1/sqrt(H)], biases zero.
template <typename T>
void init_uniform(GruParams<T>& p, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim()));
  for (Matrix<T>* w : {&p.w_x, &p.w_h}) {
    for (Index i = 0; i < w->size(); ++i) w->data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  p.b_x.setZero();
  p.b_h.setZero();
}

/// Gate activations of one step, kept for the backward pass. All B x H.
template <typename T>
struct GruStepCache {
  Matrix<T> h_prev;
  Matrix<T> r;
  Matrix<T> u;
  Matrix<T> c;
  Matrix<T> hc;  // W_h^c h_{t-1} + b_h^c, before the reset gate
};

namespace detail {

// gx: B x 3H input projection (bias included). Writes h_out and the cache.
template <typename T>
void gru_step_forward(const Eigen::Ref<const Matrix<T>>& gx, const Matrix<T>& h_prev,
                      const GruParams<T>& p, GruStepCache<T>& cache, Matrix<T>& h_out) {
  const Index h = p.hidden_dim();
  Matrix<T> gh = h_prev * p.w_h.transpose();
  gh.rowwise() += p.b_h.row(0);

  cache.h_prev = h_prev;
  cache.r = (gx.leftCols(h) + gh.leftCols(h)).unaryExpr([](T v) { return sigmoid(v); });
  cache.u = (gx.middleCols(h, h) + gh.middleCols(h, h)).unaryExpr([](T v) { return sigmoid(v); });
  cache.hc = gh.rightCols(h);
  cache.c = (gx.rightCols(h).array() + cache.r.array() * cache.hc.array()).tanh().matrix();
  h_out = (cache.u.array() * h_prev.array() + (T(1) - cache.u.array()) * cache.c.array()).matrix();
}

// Reverse of gru_step_forward. Rows with active[i] == 0 pass dh straight
// through to dh_prev and contribute nothing else. Accumulates w_h/b_h
// gradients into grads and writes the B x 3H input-side pre-activation
// gradient into dgx.
template <typename T>
void gru_step_backward(const Matrix<T>& dh, const GruStepCache<T>& cache, const GruParams<T>& p,
                       std::span<const unsigned char> active, GruParams<T>& grads,
                       Eigen::Ref<Matrix<T>> dgx, Matrix<T>& dh_prev) {
  const Index h = p.hidden_dim();
  const Index b = dh.rows();
  const auto r = cache.r.array();
  const auto u = cache.u.array();
  const auto c = cache.c.array();

  const Matrix<T> dc = (dh.array() * (T(1) - u)).matrix();
  const Matrix<T> du = (dh.array() * (cache.h_prev.array() - c)).matrix();
  const Matrix<T> dac = (dc.array() * (T(1) - c * c)).matrix();
  const Matrix<T> dr = (dac.array() * cache.hc.array()).matrix();

  dgx.leftCols(h) = (dr.array() * r * (T(1) - r)).matrix();
  dgx.middleCols(h, h) = (du.array() * u * (T(1) - u)).matrix();
  dgx.rightCols(h) = dac;

  Matrix<T> dgh(b, 3 * h);
  dgh.leftCols(2 * h) = dgx.leftCols(2 * h);
  dgh.rightCols(h) = (dac.array() * r).matrix();

  bool all_active = true;
  for (Index i = 0; i < b; ++i) {
    if (!active.empty() && !active[static_cast<std::size_t>(i)]) {
      dgx.row(i).setZero();
      dgh.row(i).setZero();
      all_active = false;
    }
  }

  dh_prev = (dh.array() * u).matrix();
  dh_prev.noalias() += dgh * p.w_h;
  if (!all_active) {
    for (Index i = 0; i < b; ++i) {
      if (!active[static_cast<std::size_t>(i)]) dh_prev.row(i) = dh.row(i);
    }
  }
  grads.w_h.noalias() += dgh.transpose() * cache.h_prev;
  grads.b_h += dgh.colwise().sum();
}

}  // namespace detail

template <typename T>
struct GruCellCache {
  Matrix<T> x;
  GruStepCache<T> step;
};

/// One GRU step over a batch of rows: x is B x N_in, h_prev is B x H.
template <typename T>
Matrix<T> gru_cell_forward(const Matrix<T>& x, const Matrix<T>& h_prev, const GruParams<T>& p,
                           GruCellCache<T>* cache = nullptr) {
  p.validate();
  if (x.cols() != p.input_dim() || h_prev.cols() != p.hidden_dim() || x.rows() != h_prev.rows()) {
    throw ShapeError("gru cell: x " + shape_of(x) + ", h_prev " + shape_of(h_prev) + " vs params " +
                     shape_string(p.input_dim(), p.hidden_dim()));
  }
  Matrix<T> gx = x * p.w_x.transpose();
  gx.rowwise() += p.b_x.row(0);
  GruCellCache<T> local;
  GruCellCache<T>& c = cache ? *cache : local;
  Matrix<T> h;
  detail::gru_step_forward<T>(gx, h_prev, p, c.step, h);
  if (cache) c.x = x;
  debug_check_finite(h, "gru cell output");
  return h;
}

template <typename T>
struct GruCellGrads {
  Matrix<T> dx;
  Matrix<T> dh_prev;
};

/// Accumulates parameter gradients into `grads`; returns input gradients.
template <typename T>
GruCellGrads<T> gru_cell_backward(const GruParams<T>& p, const GruCellCache<T>& cache,
                                  const Matrix<T>& dh, GruParams<T>& grads) {
  if (cache.x.cols() != p.input_dim() || cache.step.h_prev.cols() != p.hidden_dim() ||
      dh.rows() != cache.x.rows() || dh.cols() != p.hidden_dim()) {
    throw ContractError("gru cell backward: cache or upstream gradient does not match the layer");
  }
  Matrix<T> dgx(dh.rows(), 3 * p.hidden_dim());
  GruCellGrads<T> out;
  detail::gru_step_backward<T>(dh, cache.step, p, {}, grads, dgx, out.dh_prev);
  grads.w_x.noalias() += dgx.transpose() * cache.x;
  grads.b_x += dgx.colwise().sum();
  out.dx = dgx * p.w_x;
  return out;
}

template <typename T>
struct GruLayerCache {
  Matrix<T> inputs;  // (steps*B) x N_in
  std::vector<Index> lengths;
  std::vector<GruStepCache<T>> steps;
};

template <typename T>
struct GruLayerOutput {
  Matrix<T> hidden_all;  // (steps*B) x H, hidden state after each step
  Matrix<T> h_last;      // B x H, state at each sequence's true final step
};

/// Runs a GRU over a padded batch from h_0 = 0. Past a sequence's length its
/// state is frozen, so padded steps neither change h_last nor receive gradient.
template <typename T>
GruLayerOutput<T> gru_layer_forward(const Matrix<T>& inputs, std::span<const Index> lengths,
                                    const GruParams<T>& p, GruLayerCache<T>* cache = nullptr) {
  p.validate();
  const Index b = static_cast<Index>(lengths.size());
  if (b == 0) throw ShapeError("gru layer: empty batch");
  if (inputs.cols() != p.input_dim() || inputs.rows() % b != 0) {
    throw ShapeError("gru layer: inputs " + shape_of(inputs) + " for batch " + std::to_string(b) +
                     " and input dim " + std::to_string(p.input_dim()));
  }
  const Index steps = inputs.rows() / b;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw EmptySequenceError("gru layer: sequence " + std::to_string(i) + " has length 0");
    if (lengths[i] > steps) {
      throw ShapeError("gru layer: length " + std::to_string(lengths[i]) + " exceeds padded steps " +
                       std::to_string(steps));
    }
  }

  const Index h = p.hidden_dim();
  Matrix<T> gx = inputs * p.w_x.transpose();
  gx.rowwise() += p.b_x.row(0);

  GruLayerOutput<T> out;
  out.hidden_all.resize(steps * b, h);
  Matrix<T> state = Matrix<T>::Zero(b, h);
  Matrix<T> next;
  GruStepCache<T> scratch;
  if (cache) {
    cache->inputs = inputs;
    cache->lengths.assign(lengths.begin(), lengths.end());
    cache->steps.assign(static_cast<std::size_t>(steps), {});
  }
  for (Index t = 0; t < steps; ++t) {
    GruStepCache<T>& sc = cache ? cache->steps[static_cast<std::size_t>(t)] : scratch;
    detail::gru_step_forward<T>(gx.middleRows(t * b, b), state, p, sc, next);
    for (Index i = 0; i < b; ++i) {
      if (t < lengths[static_cast<std::size_t>(i)]) state.row(i) = next.row(i);
    }
    out.hidden_all.middleRows(t * b, b) = state;
  }
  out.h_last = std::move(state);
  debug_check_finite(out.hidden_all, "gru layer output");
  return out;
}

/// Backprop through time. Either upstream gradient may be empty (treated as
/// zero). Accumulates into `grads` and returns d inputs, (steps*B) x N_in.
template <typename T>
Matrix<T> gru_layer_backward(const GruParams<T>& p, const GruLayerCache<T>& cache,
                             const Matrix<T>& d_hidden_all, const Matrix<T>& d_h_last,
                             GruParams<T>& grads) {
  const Index b = static_cast<Index>(cache.lengths.size());
  const Index h = p.hidden_dim();
  if (b == 0 || cache.inputs.cols() != p.input_dim() ||
      cache.inputs.rows() != static_cast<Index>(cache.steps.size()) * b) {
    throw ContractError("gru layer backward: cache does not match the layer");
  }
  const Index steps = static_cast<Index>(cache.steps.size());
  if (d_hidden_all.size() != 0 && (d_hidden_all.rows() != steps * b || d_hidden_all.cols() != h)) {
    throw ContractError("gru layer backward: upstream gradient " + shape_of(d_hidden_all) +
                        " does not match outputs " + shape_string(steps * b, h));
  }
  if (d_h_last.size() != 0 && (d_h_last.rows() != b || d_h_last.cols() != h)) {
    throw ContractError("gru layer backward: h_last gradient " + shape_of(d_h_last) + " does not match");
  }

  Matrix<T> dgx_all(steps * b, 3 * h);
  Matrix<T> carry = d_h_last.size() != 0 ? d_h_last : Matrix<T>::Zero(b, h);
  Matrix<T> dh;
  Matrix<T> dh_prev;
  std::vector<unsigned char> active(static_cast<std::size_t>(b));
  for (Index t = steps - 1; t >= 0; --t) {
    for (Index i = 0; i < b; ++i) {
      active[static_cast<std::size_t>(i)] = t < cache.lengths[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    dh = carry;
    if (d_hidden_all.size() != 0) dh += d_hidden_all.middleRows(t * b, b);
    detail::gru_step_backward<T>(dh, cache.steps[static_cast<std::size_t>(t)], p, active, grads,
                                 dgx_all.middleRows(t * b, b), dh_prev);
    carry.swap(dh_prev);
  }
  grads.w_x.noalias() += dgx_all.transpose() * cache.inputs;
  grads.b_x += dgx_all.colwise().sum();
  return dgx_all * p.w_x;
}

}  // namespace grurec
