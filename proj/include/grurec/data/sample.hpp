#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grurec/tensor.hpp"

namespace grurec {

/// L x N, one row per time step.
using Frames = Matrix<double>;

struct GestureSample {
  std::string id;
  std::string label;
  std::optional<std::string> subject;
  Frames frames;
  Index class_index = -1;  // position of `label` in the owning dataset's class list

  Index length() const { return frames.rows(); }
  Index dim() const { return frames.cols(); }
};

inline void validate_sample(const GestureSample& s) {
  if (s.frames.rows() < 1) throw DataError("sample '" + s.id + "' has no frames");
  if (s.frames.cols() < 1) throw DataError("sample '" + s.id + "' has zero-width frames");
  if (!s.frames.allFinite()) throw DataError("sample '" + s.id + "' contains non-finite values");
}

/// Samples plus the class vocabulary, in first-seen order.
struct Dataset {
  std::vector<std::string> classes;
  std::vector<GestureSample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  Index dim() const { return samples.empty() ? 0 : samples.front().dim(); }
  Index num_classes() const { return static_cast<Index>(classes.size()); }

  /// Index of `label`, registering it if new.
  Index intern(const std::string& label) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it != classes.end()) return static_cast<Index>(it - classes.begin());
    classes.push_back(label);
    return static_cast<Index>(classes.size() - 1);
  }

  /// Appends a sample, assigning its class index.
  void add(GestureSample s) {
    s.class_index = intern(s.label);
    samples.push_back(std::move(s));
  }

  /// Empty dataset sharing this one's class vocabulary.
  Dataset like() const { return Dataset{classes, {}}; }
};

/// Rewrites class indices against a fixed vocabulary (e.g. a trained model's).
/// Unknown labels are a data error.
inline Dataset with_classes(Dataset data, const std::vector<std::string>& classes) {
  std::unordered_map<std::string, Index> lookup;
  for (std::size_t i = 0; i < classes.size(); ++i) lookup.emplace(classes[i], static_cast<Index>(i));
  for (auto& s : data.samples) {
    auto it = lookup.find(s.label);
    if (it == lookup.end()) throw DataError("label '" + s.label + "' of sample '" + s.id + "' is unknown to the model");
    s.class_index = it->second;
  }
  data.classes = classes;
  return data;
}

/// A zero-padded mini-batch. `data` is time-major: the frame of sequence i
/// at step t is row t*B + i. Entries at t >= lengths[i] are exactly zero.
template <typename T>
struct Batch {
  Matrix<T> data;  // (steps*B) x N
  std::vector<Index> lengths;
  std::vector<Index> labels;

  Index size() const { return static_cast<Index>(lengths.size()); }
  Index steps() const { return lengths.empty() ? 0 : data.rows() / size(); }
  Index dim() const { return data.cols(); }

  /// Element (i, n, t) of the B x N x steps view.
  T value(Index i, Index n, Index t) const { return data(t * size() + i, n); }
};

/// Pads to the longest sequence, plus `extra_steps` further zero steps.
template <typename T>
Batch<T> pad_batch(std::span<const GestureSample* const> samples, Index extra_steps = 0) {
  if (samples.empty()) throw DataError("pad_batch: empty sample list");
  const Index b = static_cast<Index>(samples.size());
  const Index n = samples.front()->dim();
  Index steps = 0;
  for (const GestureSample* s : samples) {
    if (s->dim() != n) {
      throw DataError("pad_batch: sample '" + s->id + "' has dim " + std::to_string(s->dim()) + ", expected " +
                      std::to_string(n));
    }
    if (s->length() < 1) throw DataError("pad_batch: sample '" + s->id + "' has no frames");
    steps = std::max(steps, s->length());
  }
  steps += extra_steps;

  Batch<T> batch;
  batch.data = Matrix<T>::Zero(steps * b, n);
  batch.lengths.reserve(samples.size());
  batch.labels.reserve(samples.size());
  for (Index i = 0; i < b; ++i) {
    const GestureSample& s = *samples[static_cast<std::size_t>(i)];
    for (Index t = 0; t < s.length(); ++t) batch.data.row(t * b + i) = s.frames.row(t).template cast<T>();
    batch.lengths.push_back(s.length());
    batch.labels.push_back(s.class_index);
  }
  return batch;
}

template <typename T>
Batch<T> pad_batch(std::span<const GestureSample> samples, Index extra_steps = 0) {
  std::vector<const GestureSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return pad_batch<T>(std::span<const GestureSample* const>(ptrs), extra_steps);
}

/// Inverse of pad_batch: each sequence truncated to its length.
template <typename T>
std::vector<Matrix<T>> unpad(const Batch<T>& batch) {
  std::vector<Matrix<T>> out;
  const Index b = batch.size();
  for (Index i = 0; i < b; ++i) {
    Matrix<T> seq(batch.lengths[static_cast<std::size_t>(i)], batch.dim());
    for (Index t = 0; t < seq.rows(); ++t) seq.row(t) = batch.data.row(t * b + i);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace grurec
