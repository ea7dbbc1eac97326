#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "grurec/data/sample.hpp"

namespace grurec {

/// Per-feature z-score statistics, pooled over every training frame.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  Index dim() const { return static_cast<Index>(mean.size()); }
  bool empty() const { return mean.empty(); }
};

inline constexpr double kMinStd = 1e-8;

inline NormStats zscore_fit(std::span<const GestureSample> samples) {
  if (samples.empty()) throw DataError("z-score fit: no training samples");
  const Index n = samples.front().dim();
  Vector<double> sum = Vector<double>::Zero(n);
  Index frames = 0;
  for (const auto& s : samples) {
    if (s.dim() != n) throw DataError("z-score fit: inconsistent feature dimension in sample '" + s.id + "'");
    sum += s.frames.colwise().sum().transpose();
    frames += s.length();
  }
  if (frames == 0) throw DataError("z-score fit: no training frames");
  const Vector<double> mean = sum / static_cast<double>(frames);
  Vector<double> sq = Vector<double>::Zero(n);
  for (const auto& s : samples) {
    sq += (s.frames.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  NormStats stats;
  stats.mean.assign(mean.data(), mean.data() + n);
  stats.std.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) stats.std[static_cast<std::size_t>(k)] = std::sqrt(sq[k] / static_cast<double>(frames));
  return stats;
}

/// (x - mean) / max(std, 1e-8) per feature; constant features map to 0.
inline GestureSample zscore_apply(GestureSample s, const NormStats& stats) {
  if (s.dim() != stats.dim()) {
    throw DataError("sample '" + s.id + "' has feature dimension " + std::to_string(s.dim()) + ", expected " +
                    std::to_string(stats.dim()));
  }
  for (Index k = 0; k < s.dim(); ++k) {
    const double m = stats.mean[static_cast<std::size_t>(k)];
    const double d = stats.std[static_cast<std::size_t>(k)];
    if (d < kMinStd) {
      // constant in training: mean may differ from the value by rounding
      s.frames.col(k).setZero();
    } else {
      s.frames.col(k) = ((s.frames.col(k).array() - m) / d).matrix();
    }
  }
  return s;
}

inline Dataset zscore_apply(Dataset data, const NormStats& stats) {
  for (auto& s : data.samples) s = zscore_apply(std::move(s), stats);
  return data;
}

}  // namespace grurec
