#pragma once

// Training-time augmentation: random per-axis scaling, per-feature
// translation, optional yaw rotation of declared 3-D points, and gesture
// path stochastic resampling (GPSR).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "grurec/data/sample.hpp"
#include "grurec/rng.hpp"

namespace grurec {

struct GpsrSpec {
  bool enabled = true;
  double n_factor = 0.1;   // n drawn in [(1 - f) L, (1 + f) L]
  double r_factor = 0.05;  // r drawn in [0, f L]
};

struct AugmentSpec {
  double scale_factor = 0.3;      // per-axis scale in [1 - f, 1 + f]
  double translate_factor = 1.0;  // per-feature offset in [-f, f]
  double rotate_factor = 0.0;     // yaw in [-f, f] radians; needs point_layout
  GpsrSpec gpsr;
  bool point_layout = false;      // features are concatenated (x, y, z) points

  /// All augmentation off.
  static AugmentSpec none() {
    AugmentSpec s;
    s.scale_factor = 0.0;
    s.translate_factor = 0.0;
    s.gpsr.enabled = false;
    return s;
  }

  void validate(Index dim) const {
    if (scale_factor < 0 || translate_factor < 0 || rotate_factor < 0 || gpsr.n_factor < 0 || gpsr.r_factor < 0) {
      throw ConfigError("augmentation factors must be non-negative");
    }
    if (scale_factor > 1.0) throw ConfigError("scale factor above 1 can flip the sign of an axis");
    if (point_layout && dim % 3 != 0) {
      throw ConfigError("point layout declared but feature dimension " + std::to_string(dim) +
                        " is not a multiple of 3");
    }
    if (rotate_factor > 0 && !point_layout) throw ConfigError("rotation requires a declared 3-D point layout");
  }
};

/// Number of augmentation calls made by this process. Evaluation code is
/// expected never to move it.
inline std::atomic<std::uint64_t>& augmentation_counter() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

/// One draw of the affine parameters.
struct AffineDraw {
  std::vector<double> scale;   // 3 entries with a point layout, else one per feature
  std::vector<double> offset;  // one per feature
  double yaw = 0.0;
};

inline AffineDraw draw_affine(const AugmentSpec& spec, Index dim, SeededRng& rng) {
  spec.validate(dim);
  AffineDraw d;
  const Index axes = spec.point_layout ? 3 : dim;
  d.scale.resize(static_cast<std::size_t>(axes));
  for (auto& s : d.scale) s = rng.uniform(1.0 - spec.scale_factor, 1.0 + spec.scale_factor);
  d.offset.resize(static_cast<std::size_t>(dim));
  for (auto& o : d.offset) o = rng.uniform(-spec.translate_factor, spec.translate_factor);
  if (spec.rotate_factor > 0) d.yaw = rng.uniform(-spec.rotate_factor, spec.rotate_factor);
  return d;
}

/// Rotates every (x, y, z) triple about the z ("up") axis by `yaw`.
inline void rotate_points_yaw(Frames& frames, double yaw) {
  if (frames.cols() % 3 != 0) throw AugmentationError("yaw rotation needs a multiple of 3 features");
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  for (Index t = 0; t < frames.rows(); ++t) {
    for (Index k = 0; k < frames.cols(); k += 3) {
      const double x = frames(t, k);
      const double y = frames(t, k + 1);
      frames(t, k) = c * x - s * y;
      frames(t, k + 1) = s * x + c * y;
    }
  }
}

/// Scale, then rotate, then translate.
inline GestureSample apply_affine(GestureSample s, const AffineDraw& d, bool point_layout) {
  const Index n = s.dim();
  if (static_cast<Index>(d.offset.size()) != n) throw AugmentationError("affine draw does not match sample dimension");
  for (Index k = 0; k < n; ++k) {
    const std::size_t axis = static_cast<std::size_t>(point_layout ? k % 3 : k);
    s.frames.col(k) *= d.scale.at(axis);
  }
  if (d.yaw != 0.0) rotate_points_yaw(s.frames, d.yaw);
  for (Index k = 0; k < n; ++k) s.frames.col(k).array() += d.offset[static_cast<std::size_t>(k)];
  return s;
}

inline GestureSample augment_affine(GestureSample s, const AugmentSpec& spec, SeededRng& rng) {
  ++augmentation_counter();
  const AffineDraw d = draw_affine(spec, s.dim(), rng);
  return apply_affine(std::move(s), d, spec.point_layout);
}

/// Places intervals.size() + 1 points along the cumulative arc length of
/// the trajectory, spaced by the normalized interval fractions and linearly
/// interpolated, then drops the points at `removed` (indices into the
/// resampled sequence, never 0). Deterministic core of gpsr().
inline GestureSample gpsr_resample(GestureSample s, std::span<const double> intervals, std::span<const Index> removed) {
  ++augmentation_counter();
  const Index len = s.length();
  if (len < 2) throw AugmentationError("GPSR needs a sequence of at least 2 frames");
  if (intervals.empty()) throw AugmentationError("GPSR needs at least one interval");
  const Index points = static_cast<Index>(intervals.size()) + 1;
  double total_fraction = 0.0;
  for (double f : intervals) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw AugmentationError("GPSR interval fractions must be non-negative");
    total_fraction += f;
  }
  if (!(total_fraction > 0.0)) throw AugmentationError("GPSR interval fractions sum to zero");

  std::vector<double> cumulative(static_cast<std::size_t>(len), 0.0);
  for (Index t = 1; t < len; ++t) {
    cumulative[static_cast<std::size_t>(t)] =
        cumulative[static_cast<std::size_t>(t - 1)] + (s.frames.row(t) - s.frames.row(t - 1)).norm();
  }
  const double path_length = cumulative.back();

  Frames resampled(points, s.dim());
  double position = 0.0;
  Index segment = 0;
  for (Index j = 0; j < points; ++j) {
    if (j > 0) position += intervals[static_cast<std::size_t>(j - 1)] / total_fraction;
    const double target = j == points - 1 ? path_length : std::min(position, 1.0) * path_length;
    if (path_length <= 0.0) {
      resampled.row(j) = s.frames.row(0);
      continue;
    }
    while (segment < len - 2 && cumulative[static_cast<std::size_t>(segment + 1)] < target) ++segment;
    const double start = cumulative[static_cast<std::size_t>(segment)];
    const double span = cumulative[static_cast<std::size_t>(segment + 1)] - start;
    const double alpha = span > 0.0 ? std::clamp((target - start) / span, 0.0, 1.0) : 0.0;
    resampled.row(j) = (1.0 - alpha) * s.frames.row(segment) + alpha * s.frames.row(segment + 1);
  }

  std::vector<unsigned char> drop(static_cast<std::size_t>(points), 0);
  for (Index k : removed) {
    if (k <= 0 || k >= points) throw AugmentationError("GPSR cannot remove point " + std::to_string(k));
    if (drop[static_cast<std::size_t>(k)]) throw AugmentationError("GPSR removal index repeated");
    drop[static_cast<std::size_t>(k)] = 1;
  }
  Frames kept(points - static_cast<Index>(removed.size()), s.dim());
  Index row = 0;
  for (Index j = 0; j < points; ++j) {
    if (!drop[static_cast<std::size_t>(j)]) kept.row(row++) = resampled.row(j);
  }
  s.frames = std::move(kept);
  return s;
}

/// Resample the path to n + r points at random arc-length intervals, then
/// remove r of them at random (never the first). Output has n frames.
inline GestureSample gpsr(GestureSample s, Index n, Index r, SeededRng& rng) {
  if (n < 2) throw AugmentationError("GPSR resample count must be at least 2, got " + std::to_string(n));
  if (r < 0 || r >= n) throw AugmentationError("GPSR remove count must be in [0, n), got " + std::to_string(r));
  if (s.length() < 2) throw AugmentationError("GPSR needs a sequence of at least 2 frames");
  const Index points = n + r;
  std::vector<double> intervals(static_cast<std::size_t>(points - 1));
  for (auto& f : intervals) f = rng.uniform();

  std::vector<Index> candidates(static_cast<std::size_t>(points - 1));
  for (Index k = 0; k < points - 1; ++k) candidates[static_cast<std::size_t>(k)] = k + 1;
  for (Index k = 0; k < r; ++k) {
    const auto pick = static_cast<std::size_t>(k) + rng.uniform_index(candidates.size() - static_cast<std::size_t>(k));
    std::swap(candidates[static_cast<std::size_t>(k)], candidates[pick]);
  }
  candidates.resize(static_cast<std::size_t>(r));
  return gpsr_resample(std::move(s), intervals, candidates);
}

/// The full training augmentation: GPSR (when enabled and the sample has at
/// least 2 frames) followed by the affine transform. The GPSR counts are
/// drawn from the sample's own length.
inline GestureSample augment_sample(GestureSample s, const AugmentSpec& spec, SeededRng& rng) {
  if (spec.gpsr.enabled && s.length() >= 2) {
    const double len = static_cast<double>(s.length());
    const auto n_lo = std::max<std::int64_t>(2, std::llround((1.0 - spec.gpsr.n_factor) * len));
    const auto n_hi = std::max<std::int64_t>(n_lo, std::llround((1.0 + spec.gpsr.n_factor) * len));
    const auto n = rng.uniform_int(n_lo, n_hi);
    const auto r_hi = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(spec.gpsr.r_factor * len)));
    const auto r = rng.uniform_int(0, std::max<std::int64_t>(0, r_hi));
    s = gpsr(std::move(s), n, r, rng);
  }
  return augment_affine(std::move(s), spec, rng);
}

}  // namespace grurec
