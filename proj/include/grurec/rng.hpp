#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace grurec {

/// Tags mixed into the stream id so independent consumers never share draws.
enum class RngPurpose : std::uint64_t {
  init = 1,
  shuffle,
  augment,
  dropout,
  split,
  synth,
  gradcheck,
  test,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

}  // namespace detail

/// Counter-based generator keyed by (seed, stream).
///
/// Draw k is a SplitMix64 finalizer applied to key + k * golden, so the
/// sequence depends only on the key. Streams for a particular purpose are
/// obtained with fork(), e.g. rng.fork(RngPurpose::augment, epoch, sample),
/// which makes results independent of iteration order.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), key_(detail::combine(detail::mix64(seed), stream)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Standard normal via Box-Muller; consumes two draws.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// A fresh generator on a stream derived from this one and the given keys.
  SeededRng fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0, std::uint64_t d = 0) const {
    std::uint64_t s = detail::combine(stream_, a);
    s = detail::combine(s, b);
    s = detail::combine(s, c);
    s = detail::combine(s, d);
    return SeededRng(seed_, s);
  }

  SeededRng fork(RngPurpose purpose, std::uint64_t b = 0, std::uint64_t c = 0, std::uint64_t d = 0) const {
    return fork(static_cast<std::uint64_t>(purpose), b, c, d);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// In-place Fisher-Yates shuffle driven by SeededRng.
template <typename Container>
void shuffle(Container& items, SeededRng& rng) {
  using std::swap;
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    swap(items[i - 1], items[j]);
  }
}

}  // namespace grurec
