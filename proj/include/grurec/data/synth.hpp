#pragma once

// Synthetic gesture sets for self-contained training and testing. Each
// class is a smooth prototype trajectory (per-dimension mixture of two
// sinusoids plus a linear drift); samples add a random length, monotone
// time warp, constant offset, and Gaussian noise.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "grurec/data/sample.hpp"
#include "grurec/rng.hpp"

namespace grurec {

struct SynthOptions {
  Index min_length = 30;
  Index max_length = 80;
  double noise = 0.05;
  double offset = 0.2;
  double warp = 0.25;  // time exponent drawn in [1/(1+w), 1+w]
};

namespace detail {

struct ClassPrototype {
  struct Component {
    double amplitude, frequency, phase;
  };
  std::vector<Component> slow, fast;
  std::vector<double> drift;
};

inline ClassPrototype make_prototype(Index dim, SeededRng rng) {
  ClassPrototype p;
  for (Index d = 0; d < dim; ++d) {
    p.slow.push_back({rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * std::numbers::pi)});
    p.fast.push_back({rng.uniform(0.2, 0.8), rng.uniform(1.5, 3.0), rng.uniform(0.0, 2.0 * std::numbers::pi)});
    p.drift.push_back(rng.uniform(-1.0, 1.0));
  }
  return p;
}

struct SubjectStyle {
  std::vector<double> gain, offset;
};

inline SubjectStyle make_style(Index dim, SeededRng rng, bool neutral) {
  SubjectStyle s;
  for (Index d = 0; d < dim; ++d) {
    s.gain.push_back(neutral ? 1.0 : rng.uniform(0.85, 1.15));
    s.offset.push_back(neutral ? 0.0 : rng.uniform(-0.3, 0.3));
  }
  return s;
}

inline Frames render(const ClassPrototype& p, const SubjectStyle& style, const SynthOptions& opt, SeededRng& rng) {
  const Index dim = static_cast<Index>(p.drift.size());
  const Index len = rng.uniform_int(opt.min_length, opt.max_length);
  const double exponent = std::exp(rng.uniform(-std::log1p(opt.warp), std::log1p(opt.warp)));
  std::vector<double> offset(static_cast<std::size_t>(dim));
  for (auto& o : offset) o = rng.uniform(-opt.offset, opt.offset);

  Frames f(len, dim);
  for (Index t = 0; t < len; ++t) {
    const double u = len > 1 ? static_cast<double>(t) / static_cast<double>(len - 1) : 0.0;
    const double tau = std::pow(u, exponent);
    for (Index d = 0; d < dim; ++d) {
      const auto k = static_cast<std::size_t>(d);
      const auto& a = p.slow[k];
      const auto& b = p.fast[k];
      const double clean = a.amplitude * std::sin(2.0 * std::numbers::pi * a.frequency * tau + a.phase) +
                           b.amplitude * std::sin(2.0 * std::numbers::pi * b.frequency * tau + b.phase) +
                           p.drift[k] * tau;
      f(t, d) = style.gain[k] * clean + style.offset[k] + offset[k] + opt.noise * rng.normal();
    }
  }
  return f;
}

inline void check_synth_args(Index num_classes, Index dim) {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (dim < 2) throw ConfigError("synthetic data needs dimension at least 2");
}

inline std::string class_name(Index c) { return "class_" + std::to_string(c); }

}  // namespace detail

/// Train and test sets with the requested per-class counts, deterministic in rng.
inline std::pair<Dataset, Dataset> synth_generate(Index num_classes, Index train_per_class, Index test_per_class,
                                                  Index dim, const SeededRng& rng, const SynthOptions& opt = {}) {
  detail::check_synth_args(num_classes, dim);
  if (train_per_class < 0 || test_per_class < 0) throw ConfigError("sample counts must be non-negative");
  const SeededRng root = rng.fork(RngPurpose::synth);
  std::pair<Dataset, Dataset> out;
  for (Index c = 0; c < num_classes; ++c) {
    out.first.intern(detail::class_name(c));
    out.second.intern(detail::class_name(c));
  }
  const detail::SubjectStyle neutral = detail::make_style(dim, root, true);
  for (Index c = 0; c < num_classes; ++c) {
    const auto proto = detail::make_prototype(dim, root.fork(1, static_cast<std::uint64_t>(c)));
    for (Index k = 0; k < train_per_class + test_per_class; ++k) {
      SeededRng srng = root.fork(2, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k));
      const bool train = k < train_per_class;
      GestureSample s;
      s.id = detail::class_name(c) + (train ? "_train_" : "_test_") + std::to_string(train ? k : k - train_per_class);
      s.label = detail::class_name(c);
      s.frames = detail::render(proto, neutral, opt, srng);
      (train ? out.first : out.second).add(std::move(s));
    }
  }
  return out;
}

/// A multi-participant set: every subject performs every class
/// `per_subject_class` times with a subject-specific gain and offset.
inline Dataset synth_generate_subjects(Index num_subjects, Index num_classes, Index per_subject_class, Index dim,
                                       const SeededRng& rng, const SynthOptions& opt = {}) {
  detail::check_synth_args(num_classes, dim);
  if (num_subjects < 1 || per_subject_class < 1) throw ConfigError("need at least one subject and one sample");
  const SeededRng root = rng.fork(RngPurpose::synth);
  Dataset out;
  for (Index c = 0; c < num_classes; ++c) out.intern(detail::class_name(c));
  std::vector<detail::ClassPrototype> protos;
  for (Index c = 0; c < num_classes; ++c) {
    protos.push_back(detail::make_prototype(dim, root.fork(1, static_cast<std::uint64_t>(c))));
  }
  for (Index subj = 0; subj < num_subjects; ++subj) {
    const auto style = detail::make_style(dim, root.fork(3, static_cast<std::uint64_t>(subj)), false);
    for (Index c = 0; c < num_classes; ++c) {
      for (Index k = 0; k < per_subject_class; ++k) {
        SeededRng srng = root.fork(4, static_cast<std::uint64_t>(subj), static_cast<std::uint64_t>(c),
                                   static_cast<std::uint64_t>(k));
        GestureSample s;
        s.id = "subject_" + std::to_string(subj) + "_" + detail::class_name(c) + "_" + std::to_string(k);
        s.label = detail::class_name(c);
        s.subject = "subject_" + std::to_string(subj);
        s.frames = detail::render(protos[static_cast<std::size_t>(c)], style, opt, srng);
        out.add(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace grurec
