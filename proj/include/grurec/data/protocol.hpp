#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grurec/data/sample.hpp"
#include "grurec/rng.hpp"

namespace grurec {

/// One participant's share of the user-dependent protocol.
struct UserSplit {
  std::string subject;
  Dataset train;
  Dataset test;
};

/// Per participant (sorted by id): T random samples of every class go to
/// training and the rest to testing. Every (participant, class) pair needs
/// more than T samples.
inline std::vector<UserSplit> split_user_dependent(const Dataset& data, Index samples_per_class, std::uint64_t seed) {
  if (samples_per_class < 1) throw ConfigError("T must be at least 1");
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    if (!s.subject) throw ProtocolError("sample '" + s.id + "' has no subject id");
    by_subject[*s.subject].push_back(i);
  }
  if (by_subject.empty()) throw ProtocolError("no samples");

  const SeededRng root = SeededRng(seed).fork(RngPurpose::split);
  std::vector<UserSplit> splits;
  std::uint64_t subject_index = 0;
  for (const auto& [subject, indices] : by_subject) {
    UserSplit split{subject, data.like(), data.like()};
    std::vector<unsigned char> in_train(data.samples.size(), 0);
    for (Index c = 0; c < data.num_classes(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i : indices) {
        if (data.samples[i].class_index == c) members.push_back(i);
      }
      if (static_cast<Index>(members.size()) <= samples_per_class) {
        throw ProtocolError("participant '" + subject + "' has " + std::to_string(members.size()) +
                            " samples of class '" + data.classes[static_cast<std::size_t>(c)] + "', need more than " +
                            std::to_string(samples_per_class));
      }
      SeededRng rng = root.fork(subject_index, static_cast<std::uint64_t>(c));
      shuffle(members, rng);
      for (Index k = 0; k < samples_per_class; ++k) in_train[members[static_cast<std::size_t>(k)]] = 1;
    }
    for (std::size_t i : indices) {
      (in_train[i] ? split.train : split.test).samples.push_back(data.samples[i]);
    }
    splits.push_back(std::move(split));
    ++subject_index;
  }
  return splits;
}

/// Holds out round(fraction * count) samples of every class, seeded.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double fraction, SeededRng rng) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<unsigned char> held(data.samples.size(), 0);
  for (Index c = 0; c < data.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      if (data.samples[i].class_index == c) members.push_back(i);
    }
    SeededRng class_rng = rng.fork(static_cast<std::uint64_t>(c));
    shuffle(members, class_rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < take && k + 1 < members.size(); ++k) held[members[k]] = 1;
  }
  std::pair<Dataset, Dataset> out{data.like(), data.like()};
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    (held[i] ? out.second : out.first).samples.push_back(data.samples[i]);
  }
  return out;
}

}  // namespace grurec
