#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grurec/data/protocol.hpp"
#include "grurec/train/trainer.hpp"

namespace grurec {

struct ParticipantResult {
  std::string subject;
  Index train_count = 0;
  Index test_count = 0;
  double accuracy = 0.0;
};

struct ProtocolReport {
  Index samples_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<ParticipantResult> participants;
  double mean_accuracy = 0.0;
};

inline nlohmann::json to_json(const ProtocolReport& r) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : r.participants) {
    parts.push_back({{"subject", p.subject}, {"train", p.train_count}, {"test", p.test_count}, {"accuracy", p.accuracy}});
  }
  return {{"T", r.samples_per_class},
          {"seed", r.seed},
          {"participants", parts},
          {"participant_count", r.participants.size()},
          {"mean_accuracy", r.mean_accuracy}};
}

/// Splits per participant, trains a fresh model on each participant's T
/// samples per class and tests on the rest. No validation hold-out is taken
/// from the T samples; early stopping watches the clean training set.
template <typename T>
ProtocolReport run_user_dependent(const Dataset& data, Index samples_per_class, ModelConfig model_cfg,
                                  TrainConfig train_cfg,
                                  const std::function<void(const ParticipantResult&)>& on_participant = {}) {
  const std::vector<UserSplit> splits = split_user_dependent(data, samples_per_class, train_cfg.seed);
  model_cfg.input_dim = data.dim();
  model_cfg.num_classes = data.num_classes();
  train_cfg.val_fraction = 0.0;

  ProtocolReport report;
  report.samples_per_class = samples_per_class;
  report.seed = train_cfg.seed;
  double sum = 0.0;
  for (const auto& split : splits) {
    TrainResult<T> trained = train(build_model<T>(model_cfg, train_cfg.seed), split.train, nullptr, train_cfg);
    const Metrics m = evaluate(trained.model, split.test);
    ParticipantResult pr{split.subject, static_cast<Index>(split.train.samples.size()),
                         static_cast<Index>(split.test.samples.size()), m.accuracy};
    if (on_participant) on_participant(pr);
    sum += m.accuracy;
    report.participants.push_back(std::move(pr));
  }
  report.mean_accuracy = sum / static_cast<double>(report.participants.size());
  return report;
}

}  // namespace grurec
