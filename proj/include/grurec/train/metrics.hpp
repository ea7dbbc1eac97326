#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grurec/tensor.hpp"

namespace grurec {

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> per_class;  // recall per true class; NaN for absent classes
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::int64_t total = 0;
};

/// Accuracy, per-class accuracy and confusion from predicted/true indices.
inline Metrics metrics_from_predictions(std::span<const Index> predicted, std::span<const Index> truth,
                                        Index num_classes) {
  if (predicted.size() != truth.size()) throw ShapeError("metrics: prediction and label counts differ");
  Metrics m;
  m.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
      throw DataError("metrics: class index out of range");
    }
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::int64_t correct = 0;
  m.per_class.resize(static_cast<std::size_t>(num_classes));
  for (std::size_t c = 0; c < m.confusion.size(); ++c) {
    std::int64_t row = 0;
    for (auto v : m.confusion[c]) row += v;
    correct += m.confusion[c][c];
    m.total += row;
    m.per_class[c] = row > 0 ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row)
                             : std::numeric_limits<double>::quiet_NaN();
  }
  m.accuracy = m.total > 0 ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

inline nlohmann::json metrics_to_json(const Metrics& m, const std::vector<std::string>& classes = {}) {
  nlohmann::json per_class = nlohmann::json::array();
  for (double v : m.per_class) per_class.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  nlohmann::json j = {{"accuracy", m.accuracy},
                      {"per_class", per_class},
                      {"confusion", m.confusion},
                      {"loss", std::isnan(m.loss) ? nlohmann::json(nullptr) : nlohmann::json(m.loss)},
                      {"count", m.total}};
  if (!classes.empty()) j["classes"] = classes;
  return j;
}

}  // namespace grurec
