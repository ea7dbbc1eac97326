#pragma once

// JSON Lines dataset files, one sample per line:
//   {"id": "...", "label": "...", "subject": "...", "frames": [[x0, x1, ...], ...]}
// "subject" is optional. The feature dimension is taken from the first
// sample and enforced for the rest of the file.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "grurec/data/sample.hpp"

namespace grurec {

enum class LabelPolicy { required, optional };

namespace detail {

inline DataError line_error(std::size_t line, const std::string& what) {
  return DataError("line " + std::to_string(line) + ": " + what);
}

inline GestureSample sample_from_json(const nlohmann::json& j, std::size_t line, LabelPolicy labels) {
  if (!j.is_object()) throw line_error(line, "expected a JSON object");
  GestureSample s;
  if (auto it = j.find("id"); it != j.end() && it->is_string()) {
    s.id = it->get<std::string>();
  } else {
    throw line_error(line, "missing string field \"id\"");
  }
  if (auto it = j.find("label"); it != j.end() && it->is_string()) {
    s.label = it->get<std::string>();
  } else if (labels == LabelPolicy::required) {
    throw line_error(line, "missing string field \"label\"");
  }
  if (auto it = j.find("subject"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw line_error(line, "\"subject\" must be a string");
    s.subject = it->get<std::string>();
  }
  auto frames = j.find("frames");
  if (frames == j.end() || !frames->is_array()) throw line_error(line, "missing array field \"frames\"");
  if (frames->empty()) throw line_error(line, "\"frames\" is empty");
  const auto& first = (*frames)[0];
  if (!first.is_array() || first.empty()) throw line_error(line, "frame 0 is not a non-empty array");
  const auto n = static_cast<Index>(first.size());
  s.frames.resize(static_cast<Index>(frames->size()), n);
  for (std::size_t t = 0; t < frames->size(); ++t) {
    const auto& f = (*frames)[t];
    if (!f.is_array() || static_cast<Index>(f.size()) != n) {
      throw line_error(line, "frame " + std::to_string(t) + " has " + std::to_string(f.is_array() ? f.size() : 0) +
                                 " values, expected " + std::to_string(n));
    }
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!f[k].is_number()) {
        throw line_error(line, "frame " + std::to_string(t) + " value " + std::to_string(k) + " is not a number");
      }
      s.frames(static_cast<Index>(t), static_cast<Index>(k)) = f[k].get<double>();
    }
  }
  if (!s.frames.allFinite()) throw line_error(line, "non-finite value in frames");
  return s;
}

}  // namespace detail

inline nlohmann::json sample_to_json(const GestureSample& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (Index t = 0; t < s.frames.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < s.frames.cols(); ++k) row.push_back(s.frames(t, k));
    frames.push_back(std::move(row));
  }
  nlohmann::json j = {{"id", s.id}, {"label", s.label}};
  if (s.subject) j["subject"] = *s.subject;
  j["frames"] = std::move(frames);
  return j;
}

inline Dataset read_dataset(std::istream& in, LabelPolicy labels = LabelPolicy::required) {
  Dataset data;
  std::string text;
  std::size_t line = 0;
  Index dim = -1;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw detail::line_error(line, std::string("malformed JSON: ") + e.what());
    }
    GestureSample s = detail::sample_from_json(j, line, labels);
    if (dim < 0) {
      dim = s.dim();
    } else if (s.dim() != dim) {
      throw detail::line_error(line, "feature dimension " + std::to_string(s.dim()) + " differs from " +
                                         std::to_string(dim) + " declared by the first sample");
    }
    if (s.label.empty()) {
      data.samples.push_back(std::move(s));
    } else {
      data.add(std::move(s));
    }
  }
  if (data.empty()) throw DataError("dataset is empty");
  return data;
}

inline Dataset load_dataset(const std::string& path, LabelPolicy labels = LabelPolicy::required) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  try {
    return read_dataset(in, labels);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  for (const auto& s : data.samples) out << sample_to_json(s).dump() << '\n';
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  write_dataset(out, data);
}

}  // namespace grurec
