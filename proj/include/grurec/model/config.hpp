#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "grurec/tensor.hpp"

namespace grurec {

/// Architecture of the recognizer: stacked GRU encoder, optional attention,
/// and one or two batch-norm/dropout/FC classifier stages.
struct ModelConfig {
  Index input_dim = 0;
  Index num_classes = 0;
  std::vector<Index> encoder_widths{512, 512, 256, 256, 128};
  bool use_attention = true;
  int fc_count = 2;
  Index fc_width = 256;
  double dropout_rate = 0.5;

  /// Default encoder widths for a stack depth: 5 -> [512, 512, 256, 256, 128],
  /// 3 -> [512, 256, 128]. Both end at 128.
  static std::vector<Index> widths_for_stacks(int stacks) {
    if (stacks == 5) return {512, 512, 256, 256, 128};
    if (stacks == 3) return {512, 256, 128};
    throw ConfigError("no default widths for " + std::to_string(stacks) + " stacked layers (use 3 or 5, or give widths)");
  }

  Index hidden_dim() const { return encoder_widths.empty() ? 0 : encoder_widths.back(); }

  /// Width of the classifier input: 2H with attention ([c; c']), else H.
  Index feature_dim() const { return use_attention ? 2 * hidden_dim() : hidden_dim(); }

  void validate() const {
    if (input_dim < 1) throw ConfigError("input dimension must be positive");
    if (num_classes < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(num_classes));
    if (encoder_widths.empty()) throw ConfigError("encoder needs at least one layer");
    for (Index w : encoder_widths) {
      if (w < 1) throw ConfigError("encoder widths must be positive");
    }
    if (fc_count != 1 && fc_count != 2) throw ConfigError("fc count must be 1 or 2, got " + std::to_string(fc_count));
    if (fc_count == 2 && fc_width < 1) throw ConfigError("fc width must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_dim", c.input_dim},       {"num_classes", c.num_classes},
                     {"encoder_widths", c.encoder_widths}, {"use_attention", c.use_attention},
                     {"fc_count", c.fc_count},         {"fc_width", c.fc_width},
                     {"dropout_rate", c.dropout_rate}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("input_dim").get_to(c.input_dim);
  j.at("num_classes").get_to(c.num_classes);
  j.at("encoder_widths").get_to(c.encoder_widths);
  j.at("use_attention").get_to(c.use_attention);
  j.at("fc_count").get_to(c.fc_count);
  j.at("fc_width").get_to(c.fc_width);
  j.at("dropout_rate").get_to(c.dropout_rate);
}

/// Closed-form count of trainable scalars:
///   sum over encoder layers of 3 (H N_in + H^2 + 2H)
///   + with attention: H^2 (W_c) + 3 (H H + H^2 + 2H) (attention GRU)
///   + per classifier stage: 2 D_in (batch norm) + D_out D_in + D_out.
inline Index parameter_count(const ModelConfig& c) {
  c.validate();
  auto gru = [](Index in, Index h) { return 3 * (h * in + h * h + 2 * h); };
  Index total = 0;
  Index in = c.input_dim;
  for (Index h : c.encoder_widths) {
    total += gru(in, h);
    in = h;
  }
  const Index h = c.hidden_dim();
  if (c.use_attention) total += h * h + gru(h, h);
  Index d = c.feature_dim();
  if (c.fc_count == 2) {
    total += 2 * d + c.fc_width * d + c.fc_width;
    d = c.fc_width;
  }
  total += 2 * d + c.num_classes * d + c.num_classes;
  return total;
}

}  // namespace grurec
