#pragma once

// Checkpoint layout (all integers little-endian):
//
//   "DGRU" | u32 format version | u64 header length | UTF-8 JSON header
//   | float32 tensor payloads, concatenated in manifest order
//
// The header holds the model config, class names, z-score statistics and a
// manifest of {name, shape, offset} entries; offsets are bytes from the
// start of the payload.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grurec/model/model.hpp"

namespace grurec {

inline constexpr std::array<char, 4> kCheckpointMagic{'D', 'G', 'R', 'U'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CheckpointTruncatedError(std::string("checkpoint truncated while reading ") + what);
  }
}

template <typename T, typename F>
void for_each_persisted(Model<T>& m, F&& f) {
  m.params.for_each_trainable(f);
  m.params.for_each_buffer(f);
}

template <typename T, typename F>
void for_each_persisted(const Model<T>& m, F&& f) {
  m.params.for_each_trainable(f);
  m.params.for_each_buffer(f);
}

}  // namespace detail

template <typename T>
void write_checkpoint(std::ostream& out, const Model<T>& model) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  detail::for_each_persisted(model, [&](std::string_view name, const Matrix<T>& m) {
    manifest.push_back({{"name", std::string(name)}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(float);
  });
  nlohmann::json header = {
      {"config", model.config},
      {"classes", model.classes},
      {"norm_stats", {{"mean", model.norm.mean}, {"std", model.norm.std}}},
      {"tensors", std::move(manifest)},
      {"payload_bytes", offset},
  };
  const std::string text = header.dump();

  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::for_each_persisted(model, [&](std::string_view, const Matrix<T>& m) {
    for (Index i = 0; i < m.size(); ++i) {
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
    }
  });
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, model);
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

template <typename T = float>
Model<T> read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  detail::read_exact(in, magic.data(), magic.size(), "magic");
  if (magic != kCheckpointMagic) throw CheckpointMagicError("not a checkpoint: bad magic bytes");
  std::array<unsigned char, 12> fixed{};
  detail::read_exact(in, reinterpret_cast<char*>(fixed.data()), fixed.size(), "header prefix");
  const auto version = detail::get_le<std::uint32_t>(fixed.data());
  if (version != kCheckpointVersion) throw CheckpointVersionError(version, kCheckpointVersion);
  const auto header_len = detail::get_le<std::uint64_t>(fixed.data() + 4);
  if (header_len > (std::uint64_t{1} << 32)) throw CheckpointError("implausible checkpoint header length");
  std::string text(static_cast<std::size_t>(header_len), '\0');
  detail::read_exact(in, text.data(), text.size(), "JSON header");

  nlohmann::json header;
  Model<T> model;
  std::map<std::string, std::pair<std::vector<Index>, std::uint64_t>> entries;
  std::uint64_t payload_bytes = 0;
  try {
    header = nlohmann::json::parse(text);
    model.config = header.at("config").get<ModelConfig>();
    model.classes = header.at("classes").get<std::vector<std::string>>();
    model.norm.mean = header.at("norm_stats").at("mean").get<std::vector<double>>();
    model.norm.std = header.at("norm_stats").at("std").get<std::vector<double>>();
    for (const auto& e : header.at("tensors")) {
      entries[e.at("name").get<std::string>()] = {e.at("shape").get<std::vector<Index>>(), e.at("offset").get<std::uint64_t>()};
    }
    payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  try {
    model.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  model.params = ModelParams<T>::shaped(model.config);

  std::vector<unsigned char> payload(static_cast<std::size_t>(payload_bytes));
  detail::read_exact(in, reinterpret_cast<char*>(payload.data()), payload.size(), "tensor payload");

  detail::for_each_persisted(model, [&](std::string_view name, Matrix<T>& m) {
    auto it = entries.find(std::string(name));
    if (it == entries.end()) throw CheckpointError("checkpoint lacks tensor '" + std::string(name) + "'");
    const auto& [shape, offset] = it->second;
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) {
      throw CheckpointError("tensor '" + std::string(name) + "' has the wrong shape");
    }
    const std::uint64_t bytes = static_cast<std::uint64_t>(m.size()) * sizeof(float);
    if (offset + bytes > payload.size()) throw CheckpointTruncatedError("tensor '" + std::string(name) + "' runs past the payload");
    const unsigned char* p = payload.data() + offset;
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<T>(std::bit_cast<float>(detail::get_le<std::uint32_t>(p + 4 * i)));
    }
  });
  return model;
}

template <typename T = float>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint<T>(in);
}

}  // namespace grurec
