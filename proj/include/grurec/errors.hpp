#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace grurec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Batch normalization in train mode needs at least two rows.
class BatchTooSmallError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A sequence of length zero reached a recurrent layer.
class EmptySequenceError : public DataError {
 public:
  using DataError::DataError;
};

/// The user-dependent split cannot be formed from the given data.
class ProtocolError : public DataError {
 public:
  using DataError::DataError;
};

/// An augmentation was called with arguments outside its domain.
class AugmentationError : public DataError {
 public:
  using DataError::DataError;
};

/// A backward pass was given a cache that does not match the layer.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The finite-difference oracle evaluated to a non-finite value.
class OracleError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Training loss became non-finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : NumericError(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Checkpoint read failures. Subclasses are distinct so callers can tell
/// a foreign file from an old one from a short one.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  CheckpointVersionError(std::uint32_t found, std::uint32_t supported)
      : CheckpointError("unsupported checkpoint version " + std::to_string(found) +
                        " (this build reads version " + std::to_string(supported) + ")"),
        found_(found),
        supported_(supported) {}
  std::uint32_t found() const noexcept { return found_; }
  std::uint32_t supported() const noexcept { return supported_; }

 private:
  std::uint32_t found_;
  std::uint32_t supported_;
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace grurec
