#pragma once

#include <stdexcept>
#include <string>

namespace freezenet {

// Base for every error the library raises. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes that do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain argument (rate outside [0,1), non-positive std, empty batch...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An API used out of order, e.g. a backward pass on a stale activation cache.
class UsageError : public Error {
 public:
  using Error::Error;
};

// GraSP scores are undefined when the gradient vanishes identically.
class DegenerateGradientError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Dataset ingestion and splitting failures.
class DataError : public Error {
 public:
  using Error::Error;
};

// Checkpoint decoding failures. `section()` names the part of the file that
// failed to parse so diagnostics can point at it.
class CodecError : public Error {
 public:
  CodecError(std::string section, const std::string& what)
      : Error(section + ": " + what), section_(std::move(section)) {}
  const std::string& section() const noexcept { return section_; }

 private:
  std::string section_;
};

// Frozen weights disagree with what the stored seed regenerates.
class IntegrityError : public CodecError {
 public:
  using CodecError::CodecError;
};

// Non-finite loss during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace freezenet
