// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_ERRORS_HPP_
#define CHANPRUNE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace chanprune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Unknown layer id or key.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Network topology is inconsistent or does not match what was expected.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Invalid sparsity specification (e.g. keep-count larger than the layer).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Caller passed arguments outside an operation's domain.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or record file failed validation.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient. Carries the layer where it was detected.
class NumericError : public Error {
 public:
  NumericError(const std::string& layer_id, const std::string& what)
      : Error(what + " (layer " + layer_id + ")"), layer_id_(layer_id) {}

  const std::string& layer_id() const noexcept { return layer_id_; }

 private:
  std::string layer_id_;
};

}  // namespace chanprune

#endif  // CHANPRUNE_ERRORS_HPP_
