// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace agat {

/// Base class for every error the library raises. `kind()` is a short
/// machine-readable tag used by the CLI as the error prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index", what) {}
};

/// A documented precondition of an API was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

/// Malformed or missing dataset input.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

}  // namespace agat
