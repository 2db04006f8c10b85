// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Plain-text configuration: one `dotted.key = value` per line, `#` starts a
// comment. The same format is used for run configs, command-line `--set`
// overrides and the config block embedded in checkpoints.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "agat/attacks.hpp"
#include "agat/policy.hpp"
#include "agat/train.hpp"
#include "agat/vit.hpp"

namespace agat {

class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  /// Applies a `key=value` assignment.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void erase(const std::string& key) { entries_.erase(key); }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  /// Canonical form: keys sorted, `key = value` per line.
  std::string to_text() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Typed reads that remember which keys were used, so leftovers can be
/// reported as unknown.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValues& kv) : kv_(kv) {}

  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::optional<std::string> get_optional(const std::string& key);
  bool has(const std::string& key) const { return kv_.has(key); }

  /// Throws ConfigError naming the first key that was never read.
  void reject_unknown() const;

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

ModelConfig read_model_config(ConfigReader& in);
void write_model_config(KeyValues& out, const ModelConfig& cfg);

/// `prefix` is "attack" or "eval_attack"; a missing alpha falls back to the
/// Fast-AT (1.25ε) or PGD (2ε/steps) convention respectively.
AttackConfig read_attack_config(ConfigReader& in, const std::string& prefix);
void write_attack_config(KeyValues& out, const std::string& prefix, const AttackConfig& cfg);

/// `policy = none | random | agat` with `policy.rate` / `policy.keep`.
DropPolicy read_policy(ConfigReader& in);
void write_policy(KeyValues& out, const DropPolicy& policy);

TrainConfig read_train_config(ConfigReader& in);
void write_train_config(KeyValues& out, const TrainConfig& cfg);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace agat
