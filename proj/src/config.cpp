// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "agat/error.hpp"

namespace agat {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-' || c == '/';
    if (!ok) return false;
  }
  return true;
}

std::pair<std::string, std::string> split_assignment(std::string_view line,
                                                     const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(where + ": expected key = value, got '" + std::string(line) + "'");
  }
  const auto key = trim(line.substr(0, eq));
  const auto value = trim(line.substr(eq + 1));
  if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + std::string(key) + "'");
  return {std::string(key), std::string(value)};
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& text) {
  T out{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

KeyValues KeyValues::parse(std::string_view text, std::string_view origin) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = std::string(origin) + ":" + std::to_string(line_no);
    auto [key, value] = split_assignment(line, where);
    if (kv.has(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    kv.entries_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValues::apply_override(std::string_view assignment) {
  auto [key, value] = split_assignment(trim(assignment), "--set");
  entries_[key] = value;
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::optional<std::string> ConfigReader::get_optional(const std::string& key) {
  used_.insert(key);
  return kv_.find(key);
}

std::size_t ConfigReader::get_size(const std::string& key, std::size_t fallback) {
  const auto v = get_optional(key);
  return v ? parse_unsigned<std::size_t>(key, *v) : fallback;
}

std::uint64_t ConfigReader::get_u64(const std::string& key, std::uint64_t fallback) {
  const auto v = get_optional(key);
  return v ? parse_unsigned<std::uint64_t>(key, *v) : fallback;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  const auto v = get_optional(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto* end = v->data() + v->size();
  const auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end || v->empty()) {
    throw ConfigError(key + ": expected a number, got '" + *v + "'");
  }
  return out;
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  const auto v = get_optional(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + *v + "'");
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  const auto v = get_optional(key);
  return v ? *v : fallback;
}

void ConfigReader::reject_unknown() const {
  for (const auto& [k, v] : kv_.entries()) {
    if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

ModelConfig read_model_config(ConfigReader& in) {
  ModelConfig d;
  ModelConfig c;
  c.image_size = in.get_size("model.image_size", d.image_size);
  c.patch_size = in.get_size("model.patch_size", d.patch_size);
  c.channels = in.get_size("model.channels", d.channels);
  c.dim = in.get_size("model.dim", d.dim);
  c.heads = in.get_size("model.heads", d.heads);
  c.depth = in.get_size("model.depth", d.depth);
  c.mlp_ratio = in.get_size("model.mlp_ratio", d.mlp_ratio);
  c.num_classes = in.get_size("model.num_classes", d.num_classes);
  c.use_attn_bias = in.get_bool("model.attn_bias", d.use_attn_bias);
  c.attn_dropout_rate = in.get_double("model.attn_dropout", d.attn_dropout_rate);
  c.validate();
  return c;
}

void write_model_config(KeyValues& out, const ModelConfig& c) {
  out.set("model.image_size", std::to_string(c.image_size));
  out.set("model.patch_size", std::to_string(c.patch_size));
  out.set("model.channels", std::to_string(c.channels));
  out.set("model.dim", std::to_string(c.dim));
  out.set("model.heads", std::to_string(c.heads));
  out.set("model.depth", std::to_string(c.depth));
  out.set("model.mlp_ratio", std::to_string(c.mlp_ratio));
  out.set("model.num_classes", std::to_string(c.num_classes));
  out.set("model.attn_bias", c.use_attn_bias ? "true" : "false");
  out.set("model.attn_dropout", format_double(c.attn_dropout_rate));
}

AttackConfig read_attack_config(ConfigReader& in, const std::string& prefix) {
  const bool is_eval = prefix == "eval_attack";
  const double eps = in.get_double(prefix + ".epsilon", 0.1);
  const std::size_t steps = in.get_size(prefix + ".steps", is_eval ? 10 : 1);
  AttackConfig c = is_eval ? AttackConfig::pgd(eps, steps) : AttackConfig::fast_at(eps);
  c.steps = steps;
  c.alpha = in.get_double(prefix + ".alpha", c.alpha);
  c.random_init = in.get_bool(prefix + ".random_init", c.random_init);
  c.pixel_min = in.get_double(prefix + ".pixel_min", c.pixel_min);
  c.pixel_max = in.get_double(prefix + ".pixel_max", c.pixel_max);
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
  return c;
}

void write_attack_config(KeyValues& out, const std::string& prefix, const AttackConfig& c) {
  out.set(prefix + ".epsilon", format_double(c.epsilon));
  out.set(prefix + ".alpha", format_double(c.alpha));
  out.set(prefix + ".steps", std::to_string(c.steps));
  out.set(prefix + ".random_init", c.random_init ? "true" : "false");
  out.set(prefix + ".pixel_min", format_double(c.pixel_min));
  out.set(prefix + ".pixel_max", format_double(c.pixel_max));
}

DropPolicy read_policy(ConfigReader& in) {
  const auto kind = in.get_string("policy", "none");
  const double rate = in.get_double("policy.rate", 0.0);
  const double keep = in.get_double("policy.keep", 1.0);
  DropPolicy p;
  try {
    if (kind == "none") {
      p = DropPolicy::none();
    } else if (kind == "random") {
      p = DropPolicy::random_input(rate);
    } else if (kind == "agat") {
      p = DropPolicy::attention_guided(keep);
    } else {
      throw ConfigError("policy: expected none, random or agat, got '" + kind + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  return p;
}

void write_policy(KeyValues& out, const DropPolicy& p) {
  switch (p.kind) {
    case DropPolicy::Kind::none:
      out.set("policy", "none");
      break;
    case DropPolicy::Kind::random_input:
      out.set("policy", "random");
      out.set("policy.rate", format_double(p.rate));
      break;
    case DropPolicy::Kind::attention_guided:
      out.set("policy", "agat");
      out.set("policy.keep", format_double(p.keep));
      break;
  }
}

TrainConfig read_train_config(ConfigReader& in) {
  TrainConfig d;
  TrainConfig c;
  c.epochs = in.get_size("train.epochs", d.epochs);
  c.warmup_epochs = in.get_size("train.warmup_epochs", d.warmup_epochs);
  c.base_lr = in.get_double("train.base_lr", d.base_lr);
  c.weight_decay = in.get_double("train.weight_decay", d.weight_decay);
  c.beta1 = in.get_double("train.beta1", d.beta1);
  c.beta2 = in.get_double("train.beta2", d.beta2);
  c.adam_eps = in.get_double("train.adam_eps", d.adam_eps);
  c.batch_size = in.get_size("train.batch_size", d.batch_size);
  c.seed = in.get_u64("train.seed", d.seed);
  c.eval_every = in.get_size("train.eval_every", d.eval_every);
  c.eval_samples = in.get_size("train.eval_samples", d.eval_samples);
  c.wall_clock = in.get_bool("train.wall_clock", d.wall_clock);
  c.attack = read_attack_config(in, "attack");
  c.eval_attack = read_attack_config(in, "eval_attack");
  c.policy = read_policy(in);
  c.validate();
  return c;
}

void write_train_config(KeyValues& out, const TrainConfig& c) {
  out.set("train.epochs", std::to_string(c.epochs));
  out.set("train.warmup_epochs", std::to_string(c.warmup_epochs));
  out.set("train.base_lr", format_double(c.base_lr));
  out.set("train.weight_decay", format_double(c.weight_decay));
  out.set("train.beta1", format_double(c.beta1));
  out.set("train.beta2", format_double(c.beta2));
  out.set("train.adam_eps", format_double(c.adam_eps));
  out.set("train.batch_size", std::to_string(c.batch_size));
  out.set("train.seed", std::to_string(c.seed));
  out.set("train.eval_every", std::to_string(c.eval_every));
  out.set("train.eval_samples", std::to_string(c.eval_samples));
  out.set("train.wall_clock", c.wall_clock ? "true" : "false");
  write_attack_config(out, "attack", c.attack);
  write_attack_config(out, "eval_attack", c.eval_attack);
  write_policy(out, c.policy);
}

}  // namespace agat
