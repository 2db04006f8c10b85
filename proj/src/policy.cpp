// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agat/error.hpp"

namespace agat {

DropPolicy DropPolicy::random_input(double rate) {
  DropPolicy p;
  p.kind = Kind::random_input;
  p.rate = rate;
  p.validate();
  return p;
}

DropPolicy DropPolicy::attention_guided(double keep) {
  DropPolicy p;
  p.kind = Kind::attention_guided;
  p.keep = keep;
  p.validate();
  return p;
}

void DropPolicy::validate() const {
  if (kind == Kind::random_input && !(rate >= 0.0 && rate < 1.0))
    throw ConfigError("random drop rate must lie in [0, 1), got " + std::to_string(rate));
  if (kind == Kind::attention_guided && !(keep > 0.0 && keep <= 1.0))
    throw ConfigError("keep fraction must lie in (0, 1], got " + std::to_string(keep));
}

std::string DropPolicy::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::none: os << "none"; break;
    case Kind::random_input: os << "random(rate=" << rate << ")"; break;
    case Kind::attention_guided: os << "agat(keep=" << keep << ")"; break;
  }
  return os.str();
}

std::vector<double> influence_scores(std::span<const double> attention, std::size_t heads,
                                     std::size_t p) {
  if (heads == 0 || attention.size() != heads * p * p)
    throw DimensionError("influence_scores: " + std::to_string(attention.size()) +
                         " values for " + std::to_string(heads) + " heads of " +
                         std::to_string(p) + "×" + std::to_string(p));
  std::vector<double> a(p, 0.0);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t q = 0; q < p; ++q) {
      const double* row = attention.data() + (h * p + q) * p;
      for (std::size_t j = 0; j < p; ++j) a[j] += row[j];
    }
  const double inv_h = 1.0 / static_cast<double>(heads);
  for (double& x : a) x *= inv_h;
  return a;
}

std::vector<std::size_t> select_kept(std::span<const double> scores, std::size_t k) {
  const std::size_t p = scores.size();
  if (k < 2 || k > p)
    throw ContractError("select_kept: k=" + std::to_string(k) + " outside [2, " +
                        std::to_string(p) + "]");
  std::vector<std::size_t> order(p - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  std::vector<std::size_t> kept{0};
  kept.insert(kept.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1));
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::size_t layer_keep_count(std::size_t incoming_len, double keep_fraction) {
  if (incoming_len < 2) throw ContractError("layer_keep_count: need at least two rows");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw ContractError("layer_keep_count: keep fraction outside (0, 1]");
  const double patches = static_cast<double>(incoming_len - 1);
  const auto kept = static_cast<std::size_t>(std::llround(keep_fraction * patches));
  return std::min(incoming_len, 1 + std::max<std::size_t>(1, kept));
}

std::size_t random_kept_patches(std::size_t num_patches, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("random drop rate outside [0, 1)");
  const auto kept = static_cast<std::size_t>(std::ceil((1.0 - rate) * static_cast<double>(num_patches)));
  return std::clamp<std::size_t>(kept, 1, num_patches);
}

std::vector<std::size_t> random_input_drop(std::size_t num_patches, double rate, Rng& rng) {
  const std::size_t kept = random_kept_patches(num_patches, rate);
  std::vector<std::size_t> rows(num_patches);
  std::iota(rows.begin(), rows.end(), std::size_t{1});
  if (kept < num_patches) {
    // partial Fisher-Yates: the first `kept` slots become a uniform sample
    for (std::size_t i = 0; i < kept; ++i) {
      const std::size_t j = i + uniform_index(rng, num_patches - i);
      std::swap(rows[i], rows[j]);
    }
    rows.resize(kept);
    std::sort(rows.begin(), rows.end());
  }
  rows.insert(rows.begin(), 0);
  return rows;
}

DropSchedule drop_schedule(std::size_t num_patches, std::size_t depth, const DropPolicy& policy) {
  policy.validate();
  DropSchedule s;
  std::size_t len = num_patches + 1;
  if (policy.kind == DropPolicy::Kind::random_input)
    len = 1 + random_kept_patches(num_patches, policy.rate);
  for (std::size_t l = 0; l < depth; ++l) {
    s.input_len.push_back(len);
    if (policy.kind == DropPolicy::Kind::attention_guided) len = layer_keep_count(len, policy.keep);
    s.kept.push_back(len);
  }
  return s;
}

}  // namespace agat
