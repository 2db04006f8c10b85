// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/flops.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "agat/error.hpp"

namespace agat {

std::uint64_t msa_flops(std::uint64_t p, std::uint64_t d) {
  return 4 * p * d * d + 2 * p * p * d + p * d;
}

std::uint64_t mlp_flops(std::uint64_t p, std::uint64_t d) { return 8 * p * d * d + p * d; }

FlopsReport model_flops(const ModelConfig& cfg, const DropPolicy& policy) {
  cfg.validate();
  const DropSchedule schedule = drop_schedule(cfg.num_patches(), cfg.depth, policy);
  FlopsReport r;
  const std::uint64_t d = cfg.dim;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    LayerFlops lf;
    lf.seq_len = schedule.input_len[l];
    lf.kept = schedule.kept[l];
    lf.msa = msa_flops(lf.seq_len, d);
    lf.mlp = mlp_flops(lf.seq_len, d);
    r.total += lf.msa + lf.mlp;
    r.layers.push_back(lf);
  }
  r.baseline_total = cfg.depth * block_flops(cfg.seq_len(), d);
  r.savings = 1.0 - static_cast<double>(r.total) / static_cast<double>(r.baseline_total);
  return r;
}

std::uint64_t trace_flops(const ModelConfig& cfg, const ForwardTrace& trace) {
  const std::uint64_t batch = trace.logits.dim(0);
  std::uint64_t total = 0;
  for (const auto& b : trace.blocks) total += block_flops(b.input_len, cfg.dim);
  return total * batch;
}

std::string to_text(const FlopsReport& report, const ModelConfig& cfg, const DropPolicy& policy) {
  std::ostringstream os;
  os << "model: dim=" << cfg.dim << " heads=" << cfg.heads << " depth=" << cfg.depth
     << " seq_len=" << cfg.seq_len() << "\n";
  os << "policy: " << policy.describe() << "\n";
  os << std::left << std::setw(7) << "block" << std::setw(9) << "seq_len" << std::setw(7) << "kept"
     << std::setw(16) << "msa" << std::setw(16) << "mlp" << "\n";
  for (std::size_t l = 0; l < report.layers.size(); ++l) {
    const auto& lf = report.layers[l];
    os << std::left << std::setw(7) << l + 1 << std::setw(9) << lf.seq_len << std::setw(7)
       << lf.kept << std::setw(16) << lf.msa << std::setw(16) << lf.mlp << "\n";
  }
  os << "total: " << report.total << " (" << std::fixed << std::setprecision(3)
     << static_cast<double>(report.total) / 1e9 << " G)\n";
  os << "baseline: " << report.baseline_total << " ("
     << static_cast<double>(report.baseline_total) / 1e9 << " G)\n";
  os << "savings: " << std::setprecision(4) << report.savings << "\n";
  return os.str();
}

CalibratedPolicy calibrate_policy(const ModelConfig& cfg, DropPolicy::Kind kind, double target) {
  if (!(target >= 0.0 && target < 1.0)) throw ConfigError("reduction target must lie in [0, 1)");
  if (target == 0.0 || kind == DropPolicy::Kind::none) return {DropPolicy::none(), 0.0};

  // Savings grows as `x` grows: x is the drop rate, or 1 − keep.
  auto make = [kind](double x) {
    return kind == DropPolicy::Kind::random_input ? DropPolicy::random_input(x)
                                                  : DropPolicy::attention_guided(1.0 - x);
  };
  auto savings_at = [&](double x) { return model_flops(cfg, make(x)).savings; };

  double lo = 0.0;  // savings(lo) < target
  double hi = std::nextafter(1.0, 0.0);
  if (savings_at(hi) < target)
    throw ConfigError("reduction target " + std::to_string(target) + " is not reachable");
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (savings_at(mid) >= target ? hi : lo) = mid;
  }
  const double s_lo = savings_at(lo), s_hi = savings_at(hi);
  const bool pick_hi = std::abs(s_hi - target) <= std::abs(target - s_lo);
  const double achieved = pick_hi ? s_hi : s_lo;

  // Move to the middle of the flat step holding `achieved`, then to a short
  // decimal inside it, so the parameter is not sitting on a rounding edge.
  double a = pick_hi ? hi : 0.0, b = pick_hi ? 1.0 : lo;
  if (pick_hi) {
    double edge_lo = hi, edge_hi = std::nextafter(1.0, 0.0);
    if (savings_at(edge_hi) != achieved) {
      for (int it = 0; it < 200 && edge_hi - edge_lo > 1e-12; ++it) {
        const double mid = 0.5 * (edge_lo + edge_hi);
        (savings_at(mid) == achieved ? edge_lo : edge_hi) = mid;
      }
    }
    a = hi;
    b = edge_lo;
  } else {
    double edge_lo = 0.0, edge_hi = lo;
    for (int it = 0; it < 200 && edge_hi - edge_lo > 1e-12; ++it) {
      const double mid = 0.5 * (edge_lo + edge_hi);
      (savings_at(mid) == achieved ? edge_hi : edge_lo) = mid;
    }
    a = edge_hi;
    b = lo;
  }
  double x = 0.5 * (a + b);
  const double rounded = std::round(x * 1e4) / 1e4;
  if (rounded > 0.0 && rounded < 1.0 && savings_at(rounded) == achieved) x = rounded;
  return {make(x), achieved};
}

}  // namespace agat
