// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference verification of every differentiable op and of the
// end-to-end transformer. Each case draws inputs from a seed, reduces the
// output with fixed random weights to a scalar, and compares the tape's
// gradient with central differences at sampled coordinates.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace agat {

struct GradcheckOptions {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 0;
  double threshold = 1e-4;
  double step = 1e-5;
  /// Coordinates probed per case and seed; 0 probes every coordinate.
  std::size_t samples = 256;
  /// Case whose analytic gradient is deliberately scaled (negative control).
  std::string corrupt;
};

struct GradcheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double threshold = 0.0;
  bool passed() const;
  std::string to_text() const;
};

/// Case names, in report order.
std::vector<std::string> gradcheck_cases();

/// |analytic − numeric| / max(|analytic|, |numeric|, 1e-4): relative error
/// with a floor so coordinates with vanishing gradient are judged absolutely.
double relative_error(double analytic, double numeric);

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace agat
