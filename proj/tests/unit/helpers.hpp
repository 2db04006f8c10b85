// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "agat/autodiff.hpp"
#include "agat/random.hpp"
#include "agat/vit.hpp"

namespace agat::test {

inline ModelConfig tiny_model() {
  ModelConfig c;
  c.image_size = 8;
  c.patch_size = 2;
  c.channels = 1;
  c.dim = 16;
  c.heads = 2;
  c.depth = 3;
  c.num_classes = 3;
  return c;
}

inline ad::Tensor random_images(std::size_t batch, const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(batch * c.channels * c.image_size * c.image_size);
  for (double& x : v) x = uniform01(rng);
  return ad::Tensor::constant({batch, c.channels, c.image_size, c.image_size}, std::move(v));
}

inline std::vector<double> to_vector(const ad::Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("agat-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path source_dir() {
  const char* env = std::getenv("AGAT_SOURCE_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::current_path();
}

}  // namespace agat::test
