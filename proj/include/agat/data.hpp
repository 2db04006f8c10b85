// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agat/autodiff.hpp"

namespace agat {

/// Images in [0, 1], stored [n, C, H, W] row-major, with integer labels.
struct Dataset {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> images;
  std::vector<std::size_t> labels;
  std::string split;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const { return channels * height * width; }
  std::size_t num_classes() const;

  /// Gathers the listed examples into a [k, C, H, W] tensor plus labels.
  ad::Tensor images_at(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labels_at(std::span<const std::size_t> indices) const;
  /// The first `n` examples (all when n is 0 or too large).
  Dataset head(std::size_t n) const;
};

/// IDX image + label files (magic 0x00000803 / 0x00000801, big-endian dims,
/// raw bytes). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// CIFAR-10 binary batches: records of 1 label byte followed by 3×32×32
/// channel-major pixel bytes.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths);

/// Class-conditional Gaussian blobs rendered at class-specific positions,
/// clamped to [0, 1]. With zero noise every image of a class is identical.
Dataset synthetic_blobs(std::size_t n, std::size_t classes, std::size_t image_size,
                        std::uint64_t seed, double noise = 0.1, std::size_t channels = 1);

/// A seeded permutation of [0, n) cut into consecutive batches; the last
/// batch may be short. The permutation depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);

/// CRC-32 of a file's bytes, for run manifests.
std::uint32_t file_crc32(const std::filesystem::path& path);

}  // namespace agat
