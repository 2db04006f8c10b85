// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "agat/error.hpp"
#include "agat/random.hpp"

namespace agat {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset, const fs::path& path) {
  if (offset + 4 > b.size())
    throw DataError(path.string() + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

}  // namespace

std::size_t Dataset::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

ad::Tensor Dataset::images_at(std::span<const std::size_t> indices) const {
  const std::size_t per = image_numel();
  std::vector<double> v(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw IndexError("dataset index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                v.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return ad::Tensor::constant({indices.size(), channels, height, width}, std::move(v));
}

std::vector<std::size_t> Dataset::labels_at(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d = *this;
  d.images.resize(n * image_numel());
  d.labels.resize(n);
  return d;
}

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (const auto magic = read_be32(img, 0, images_path); magic != 0x00000803)
    throw DataError(images_path.string() + ": bad magic at byte offset 0 (expected 0x00000803)");
  if (const auto magic = read_be32(lab, 0, labels_path); magic != 0x00000801)
    throw DataError(labels_path.string() + ": bad magic at byte offset 0 (expected 0x00000801)");

  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n != n_labels)
    throw DataError(labels_path.string() + ": label count " + std::to_string(n_labels) +
                    " at byte offset 4 does not match image count " + std::to_string(n));
  const std::size_t need_img = 16 + n * rows * cols;
  if (img.size() < need_img)
    throw DataError(images_path.string() + ": truncated payload at byte offset " +
                    std::to_string(img.size()) + " (expected " + std::to_string(need_img) + " bytes)");
  if (lab.size() < 8 + n)
    throw DataError(labels_path.string() + ": truncated payload at byte offset " +
                    std::to_string(lab.size()) + " (expected " + std::to_string(8 + n) + " bytes)");

  Dataset d;
  d.channels = 1;
  d.height = rows;
  d.width = cols;
  d.split = images_path.filename().string();
  d.images.resize(n * rows * cols);
  for (std::size_t i = 0; i < d.images.size(); ++i) d.images[i] = img[16 + i] / 255.0;
  d.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  return d;
}

Dataset load_cifar_binary(const std::vector<fs::path>& paths) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  constexpr std::size_t kRecord = 1 + kPixels;
  Dataset d;
  d.channels = 3;
  d.height = 32;
  d.width = 32;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.size() % kRecord != 0)
      throw DataError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the 3073-byte record (trailing record at byte offset " +
                      std::to_string(bytes.size() - bytes.size() % kRecord) + ")");
    for (std::size_t off = 0; off < bytes.size(); off += kRecord) {
      d.labels.push_back(bytes[off]);
      for (std::size_t i = 0; i < kPixels; ++i) d.images.push_back(bytes[off + 1 + i] / 255.0);
    }
    d.split += (d.split.empty() ? "" : "+") + path.filename().string();
  }
  return d;
}

Dataset synthetic_blobs(std::size_t n, std::size_t classes, std::size_t image_size,
                        std::uint64_t seed, double noise, std::size_t channels) {
  if (classes < 2) throw ConfigError("synthetic_blobs needs at least two classes");
  if (image_size == 0) throw ConfigError("synthetic_blobs needs a positive image size");
  Rng rng(seed);
  Dataset d;
  d.channels = channels;
  d.height = image_size;
  d.width = image_size;
  d.split = "synthetic";
  const double size = static_cast<double>(image_size);
  const double sigma = std::max(1.0, size / 8.0);
  d.images.reserve(n * channels * image_size * image_size);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    // blob centres spread evenly on a circle around the image centre
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(classes);
    const double cy = size / 2.0 + size / 4.0 * std::sin(angle);
    const double cx = size / 2.0 + size / 4.0 * std::cos(angle);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < image_size; ++y)
        for (std::size_t x = 0; x < image_size; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
          double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          if (noise > 0.0) v += normal(rng, 0.0, noise);
          d.images.push_back(std::clamp(v, 0.0, 1.0));
        }
    d.labels.push_back(label);
  }
  return d;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0x5eedu};
  Rng rng(seq);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

std::uint32_t file_crc32(const fs::path& path) {
  const auto bytes = read_file(path);
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace agat
