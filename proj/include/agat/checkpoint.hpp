// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint container, little-endian throughout:
//
//   "AGAT"  u32 version
//   u32 length, config text (key = value lines, UTF-8)
//   tensor records: u32 name length, name, u32 rank, u64 dims…, f64 values…
//   u32 CRC-32 of every byte after the magic
//
// Records hold the parameters in Params::named() order, followed by the
// optimizer moments as "adam.m/<name>" and "adam.v/<name>".

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "agat/train.hpp"
#include "agat/vit.hpp"

namespace agat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  TrainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& model, const TrainConfig& train,
                                            const TrainState& state);

/// Parses and validates a container. With `expected`, the stored tensor
/// shapes are checked against that config and the first mismatch is named.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const ModelConfig* expected = nullptr);

/// Writes through a temporary file and renames it into place.
void checkpoint_save(const std::filesystem::path& path, const ModelConfig& model,
                     const TrainConfig& train, const TrainState& state);
Checkpoint checkpoint_load(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace agat
