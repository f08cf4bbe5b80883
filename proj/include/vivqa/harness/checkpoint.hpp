#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "vivqa/harness/model.hpp"
#include "vivqa/optim/adamw.hpp"

namespace vivqa::harness {

/// VVQC layout, integers little-endian, reals as IEEE-754 binary64:
///
///   "VVQC", u32 version
///   string config JSON, string token vocabulary, string answer vocabulary
///   u32 tensor count, then per tensor: string name, u32 rank, u64 dims[rank],
///       f64 values
///   u64 optimizer step, u32 slot count, then per slot: string name,
///       f64 m[numel], f64 v[numel]
///   u32 CRC-32 of every preceding byte
///
/// Strings are a u64 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const VqaModel& model, const optim::AdamWState& state);

struct LoadedCheckpoint {
    std::unique_ptr<VqaModel> model;
    optim::AdamWState optimizer;
};

/// Rebuilds the model from the stored config and vocabularies, then
/// overwrites every tensor with the stored values. Throws FormatError on a
/// damaged file.
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const VqaModel& model, const optim::AdamWState& state);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vivqa::harness
