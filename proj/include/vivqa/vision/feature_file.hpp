#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vivqa/core/tensor.hpp"

namespace vivqa::vision {

/// VVQF layout, all integers little-endian:
///
///   offset 0   "VVQF"
///   4          u32 version (= 1)
///   8          u32 rank
///   12         u32 dims[rank]
///   ...        f32 payload[prod(dims)], IEEE-754, row-major
///   ...        u32 CRC-32 (zlib polynomial) of every preceding byte
inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_feature_file(const Tensor& tensor);
/// Throws FormatError on bad magic, version, checksum or length.
Tensor decode_feature_file(std::span<const std::uint8_t> bytes);

void write_feature_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_feature_file(const std::filesystem::path& path);

}  // namespace vivqa::vision
