#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "t2d/model.hpp"

namespace t2d {

// T2DC layout, all little-endian:
//   "T2DC" | u16 version | str config |
//   { str name | u8 rank | u32 extents[rank] | f32 values } ... | u32 CRC32
// where str is a u32 byte length followed by the bytes. The config block is
// the canonical key=value text of the model config.
inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const T2DNet& net);
/// Rebuilds the network described by the stored config and loads its values.
T2DNet decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const T2DNet& net);
T2DNet load_checkpoint(const std::filesystem::path& path);

}  // namespace t2d
