#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "t2d/volume.hpp"

namespace t2d {

// T2DV layout, all little-endian:
//   "T2DV" | u16 version | u8 kind | u32 H | u32 W | u32 D |
//   H·W·D f32 voxels (d outermost, then h, then w) | u32 CRC32
// The CRC covers every byte before it.
inline constexpr std::uint16_t kVolumeFormatVersion = 1;

std::vector<std::uint8_t> encode_volume(const Volume& vol);
Volume decode_volume(std::span<const std::uint8_t> bytes);

void write_volume(const std::filesystem::path& path, const Volume& vol);
Volume read_volume(const std::filesystem::path& path);

}  // namespace t2d
