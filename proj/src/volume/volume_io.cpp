#include "t2d/volume_io.hpp"

#include "t2d/binary_io.hpp"

namespace t2d {

std::vector<std::uint8_t> encode_volume(const Volume& vol) {
  io::Writer w;
  w.bytes("T2DV");
  w.u16(kVolumeFormatVersion);
  w.u8(static_cast<std::uint8_t>(vol.kind()));
  w.u32(static_cast<std::uint32_t>(vol.dims().h));
  w.u32(static_cast<std::uint32_t>(vol.dims().w));
  w.u32(static_cast<std::uint32_t>(vol.dims().d));
  for (Real v : vol.voxels()) w.f32(static_cast<float>(v));
  w.seal();
  return w.buffer();
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  io::Reader r(io::verify_sealed(bytes));
  r.expect_magic("T2DV");
  const std::uint16_t version = r.u16();
  if (version != kVolumeFormatVersion) {
    throw io::FormatError("unsupported T2DV version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw io::FormatError("unknown volume kind tag " + std::to_string(kind));
  Dims dims;
  dims.h = static_cast<int>(r.u32());
  dims.w = static_cast<int>(r.u32());
  dims.d = static_cast<int>(r.u32());
  if (dims.h <= 0 || dims.w <= 0 || dims.d <= 0) throw io::FormatError("non-positive volume dims");
  if (r.remaining() != dims.voxels() * 4) {
    throw io::FormatError("voxel payload holds " + std::to_string(r.remaining()) + " bytes, dims need " +
                          std::to_string(dims.voxels() * 4));
  }
  std::vector<Real> vx(dims.voxels());
  for (auto& v : vx) v = static_cast<Real>(r.f32());
  Volume vol(dims, static_cast<VolumeKind>(kind), std::move(vx));
  vol.validate();
  return vol;
}

void write_volume(const std::filesystem::path& path, const Volume& vol) {
  io::write_file(path, encode_volume(vol));
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(io::read_file(path)); }

}  // namespace t2d
