#include "t2d/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace t2d::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = ::crc32(c, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

void Writer::bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
void Writer::u8(std::uint8_t v) { buf_.push_back(v); }
void Writer::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v & 0xff));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}
void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}
void Writer::seal() { u32(crc32(buf_)); }

const std::uint8_t* Reader::take(std::size_t n) {
  if (remaining() < n) {
    throw FormatError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", have " + std::to_string(remaining()));
  }
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

void Reader::expect_magic(std::string_view magic) {
  const std::uint8_t* p = take(magic.size());
  if (std::memcmp(p, magic.data(), magic.size()) != 0) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}
std::uint8_t Reader::u8() { return *take(1); }
std::uint16_t Reader::u16() {
  const std::uint8_t* p = take(2);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t Reader::u32() {
  const std::uint8_t* p = take(4);
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
float Reader::f32() { return std::bit_cast<float>(u32()); }
std::string Reader::str() {
  const std::uint32_t n = u32();
  const std::uint8_t* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("file too short for a CRC32 trailer");
  auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = crc32(body);
  if (stored != actual) throw FormatError("CRC32 mismatch: file is corrupt");
  return body;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint32_t file_crc(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 4) {
    const std::size_t n = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[n + i]) << (8 * i);
    if (crc32(std::span(bytes).first(n)) == stored) return stored;
  }
  return crc32(bytes);
}

}  // namespace t2d::io
