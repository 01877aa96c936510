#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace t2d::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Little-endian byte sink.
class Writer {
 public:
  void bytes(std::string_view s);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  /// u32 length followed by raw bytes.
  void str(std::string_view s);
  /// Appends CRC32 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source with bounds checks.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::string str();
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const std::uint8_t* take(std::size_t n);
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Verifies the trailing CRC32 and returns the bytes it covers.
std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
/// CRC-32 of a file's payload: the stored trailer for sealed files (whose
/// whole-file CRC is the same constant for all of them), else of all bytes.
std::uint32_t file_crc(const std::filesystem::path& path);

}  // namespace t2d::io
