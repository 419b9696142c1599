#pragma once

// Little-endian byte buffers and atomic artifact files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsp::io {

class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void f32s(std::span<const float> v);
  void u32s(std::span<const std::uint32_t> v);
  void bytes(std::span<const std::uint8_t> v);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> release() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; overruns raise ErrorKind::kFormat.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::int32_t i32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::vector<float> f32s(std::size_t count);
  std::vector<std::uint32_t> u32s(std::size_t count);
  std::span<const std::uint8_t> bytes(std::size_t count);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  /// Fails unless every byte was consumed.
  void expect_end() const;
  [[noreturn]] void format_error(const std::string& what) const;

 private:
  void need(std::size_t count) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> data);

}  // namespace lsp::io
