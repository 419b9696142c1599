#include "lsp/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <system_error>
#include <unistd.h>

#include "lsp/core.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact formats assume a little-endian host");

namespace lsp::io {

namespace {

template <typename T>
void append_raw(std::vector<std::uint8_t>& buf, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

}  // namespace

void ByteWriter::magic(std::string_view tag) {
  buf_.insert(buf_.end(), tag.begin(), tag.end());
}
void ByteWriter::u32(std::uint32_t v) { append_raw(buf_, v); }
void ByteWriter::i32(std::int32_t v) { append_raw(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { append_raw(buf_, v); }
void ByteWriter::f32(float v) { append_raw(buf_, v); }
void ByteWriter::f64(double v) { append_raw(buf_, v); }

void ByteWriter::f32s(std::span<const float> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  buf_.insert(buf_.end(), p, p + v.size_bytes());
}

void ByteWriter::u32s(std::span<const std::uint32_t> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  buf_.insert(buf_.end(), p, p + v.size_bytes());
}

void ByteWriter::bytes(std::span<const std::uint8_t> v) {
  buf_.insert(buf_.end(), v.begin(), v.end());
}

void ByteReader::format_error(const std::string& what) const {
  fail(ErrorKind::kFormat, context_ + ": " + what);
}

void ByteReader::need(std::size_t count) const {
  if (remaining() < count) {
    format_error("truncated (need " + std::to_string(count) + " bytes at offset " +
                 std::to_string(pos_) + ", have " + std::to_string(remaining()) + ")");
  }
}

void ByteReader::expect_magic(std::string_view tag) {
  need(tag.size());
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    format_error("bad magic, expected \"" + std::string(tag) + "\"");
  }
  pos_ += tag.size();
}

#define LSP_READ_SCALAR(T)                          \
  need(sizeof(T));                                  \
  T v;                                              \
  std::memcpy(&v, data_.data() + pos_, sizeof(T));  \
  pos_ += sizeof(T);                                \
  return v

std::uint32_t ByteReader::u32() { LSP_READ_SCALAR(std::uint32_t); }
std::int32_t ByteReader::i32() { LSP_READ_SCALAR(std::int32_t); }
std::uint64_t ByteReader::u64() { LSP_READ_SCALAR(std::uint64_t); }
float ByteReader::f32() { LSP_READ_SCALAR(float); }
double ByteReader::f64() { LSP_READ_SCALAR(double); }

#undef LSP_READ_SCALAR

std::vector<float> ByteReader::f32s(std::size_t count) {
  if (count > remaining() / sizeof(float)) need(count * sizeof(float));
  std::vector<float> out(count);
  std::memcpy(out.data(), data_.data() + pos_, count * sizeof(float));
  pos_ += count * sizeof(float);
  return out;
}

std::vector<std::uint32_t> ByteReader::u32s(std::size_t count) {
  if (count > remaining() / sizeof(std::uint32_t)) need(count * sizeof(std::uint32_t));
  std::vector<std::uint32_t> out(count);
  std::memcpy(out.data(), data_.data() + pos_, count * sizeof(std::uint32_t));
  pos_ += count * sizeof(std::uint32_t);
  return out;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t count) {
  need(count);
  auto out = data_.subspan(pos_, count);
  pos_ += count;
  return out;
}

void ByteReader::expect_end() const {
  if (!at_end()) {
    format_error(std::to_string(remaining()) + " trailing bytes");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> data(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()),
                           static_cast<std::streamsize>(size))) {
    fail(ErrorKind::kMissingInput, "failed reading " + path.string());
  }
  return data;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kMissingInput, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorKind::kRuntime, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::kRuntime, "cannot rename onto " + path.string());
  }
}

}  // namespace lsp::io
