#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embanon/errors.hpp"

namespace embanon::data {

// Little-endian encoder independent of host byte order.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian decoder. Every failure is a FormatError
// carrying the offset of the field that could not be read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return data_.size() - pos_; }

  std::string bytes(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16(std::string_view what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(std::string_view what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(std::string_view what) { return le(8, what); }
  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }
  double f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

  void need(std::uint64_t n, std::string_view what) const {
    if (remaining() < n) {
      throw FormatError("truncated input: cannot read " + std::string(what) +
                            " (" + std::to_string(n) + " bytes needed, " +
                            std::to_string(remaining()) + " available)",
                        pos_);
    }
  }

 private:
  std::uint64_t le(int n, std::string_view what) {
    need(static_cast<std::uint64_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::uint64_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace embanon::data
