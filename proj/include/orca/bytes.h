#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orca/error.h"

namespace orca {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

// Little-endian encoder. All multi-byte integers and floats on the wire and
// in stored blobs go through here.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes initial) : buf_(std::move(initial)) {}

  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { put_le(v, 2); }
  void u32(uint32_t v) { put_le(v, 4); }
  void u64(uint64_t v) { put_le(v, 8); }
  void i64(int64_t v) { put_le(static_cast<uint64_t>(v), 8); }
  void f32(float v) { put_le(std::bit_cast<uint32_t>(v), 4); }
  void f64(double v) { put_le(std::bit_cast<uint64_t>(v), 8); }

  // u16 length prefix followed by the raw bytes.
  void str(std::string_view s);
  void raw(ByteSpan data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

  // Overwrite a u32 previously reserved at `offset`.
  void patch_u32(size_t offset, uint32_t v);

  size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  void put_le(uint64_t v, int width)
  {
    for (int i = 0; i < width; ++i) {
      buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
  }

  Bytes buf_;
};

// Bounds-checked little-endian decoder. Underflow throws `underflow_code`
// (Truncated by default; the wire layer uses Malformed).
class ByteReader {
 public:
  explicit ByteReader(
      ByteSpan data, ErrorCode underflow_code = ErrorCode::Truncated)
      : data_(data), underflow_(underflow_code)
  {
  }

  uint8_t u8() { return static_cast<uint8_t>(get_le(1)); }
  uint16_t u16() { return static_cast<uint16_t>(get_le(2)); }
  uint32_t u32() { return static_cast<uint32_t>(get_le(4)); }
  uint64_t u64() { return get_le(8); }
  int64_t i64() { return static_cast<int64_t>(get_le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<uint32_t>(get_le(4))); }
  double f64() { return std::bit_cast<double>(get_le(8)); }

  std::string str();
  ByteSpan raw(size_t n);
  ByteSpan rest() { return raw(remaining()); }

  size_t remaining() const { return data_.size() - pos_; }
  size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) const;
  uint64_t get_le(int width)
  {
    need(static_cast<size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += static_cast<size_t>(width);
    return v;
  }

  ByteSpan data_;
  size_t pos_ = 0;
  ErrorCode underflow_;
};

}  // namespace orca
