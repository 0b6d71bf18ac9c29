#include "orca/bytes.h"

#include <limits>

namespace orca {

void
ByteWriter::str(std::string_view s)
{
  if (s.size() > std::numeric_limits<uint16_t>::max()) {
    throw Error(ErrorCode::Malformed, "string longer than 65535 bytes");
  }
  u16(static_cast<uint16_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void
ByteWriter::patch_u32(size_t offset, uint32_t v)
{
  for (int i = 0; i < 4; ++i) {
    buf_.at(offset + i) = static_cast<uint8_t>(v >> (8 * i));
  }
}

void
ByteReader::need(size_t n) const
{
  if (remaining() < n) {
    throw Error(
        underflow_, "need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + ", have " +
                        std::to_string(remaining()));
  }
}

std::string
ByteReader::str()
{
  const uint16_t len = u16();
  const ByteSpan s = raw(len);
  return std::string(s.begin(), s.end());
}

ByteSpan
ByteReader::raw(size_t n)
{
  need(n);
  ByteSpan out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

}  // namespace orca
