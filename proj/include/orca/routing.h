#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orca/error.h"

namespace orca {

inline constexpr uint32_t kSlotCount = 16384;

class SlotId {
 public:
  // Throws BadTopology outside [0, 16383].
  explicit SlotId(uint32_t value);
  uint32_t value() const { return value_; }
  auto operator<=>(const SlotId&) const = default;

 private:
  uint32_t value_;
};

// CRC-16/XMODEM: poly 0x1021, init 0, no reflection, no final xor.
uint16_t crc16(std::span<const uint8_t> data);
uint16_t crc16(std::string_view data);

// Redis-style hash tags: when the key has a "{...}" section with non-empty
// content (first '{' and the first '}' after it), only that content is hashed.
std::string_view hash_tag(std::string_view key);
SlotId key_slot(std::string_view key);

struct ShardRange {
  uint32_t id = 0;
  std::string address;  // host:port
  uint16_t lo = 0;      // inclusive
  uint16_t hi = 0;      // inclusive

  bool contains(SlotId s) const { return s.value() >= lo && s.value() <= hi; }
  uint32_t size() const { return static_cast<uint32_t>(hi) - lo + 1; }
  bool operator==(const ShardRange&) const = default;
};

// Immutable shard map. Ranges are disjoint and cover every slot exactly once.
class ClusterTopology {
 public:
  ClusterTopology() = default;

  // Validates coverage and uniqueness of ids; throws BadTopology.
  explicit ClusterTopology(std::vector<ShardRange> shards);

  const std::vector<ShardRange>& shards() const { return shards_; }
  size_t size() const { return shards_.size(); }
  bool empty() const { return shards_.empty(); }

  uint32_t owner(SlotId slot) const;
  uint32_t owner_of_key(std::string_view key) const { return owner(key_slot(key)); }
  const ShardRange& shard(uint32_t id) const;

  bool operator==(const ClusterTopology&) const = default;

 private:
  std::vector<ShardRange> shards_;  // sorted by lo
};

uint32_t slot_owner(const ClusterTopology& topo, SlotId slot);

// n contiguous ranges; the first (16384 mod n) shards own one extra slot.
// Shard ids are 0..n-1 in address order. Throws BadCount.
ClusterTopology plan_topology(size_t n_shards, const std::vector<std::string>& addresses);

// One line per shard: "<id> <host:port> <lo> <hi>". Blank lines and lines
// starting with '#' are ignored.
std::string format_topology(const ClusterTopology& topo);
ClusterTopology parse_topology(std::string_view text);
ClusterTopology read_topology_file(const std::string& path);
void write_topology_file(const std::string& path, const ClusterTopology& topo);

}  // namespace orca
