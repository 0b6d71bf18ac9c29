#include "orca/routing.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace orca {

namespace {

constexpr std::array<uint16_t, 256>
make_crc_table()
{
  std::array<uint16_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint16_t crc = static_cast<uint16_t>(i << 8);
    for (int b = 0; b < 8; ++b) {
      crc = (crc & 0x8000) ? static_cast<uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<uint16_t>(crc << 1);
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

}  // namespace

SlotId::SlotId(uint32_t value) : value_(value)
{
  if (value >= kSlotCount) {
    throw Error(ErrorCode::BadTopology, "slot " + std::to_string(value) + " out of range");
  }
}

uint16_t
crc16(std::span<const uint8_t> data)
{
  uint16_t crc = 0;
  for (uint8_t b : data) {
    crc = static_cast<uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ b) & 0xFF]);
  }
  return crc;
}

uint16_t
crc16(std::string_view data)
{
  return crc16(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(data.data()), data.size()));
}

std::string_view
hash_tag(std::string_view key)
{
  const size_t open = key.find('{');
  if (open == std::string_view::npos) {
    return key;
  }
  const size_t close = key.find('}', open + 1);
  if (close == std::string_view::npos || close == open + 1) {
    return key;
  }
  return key.substr(open + 1, close - open - 1);
}

SlotId
key_slot(std::string_view key)
{
  if (key.empty()) {
    throw Error(ErrorCode::EmptyKey, "key must be non-empty");
  }
  return SlotId(crc16(hash_tag(key)) % kSlotCount);
}

ClusterTopology::ClusterTopology(std::vector<ShardRange> shards)
    : shards_(std::move(shards))
{
  if (shards_.empty()) {
    throw Error(ErrorCode::BadTopology, "topology needs at least one shard");
  }
  std::sort(shards_.begin(), shards_.end(), [](const auto& a, const auto& b) {
    return a.lo < b.lo;
  });
  std::set<uint32_t> ids;
  uint32_t next = 0;
  for (const auto& s : shards_) {
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::BadTopology, "duplicate shard id " + std::to_string(s.id));
    }
    if (s.lo != next || s.hi < s.lo || s.hi >= kSlotCount) {
      throw Error(
          ErrorCode::BadTopology,
          "slot ranges must be disjoint and cover [0,16383]; shard " +
              std::to_string(s.id) + " starts at " + std::to_string(s.lo) +
              ", expected " + std::to_string(next));
    }
    next = static_cast<uint32_t>(s.hi) + 1;
  }
  if (next != kSlotCount) {
    throw Error(ErrorCode::BadTopology, "slot ranges stop at " + std::to_string(next));
  }
}

uint32_t
ClusterTopology::owner(SlotId slot) const
{
  auto it = std::upper_bound(
      shards_.begin(), shards_.end(), slot.value(),
      [](uint32_t v, const ShardRange& s) { return v < s.lo; });
  return std::prev(it)->id;
}

const ShardRange&
ClusterTopology::shard(uint32_t id) const
{
  for (const auto& s : shards_) {
    if (s.id == id) {
      return s;
    }
  }
  throw Error(ErrorCode::BadTopology, "no shard with id " + std::to_string(id));
}

uint32_t
slot_owner(const ClusterTopology& topo, SlotId slot)
{
  return topo.owner(slot);
}

ClusterTopology
plan_topology(size_t n_shards, const std::vector<std::string>& addresses)
{
  if (n_shards < 1 || n_shards > kSlotCount || n_shards != addresses.size()) {
    throw Error(
        ErrorCode::BadCount, "need 1 <= n_shards == addresses (" +
                                 std::to_string(n_shards) + " vs " +
                                 std::to_string(addresses.size()) + ")");
  }
  const uint32_t base = kSlotCount / static_cast<uint32_t>(n_shards);
  const uint32_t extra = kSlotCount % static_cast<uint32_t>(n_shards);
  std::vector<ShardRange> ranges;
  uint32_t lo = 0;
  for (uint32_t i = 0; i < n_shards; ++i) {
    const uint32_t len = base + (i < extra ? 1 : 0);
    ranges.push_back(ShardRange{
        i, addresses[i], static_cast<uint16_t>(lo), static_cast<uint16_t>(lo + len - 1)});
    lo += len;
  }
  return ClusterTopology(std::move(ranges));
}

std::string
format_topology(const ClusterTopology& topo)
{
  std::ostringstream out;
  for (const auto& s : topo.shards()) {
    out << s.id << ' ' << s.address << ' ' << s.lo << ' ' << s.hi << '\n';
  }
  return out.str();
}

ClusterTopology
parse_topology(std::string_view text)
{
  std::vector<ShardRange> shards;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream fields(line);
    ShardRange s;
    uint32_t lo = 0, hi = 0;
    if (!(fields >> s.id >> s.address >> lo >> hi) || lo >= kSlotCount ||
        hi >= kSlotCount) {
      throw Error(ErrorCode::BadTopology, "bad topology line: " + line);
    }
    s.lo = static_cast<uint16_t>(lo);
    s.hi = static_cast<uint16_t>(hi);
    shards.push_back(std::move(s));
  }
  return ClusterTopology(std::move(shards));
}

ClusterTopology
read_topology_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read topology file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str());
}

void
write_topology_file(const std::string& path, const ClusterTopology& topo)
{
  std::ofstream out(path, std::ios::trunc);
  out << format_topology(topo);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write topology file " + path);
  }
}

}  // namespace orca
