#pragma once

// Binary wire protocol spoken between clients and shards.
//
// Request:  length u32 | version u16 | command u8 | request id u32 | body
// Response: length u32 | version u16 | command u8 | request id u32 |
//           status u8 | body
//
// `length` counts the whole frame including its own four bytes. All integers
// are little-endian. Strings are u16 length + UTF-8; key lists are u16 count
// + strings. On error the body is an error string, except WrongShard which
// carries the owner shard id (u32) ahead of the string.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orca/bytes.h"
#include "orca/error.h"
#include "orca/routing.h"

namespace orca::wire {

inline constexpr uint16_t kVersion = 1;
inline constexpr size_t kRequestHeader = 4 + 2 + 1 + 4;
inline constexpr size_t kResponseHeader = kRequestHeader + 1;
inline constexpr uint32_t kMaxFrame = 1u << 30;

enum class Command : uint8_t {
  put_tensor = 0x01,
  get_tensor = 0x02,
  del = 0x03,
  put_dataset = 0x04,
  get_dataset = 0x05,
  set_model = 0x06,
  run_model = 0x07,
  set_script = 0x08,
  run_script = 0x09,
  cluster_slots = 0x0A,
  ping = 0x0B,
  info = 0x0C,
};

const char* command_name(Command c);
bool is_command(uint8_t code);

enum class Status : uint8_t {
  ok = 0,
  not_found = 1,
  wrong_shard = 2,
  malformed = 3,
  wrong_kind = 4,
  model_not_found = 5,
  exec_error = 6,
  input_missing = 7,
  bad_model = 8,
};

Status status_for(ErrorCode code);
ErrorCode error_for(Status status);

struct Request {
  uint16_t version = kVersion;
  Command command = Command::ping;
  uint32_t request_id = 0;
  Bytes body;
};

struct Response {
  uint16_t version = kVersion;
  Command command = Command::ping;
  uint32_t request_id = 0;
  Status status = Status::ok;
  Bytes body;
};

Bytes encode_request(const Request& r);
Bytes encode_response(const Response& r);

// Decoders take one complete frame (length prefix included). Malformed frames
// throw Malformed. The version field is returned as-is; callers decide.
Request decode_request(ByteSpan frame);
Response decode_response(ByteSpan frame);

// Error response for `req` built from an exception.
Response error_response(const Request& req, const Error& e);
// Throws the Error carried by a non-ok response.
[[noreturn]] void raise(const Response& r);

// Request bodies.
Bytes put_tensor_body(const std::string& key, ByteSpan tensor_bytes);
Bytes key_body(const std::string& key);
Bytes put_dataset_body(const std::string& key, ByteSpan dataset_bytes);
Bytes set_model_body(
    const std::string& name, uint32_t batch_size, const std::string& device,
    ByteSpan blob);
Bytes run_model_body(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs);
Bytes set_script_body(const std::string& name, const std::string& text);
Bytes run_script_body(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::string& output);

void write_keys(ByteWriter& w, const std::vector<std::string>& keys);
std::vector<std::string> read_keys(ByteReader& r);

// CLUSTER_SLOTS reply: u16 count | (id u32, address, lo u16, hi u16)*.
Bytes encode_topology(const ClusterTopology& topo);
ClusterTopology decode_topology(ByteSpan body);

struct ShardStats {
  uint64_t puts = 0;
  uint64_t gets = 0;
  uint64_t model_runs = 0;
  uint64_t script_runs = 0;
  uint64_t batch_executions = 0;
  uint64_t bytes_in = 0;
  uint64_t bytes_out = 0;
  uint64_t keys_resident = 0;
  bool operator==(const ShardStats&) const = default;
};

// INFO reply: the eight fields above as u64, in declaration order.
Bytes encode_stats(const ShardStats& s);
ShardStats decode_stats(ByteSpan body);

}  // namespace orca::wire
