#include "orca/protocol.h"

namespace orca::wire {

const char*
command_name(Command c)
{
  switch (c) {
    case Command::put_tensor: return "PUT_TENSOR";
    case Command::get_tensor: return "GET_TENSOR";
    case Command::del: return "DEL";
    case Command::put_dataset: return "PUT_DATASET";
    case Command::get_dataset: return "GET_DATASET";
    case Command::set_model: return "SET_MODEL";
    case Command::run_model: return "RUN_MODEL";
    case Command::set_script: return "SET_SCRIPT";
    case Command::run_script: return "RUN_SCRIPT";
    case Command::cluster_slots: return "CLUSTER_SLOTS";
    case Command::ping: return "PING";
    case Command::info: return "INFO";
  }
  return "?";
}

bool
is_command(uint8_t code)
{
  return code >= 0x01 && code <= 0x0C;
}

Status
status_for(ErrorCode code)
{
  switch (code) {
    case ErrorCode::NotFound: return Status::not_found;
    case ErrorCode::WrongShard: return Status::wrong_shard;
    case ErrorCode::WrongKind: return Status::wrong_kind;
    case ErrorCode::ModelNotFound: return Status::model_not_found;
    case ErrorCode::InputMissing: return Status::input_missing;
    case ErrorCode::BadModel:
    case ErrorCode::BadMagic:
    case ErrorCode::BadVersion:
    case ErrorCode::DimMismatch: return Status::bad_model;
    case ErrorCode::WidthMismatch:
    case ErrorCode::DTypeMismatch:
    case ErrorCode::ArityMismatch:
    case ErrorCode::DomainError:
    case ErrorCode::ExecError: return Status::exec_error;
    default: return Status::malformed;
  }
}

ErrorCode
error_for(Status status)
{
  switch (status) {
    case Status::not_found: return ErrorCode::NotFound;
    case Status::wrong_shard: return ErrorCode::WrongShard;
    case Status::wrong_kind: return ErrorCode::WrongKind;
    case Status::model_not_found: return ErrorCode::ModelNotFound;
    case Status::exec_error: return ErrorCode::ExecError;
    case Status::input_missing: return ErrorCode::InputMissing;
    case Status::bad_model: return ErrorCode::BadModel;
    default: return ErrorCode::Malformed;
  }
}

Bytes
encode_request(const Request& r)
{
  ByteWriter w;
  w.u32(0);
  w.u16(r.version);
  w.u8(static_cast<uint8_t>(r.command));
  w.u32(r.request_id);
  w.raw(r.body);
  w.patch_u32(0, static_cast<uint32_t>(w.size()));
  return std::move(w).take();
}

Bytes
encode_response(const Response& r)
{
  ByteWriter w;
  w.u32(0);
  w.u16(r.version);
  w.u8(static_cast<uint8_t>(r.command));
  w.u32(r.request_id);
  w.u8(static_cast<uint8_t>(r.status));
  w.raw(r.body);
  w.patch_u32(0, static_cast<uint32_t>(w.size()));
  return std::move(w).take();
}

namespace {

void
check_length(ByteReader& in, ByteSpan frame, size_t header)
{
  const uint32_t len = in.u32();
  if (len != frame.size() || len < header) {
    throw Error(
        ErrorCode::Malformed, "frame length field " + std::to_string(len) +
                                  " does not match " + std::to_string(frame.size()) +
                                  " bytes");
  }
}

Command
read_command(ByteReader& in)
{
  const uint8_t c = in.u8();
  if (!is_command(c)) {
    throw Error(ErrorCode::Malformed, "unknown command " + std::to_string(c));
  }
  return static_cast<Command>(c);
}

}  // namespace

Request
decode_request(ByteSpan frame)
{
  ByteReader in(frame, ErrorCode::Malformed);
  check_length(in, frame, kRequestHeader);
  Request r;
  r.version = in.u16();
  r.command = read_command(in);
  r.request_id = in.u32();
  const ByteSpan body = in.rest();
  r.body.assign(body.begin(), body.end());
  return r;
}

Response
decode_response(ByteSpan frame)
{
  ByteReader in(frame, ErrorCode::Malformed);
  check_length(in, frame, kResponseHeader);
  Response r;
  r.version = in.u16();
  r.command = read_command(in);
  r.request_id = in.u32();
  const uint8_t st = in.u8();
  if (st > static_cast<uint8_t>(Status::bad_model)) {
    throw Error(ErrorCode::Malformed, "unknown status " + std::to_string(st));
  }
  r.status = static_cast<Status>(st);
  const ByteSpan body = in.rest();
  r.body.assign(body.begin(), body.end());
  return r;
}

Response
error_response(const Request& req, const Error& e)
{
  Response r;
  r.command = req.command;
  r.request_id = req.request_id;
  r.status = status_for(e.code());
  ByteWriter w;
  if (r.status == Status::wrong_shard) {
    w.u32(e.owner());
  }
  std::string msg = e.what();
  if (msg.size() > 65535) {
    msg.resize(65535);
  }
  w.str(msg);
  r.body = std::move(w).take();
  return r;
}

void
raise(const Response& r)
{
  ByteReader in(r.body, ErrorCode::Malformed);
  const ErrorCode code = error_for(r.status);
  if (r.status == Status::wrong_shard) {
    const uint32_t owner = in.u32();
    throw Error(code, in.str(), owner);
  }
  throw Error(code, in.str());
}

void
write_keys(ByteWriter& w, const std::vector<std::string>& keys)
{
  w.u16(static_cast<uint16_t>(keys.size()));
  for (const auto& k : keys) {
    w.str(k);
  }
}

std::vector<std::string>
read_keys(ByteReader& r)
{
  std::vector<std::string> keys(r.u16());
  for (auto& k : keys) {
    k = r.str();
  }
  return keys;
}

Bytes
put_tensor_body(const std::string& key, ByteSpan tensor_bytes)
{
  ByteWriter w;
  w.str(key);
  w.raw(tensor_bytes);
  return std::move(w).take();
}

Bytes
key_body(const std::string& key)
{
  ByteWriter w;
  w.str(key);
  return std::move(w).take();
}

Bytes
put_dataset_body(const std::string& key, ByteSpan dataset_bytes)
{
  return put_tensor_body(key, dataset_bytes);
}

Bytes
set_model_body(
    const std::string& name, uint32_t batch_size, const std::string& device,
    ByteSpan blob)
{
  ByteWriter w;
  w.str(name);
  w.u32(batch_size);
  w.str(device);
  w.raw(blob);
  return std::move(w).take();
}

Bytes
run_model_body(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs)
{
  ByteWriter w;
  w.str(name);
  write_keys(w, inputs);
  write_keys(w, outputs);
  return std::move(w).take();
}

Bytes
set_script_body(const std::string& name, const std::string& text)
{
  ByteWriter w;
  w.str(name);
  w.raw(ByteSpan(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  return std::move(w).take();
}

Bytes
run_script_body(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::string& output)
{
  ByteWriter w;
  w.str(name);
  write_keys(w, inputs);
  w.str(output);
  return std::move(w).take();
}

Bytes
encode_topology(const ClusterTopology& topo)
{
  ByteWriter w;
  w.u16(static_cast<uint16_t>(topo.size()));
  for (const auto& s : topo.shards()) {
    w.u32(s.id);
    w.str(s.address);
    w.u16(s.lo);
    w.u16(s.hi);
  }
  return std::move(w).take();
}

ClusterTopology
decode_topology(ByteSpan body)
{
  ByteReader in(body, ErrorCode::Malformed);
  std::vector<ShardRange> shards(in.u16());
  for (auto& s : shards) {
    s.id = in.u32();
    s.address = in.str();
    s.lo = in.u16();
    s.hi = in.u16();
  }
  return ClusterTopology(std::move(shards));
}

Bytes
encode_stats(const ShardStats& s)
{
  ByteWriter w;
  for (uint64_t v : {s.puts, s.gets, s.model_runs, s.script_runs, s.batch_executions,
                     s.bytes_in, s.bytes_out, s.keys_resident}) {
    w.u64(v);
  }
  return std::move(w).take();
}

ShardStats
decode_stats(ByteSpan body)
{
  ByteReader in(body, ErrorCode::Malformed);
  ShardStats s;
  for (uint64_t* v : {&s.puts, &s.gets, &s.model_runs, &s.script_runs, &s.batch_executions,
                      &s.bytes_in, &s.bytes_out, &s.keys_resident}) {
    *v = in.u64();
  }
  return s;
}

}  // namespace orca::wire
