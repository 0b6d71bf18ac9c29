#include "orca/client.h"

#include <random>
#include <sstream>
#include <thread>

namespace orca {

using wire::Command;

Client::Client(std::string seed, ClientOptions options)
    : seed_(std::move(seed)), options_(std::move(options))
{
  std::random_device rd;
  std::ostringstream s;
  s << std::hex << ((static_cast<uint64_t>(rd()) << 32) | rd());
  nonce_ = s.str();
}

Client
Client::connect(const std::string& seed_address, ClientOptions options)
{
  Client c(seed_address, std::move(options));
  const auto hp = net::parse_address(seed_address);
  net::Socket sock = net::connect_tcp(hp.host, hp.port, c.options_.connect_timeout);
  c.topology_ = c.fetch_topology(sock);
  for (const auto& s : c.topology_.shards()) {
    if (s.address == seed_address) {
      c.conns_.emplace(s.id, std::move(sock));
      break;
    }
  }
  return c;
}

ClusterTopology
Client::fetch_topology(net::Socket& sock)
{
  wire::Request req;
  req.command = Command::cluster_slots;
  req.request_id = next_request_id_++;
  try {
    sock.write_all(wire::encode_request(req));
    auto frame = sock.read_frame(wire::kMaxFrame);
    if (!frame) {
      throw Error(ErrorCode::Unreachable, "connection closed during CLUSTER_SLOTS");
    }
    counters_.frames[Command::cluster_slots]++;
    const auto resp = wire::decode_response(*frame);
    if (resp.version != wire::kVersion) {
      throw Error(
          ErrorCode::ProtocolVersionMismatch,
          "server speaks protocol version " + std::to_string(resp.version));
    }
    if (resp.status != wire::Status::ok) {
      wire::raise(resp);
    }
    return wire::decode_topology(resp.body);
  }
  catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) {
      throw Error(ErrorCode::Unreachable, e.detail());
    }
    throw;
  }
}

void
Client::refresh_topology()
{
  counters_.topology_refreshes++;
  const auto hp = net::parse_address(seed_);
  net::Socket sock = net::connect_tcp(hp.host, hp.port, options_.connect_timeout);
  topology_ = fetch_topology(sock);
  conns_.clear();
  tags_.clear();
}

net::Socket&
Client::connection(uint32_t shard_id)
{
  auto it = conns_.find(shard_id);
  if (it != conns_.end()) {
    return it->second;
  }
  const auto hp = net::parse_address(topology_.shard(shard_id).address);
  auto [ins, ok] =
      conns_.emplace(shard_id, net::connect_tcp(hp.host, hp.port, options_.connect_timeout));
  return ins->second;
}

wire::Response
Client::call(uint32_t shard_id, Command cmd, Bytes body)
{
  wire::Request req;
  req.command = cmd;
  req.request_id = next_request_id_++;
  req.body = std::move(body);
  try {
    net::Socket& sock = connection(shard_id);
    sock.write_all(wire::encode_request(req));
    counters_.frames[cmd]++;
    auto frame = sock.read_frame(wire::kMaxFrame);
    if (!frame) {
      throw Error(ErrorCode::IoError, "connection closed by shard");
    }
    auto resp = wire::decode_response(*frame);
    if (resp.version != wire::kVersion) {
      throw Error(
          ErrorCode::ProtocolVersionMismatch,
          "shard speaks protocol version " + std::to_string(resp.version));
    }
    if (resp.request_id != req.request_id) {
      throw Error(ErrorCode::Malformed, "response id does not match request");
    }
    return resp;
  }
  catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) {
      conns_.erase(shard_id);
      throw Error(
          ErrorCode::Unreachable, "shard " + std::to_string(shard_id) + ": " + e.detail());
    }
    throw;
  }
}

wire::Response
Client::call_checked(uint32_t shard_id, Command cmd, Bytes body)
{
  auto resp = call(shard_id, cmd, std::move(body));
  if (resp.status != wire::Status::ok) {
    wire::raise(resp);
  }
  return resp;
}

wire::Response
Client::call_keyed(const std::string& key, Command cmd, const Bytes& body)
{
  try {
    return call_checked(topology_.owner_of_key(key), cmd, body);
  }
  catch (const Error& e) {
    if (e.code() != ErrorCode::WrongShard) {
      throw;
    }
  }
  refresh_topology();
  return call_checked(topology_.owner_of_key(key), cmd, body);
}

uint32_t
Client::shard_of(const std::string& name) const
{
  return topology_.owner_of_key(full_key(name));
}

void
Client::put_raw(const std::string& key, ByteSpan tensor_bytes)
{
  call_keyed(key, Command::put_tensor, wire::put_tensor_body(key, tensor_bytes));
}

Bytes
Client::get_raw(const std::string& key)
{
  return call_keyed(key, Command::get_tensor, wire::key_body(key)).body;
}

void
Client::put_tensor(const std::string& name, const Tensor& t)
{
  put_raw(full_key(name), serialize_tensor(t));
}

Tensor
Client::get_tensor(const std::string& name)
{
  return deserialize_tensor(get_raw(full_key(name)));
}

bool
Client::tensor_exists(const std::string& name)
{
  try {
    get_raw(full_key(name));
    return true;
  }
  catch (const Error& e) {
    if (e.code() == ErrorCode::NotFound || e.code() == ErrorCode::WrongKind) {
      return false;
    }
    throw;
  }
}

bool
Client::poll_tensor(const std::string& name, std::chrono::milliseconds interval, int tries)
{
  for (int i = 0; i < tries; ++i) {
    if (tensor_exists(name)) {
      return true;
    }
    std::this_thread::sleep_for(interval);
  }
  return false;
}

bool
Client::delete_tensor(const std::string& name)
{
  const std::string key = full_key(name);
  const auto resp = call_keyed(key, Command::del, wire::key_body(key));
  return !resp.body.empty() && resp.body[0] == 1;
}

void
Client::put_dataset(const Dataset& ds)
{
  const std::string key = full_key(ds.name());
  call_keyed(key, Command::put_dataset, wire::put_dataset_body(key, serialize_dataset(ds)));
}

Dataset
Client::get_dataset(const std::string& name)
{
  const std::string key = full_key(name);
  const auto resp = call_keyed(key, Command::get_dataset, wire::key_body(key));
  return deserialize_dataset(resp.body, name);
}

void
Client::set_model(
    const std::string& name, ByteSpan blob, uint32_t batch_size, const std::string& device)
{
  const Bytes body = wire::set_model_body(name, batch_size, device, blob);
  std::vector<uint32_t> failed;
  std::optional<Error> rejection;
  for (const auto& s : topology_.shards()) {
    try {
      call_checked(s.id, Command::set_model, body);
    }
    catch (const Error& e) {
      if (e.code() == ErrorCode::BadModel) {
        rejection = e;
      }
      failed.push_back(s.id);
    }
  }
  if (rejection) {
    throw *rejection;
  }
  if (!failed.empty()) {
    std::string list;
    for (uint32_t id : failed) {
      list += (list.empty() ? "" : ",") + std::to_string(id);
    }
    throw Error(ErrorCode::PartialBroadcast, "SET_MODEL failed on shard(s) " + list, failed);
  }
}

void
Client::set_script(const std::string& name, const ScriptSpec& script)
{
  set_script(name, format_script(script));
}

void
Client::set_script(const std::string& name, const std::string& text)
{
  const Bytes body = wire::set_script_body(name, text);
  std::vector<uint32_t> failed;
  for (const auto& s : topology_.shards()) {
    try {
      call_checked(s.id, Command::set_script, body);
    }
    catch (const Error& e) {
      if (e.code() != ErrorCode::Unreachable) {
        throw;
      }
      failed.push_back(s.id);
    }
  }
  if (!failed.empty()) {
    throw Error(ErrorCode::PartialBroadcast, "SET_SCRIPT did not reach every shard", failed);
  }
}

std::string
Client::temp_prefix(uint32_t shard_id) const
{
  return "{" + tags_.at(shard_id) + "}tmp." + nonce_ + ".";
}

bool
Client::is_temporary_key(const std::string& key)
{
  if (key.empty() || key[0] != '{') {
    return false;
  }
  const size_t close = key.find('}');
  return close != std::string::npos && close > 1 && key.compare(close + 1, 4, "tmp.") == 0;
}

void
Client::run_model(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs)
{
  run_with_movement(Command::run_model, name, inputs, outputs);
}

void
Client::run_script(
    const std::string& name, const std::vector<std::string>& inputs, const std::string& output)
{
  run_with_movement(Command::run_script, name, inputs, {output});
}

// Deletes staged temporaries on the executing shard when it goes out of
// scope, whatever happened in between.
struct Client::Movement {
  Client& client;
  uint32_t shard;
  std::vector<std::string> temps;

  ~Movement()
  {
    for (const auto& k : temps) {
      try {
        client.call(shard, Command::del, wire::key_body(k));
      }
      catch (...) {
      }
    }
  }
};

void
Client::run_with_movement(
    Command cmd, const std::string& name, const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs)
{
  if (inputs.empty()) {
    throw Error(ErrorCode::Malformed, "at least one input key is required");
  }
  for (int attempt = 0;; ++attempt) {
    try {
      const uint32_t exec = topology_.owner_of_key(full_key(inputs[0]));
      if (!tags_.count(exec)) {
        // Smallest "s<lo>.<n>" whose slot lands in the executing shard's range.
        const auto& range = topology_.shard(exec);
        for (uint32_t n = 0;; ++n) {
          std::string tag = "s" + std::to_string(range.lo) + "." + std::to_string(n);
          if (range.contains(key_slot(tag))) {
            tags_[exec] = tag;
            break;
          }
        }
      }
      Movement mv{*this, exec, {}};
      const std::string tmp = temp_prefix(exec);

      std::vector<std::string> exec_inputs;
      for (size_t i = 0; i < inputs.size(); ++i) {
        const std::string key = full_key(inputs[i]);
        if (topology_.owner_of_key(key) == exec) {
          exec_inputs.push_back(key);
          continue;
        }
        const Bytes data = get_raw(key);
        const std::string staged = tmp + "in." + std::to_string(i);
        mv.temps.push_back(staged);
        call_checked(exec, Command::put_tensor, wire::put_tensor_body(staged, data));
        counters_.input_transfers++;
        exec_inputs.push_back(staged);
      }

      std::vector<std::string> exec_outputs;
      std::vector<std::pair<std::string, std::string>> moves;  // staged -> canonical
      for (size_t j = 0; j < outputs.size(); ++j) {
        const std::string key = full_key(outputs[j]);
        if (topology_.owner_of_key(key) == exec) {
          exec_outputs.push_back(key);
          continue;
        }
        const std::string staged = tmp + "out." + std::to_string(j);
        mv.temps.push_back(staged);
        moves.emplace_back(staged, key);
        exec_outputs.push_back(staged);
      }

      if (cmd == Command::run_model) {
        call_checked(exec, cmd, wire::run_model_body(name, exec_inputs, exec_outputs));
      } else {
        call_checked(exec, cmd, wire::run_script_body(name, exec_inputs, exec_outputs.at(0)));
      }

      for (const auto& [staged, canonical] : moves) {
        const Bytes data = call_checked(exec, Command::get_tensor, wire::key_body(staged)).body;
        put_raw(canonical, data);
        counters_.output_transfers++;
      }
      return;
    }
    catch (const Error& e) {
      if (e.code() != ErrorCode::WrongShard || attempt > 0) {
        throw;
      }
    }
    refresh_topology();
  }
}

wire::ShardStats
Client::info(uint32_t shard_id)
{
  return wire::decode_stats(call_checked(shard_id, Command::info, {}).body);
}

void
Client::ping(uint32_t shard_id)
{
  call_checked(shard_id, Command::ping, {});
}

}  // namespace orca
