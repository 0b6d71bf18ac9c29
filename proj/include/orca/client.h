#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orca/model.h"
#include "orca/net.h"
#include "orca/protocol.h"
#include "orca/routing.h"
#include "orca/script.h"
#include "orca/tensor.h"

namespace orca {

struct ClientOptions {
  // Prepended to every tensor and dataset key (not to model/script names).
  std::string key_prefix;
  std::chrono::milliseconds connect_timeout{5000};
};

// Instrumentation for tests and benchmarks.
struct ClientCounters {
  std::map<wire::Command, uint64_t> frames;
  uint64_t input_transfers = 0;   // inputs staged onto the executing shard
  uint64_t output_transfers = 0;  // outputs moved to their canonical owner
  uint64_t topology_refreshes = 0;

  uint64_t frames_for(wire::Command c) const
  {
    auto it = frames.find(c);
    return it == frames.end() ? 0 : it->second;
  }
};

// Cluster client. Fetches the topology once at connect, opens one connection
// per shard lazily, and routes every keyed call to the owning shard. Not safe
// for concurrent use; create one per thread or process.
class Client {
 public:
  // Throws Unreachable, ProtocolVersionMismatch.
  static Client connect(const std::string& seed_address, ClientOptions options = {});

  Client(Client&&) = default;
  Client& operator=(Client&&) = default;

  void put_tensor(const std::string& name, const Tensor& t);
  Tensor get_tensor(const std::string& name);
  // Returns false when the key is absent; true only for tensors.
  bool tensor_exists(const std::string& name);
  bool poll_tensor(const std::string& name, std::chrono::milliseconds interval, int tries);
  bool delete_tensor(const std::string& name);

  void put_dataset(const Dataset& ds);
  Dataset get_dataset(const std::string& name);

  // Sent to every shard; throws PartialBroadcast naming the failing shards,
  // or BadModel when every shard rejects the blob.
  void set_model(
      const std::string& name, ByteSpan blob, uint32_t batch_size = 1,
      const std::string& device = "cpu");
  void set_script(const std::string& name, const ScriptSpec& script);
  void set_script(const std::string& name, const std::string& text);

  // Executes on the owner of the first input key. Inputs living elsewhere
  // are staged there under temporary keys, outputs are moved to their
  // canonical owners, and temporaries are removed on every path.
  void run_model(
      const std::string& name, const std::vector<std::string>& inputs,
      const std::vector<std::string>& outputs);
  void run_script(
      const std::string& name, const std::vector<std::string>& inputs,
      const std::string& output);

  wire::ShardStats info(uint32_t shard_id);
  void ping(uint32_t shard_id);

  const ClusterTopology& topology() const { return topology_; }
  // Shard owning a (prefix-applied) key.
  uint32_t shard_of(const std::string& name) const;
  std::string full_key(const std::string& name) const { return options_.key_prefix + name; }
  const ClientCounters& counters() const { return counters_; }

  // Prefix shared by all temporaries this handle creates on `shard_id`.
  std::string temp_prefix(uint32_t shard_id) const;
  static bool is_temporary_key(const std::string& key);

  // Replaces the cached topology without contacting the cluster; used to
  // exercise the stale-topology retry path.
  void set_topology_for_testing(ClusterTopology topo) { topology_ = std::move(topo); }

 private:
  Client(std::string seed, ClientOptions options);

  wire::Response call(uint32_t shard_id, wire::Command cmd, Bytes body);
  wire::Response call_checked(uint32_t shard_id, wire::Command cmd, Bytes body);
  // Routes a keyed request, refreshing the topology and retrying once on
  // WrongShard.
  wire::Response call_keyed(const std::string& key, wire::Command cmd, const Bytes& body);
  net::Socket& connection(uint32_t shard_id);
  ClusterTopology fetch_topology(net::Socket& sock);
  void refresh_topology();

  void put_raw(const std::string& key, ByteSpan tensor_bytes);
  Bytes get_raw(const std::string& key);

  struct Movement;
  void run_with_movement(
      wire::Command cmd, const std::string& name, const std::vector<std::string>& inputs,
      const std::vector<std::string>& outputs);

  std::string seed_;
  ClientOptions options_;
  ClusterTopology topology_;
  std::map<uint32_t, net::Socket> conns_;
  std::map<uint32_t, std::string> tags_;
  std::string nonce_;
  uint32_t next_request_id_ = 1;
  ClientCounters counters_;
};

}  // namespace orca
