#pragma once

#include <atomic>
#include <condition_variable>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "orca/batcher.h"
#include "orca/model.h"
#include "orca/net.h"
#include "orca/protocol.h"
#include "orca/routing.h"
#include "orca/script.h"

namespace orca {

using wire::ShardStats;

struct ShardConfig {
  uint32_t shard_id = 0;
  ClusterTopology topology;
  uint32_t workers = 1;
  KernelPolicy kernels = KernelPolicy::parallel;
};

enum class EntryKind { tensor, dataset, model, script };

const char* entry_kind_name(EntryKind k);

// One shard's state and command handlers, independent of the transport.
// Handlers throw Error; dispatch() turns them into wire responses.
class ShardCore {
 public:
  explicit ShardCore(ShardConfig config);
  ~ShardCore();

  ShardCore(const ShardCore&) = delete;
  ShardCore& operator=(const ShardCore&) = delete;

  void put_tensor(const std::string& key, ByteSpan tensor_bytes);
  Bytes get_tensor(const std::string& key);
  bool del(const std::string& key);
  void put_dataset(const std::string& key, ByteSpan dataset_bytes);
  Bytes get_dataset(const std::string& key);
  void set_model(
      const std::string& name, ByteSpan blob, uint32_t batch_size, const std::string& device);
  // Blocks until outputs are stored.
  void run_model(
      const std::string& name, const std::vector<std::string>& inputs,
      const std::vector<std::string>& outputs);
  void set_script(const std::string& name, const std::string& text);
  void run_script(
      const std::string& name, const std::vector<std::string>& inputs,
      const std::string& output);
  const ClusterTopology& cluster_slots() const { return config_.topology; }
  ShardStats info() const;
  // Snapshot of resident key names, sorted.
  std::vector<std::string> keys() const;

  wire::Response dispatch(const wire::Request& req);

  uint32_t shard_id() const { return config_.shard_id; }

 private:
  struct Entry {
    EntryKind kind;
    Bytes blob;  // tensor / dataset bytes
    std::shared_ptr<const ModelSpec> model;
    std::shared_ptr<const ScriptSpec> script;
  };

  void check_owned(const std::string& key) const;
  void store(const std::string& key, Entry e);
  Entry lookup(const std::string& key) const;
  Tensor load_input(const std::string& key) const;
  void execute(std::vector<InferenceRequest>& batch);

  ShardConfig config_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Entry, std::less<>> keyspace_;

  std::atomic<uint64_t> puts_{0}, gets_{0}, model_runs_{0}, script_runs_{0},
      batch_executions_{0}, bytes_in_{0}, bytes_out_{0};

  std::unique_ptr<InferenceQueue> queue_;
};

// TCP front end: one thread per connection, requests on a connection are
// answered in order.
class ShardServer {
 public:
  ShardServer(ShardConfig config, net::Listener listener);
  ~ShardServer();

  void start();
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();

  ShardCore& core() { return core_; }
  std::string address() const { return listener_.address(); }

 private:
  struct Connection {
    std::thread thread;
    net::Socket socket;
    std::atomic<bool> finished{false};
  };

  void accept_loop();
  void serve(Connection* conn);
  void reap_finished();

  ShardCore core_;
  net::Listener listener_;
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::list<std::unique_ptr<Connection>> conns_;
  std::atomic<bool> stopping_{false};
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopped_ = false;
};

}  // namespace orca
