#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orca/routing.h"

namespace orca {

struct RunSettings {
  std::string exe;
  std::vector<std::string> args;
  std::map<std::string, std::string> env;
  std::filesystem::path working_dir;  // empty: the member's generated directory
  uint32_t processes = 1;
};

// Scheduler fields kept as metadata; only local launches are supported.
struct BatchSettings {
  std::string account;
  std::string queue;
  std::string walltime;
};

enum class EntityStatus { created, generated, running, completed, failed, stopped };

const char* status_name(EntityStatus s);
std::optional<EntityStatus> status_from_name(const std::string& s);
bool is_terminal(EntityStatus s);

struct ModelHandle {
  std::string name;
  RunSettings run;
  std::map<std::string, std::string> params;
  std::vector<std::filesystem::path> templates;
  EntityStatus status = EntityStatus::created;
  std::filesystem::path dir;
  std::vector<pid_t> pids;
  std::vector<int> exit_codes;
};

struct Strategy {
  enum class Kind { all_permutations, step, replicas };
  Kind kind = Kind::all_permutations;
  size_t replicas = 0;

  static Strategy all_permutations() { return {Kind::all_permutations, 0}; }
  static Strategy step() { return {Kind::step, 0}; }
  static Strategy replicas_of(size_t n) { return {Kind::replicas, n}; }
};

const char* strategy_name(Strategy::Kind k);

struct Ensemble {
  std::string name;
  std::vector<ModelHandle> members;
  Strategy strategy;
  std::optional<BatchSettings> batch;

  void attach_generator_files(const std::vector<std::filesystem::path>& templates);
};

using ParamLists = std::map<std::string, std::vector<std::string>>;

// all-permutations: Cartesian product (last parameter name varies fastest);
// step: zips equal-length lists; replicas(n): n members, each parameter list
// must hold at most one value. Members are named "<name>_<index>".
// Throws EmptyParams, UnequalLengths, BadCount.
Ensemble create_ensemble(
    const std::string& name, const ParamLists& params, Strategy strategy,
    const RunSettings& run);

struct LaunchReport {
  std::vector<std::pair<std::string, std::vector<pid_t>>> launched;
  std::chrono::nanoseconds elapsed{0};
};

// Replaces every ";name;" token; unknown names throw MissingParam.
std::string substitute_params(
    const std::string& text, const std::map<std::string, std::string>& params);

// Owns entities and their processes under one root directory.
class Experiment {
 public:
  Experiment(std::string name, std::filesystem::path root);
  ~Experiment();

  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  ModelHandle& create_model(
      const std::string& name, const RunSettings& run,
      std::map<std::string, std::string> params = {});
  Ensemble& create_ensemble(
      const std::string& name, const ParamLists& params, Strategy strategy,
      const RunSettings& run);
  Ensemble& add(Ensemble e);

  // Writes "<root>/<member>/" with templates copied and tokens replaced.
  // Throws TemplateNotFound, MissingParam.
  void generate(ModelHandle& m);
  void generate(Ensemble& e);

  // Throws SpawnFailed, AlreadyRunning, BadState (not generated).
  LaunchReport start(ModelHandle& m, bool block = false);
  LaunchReport start(Ensemble& e, bool block = false);
  EntityStatus poll(ModelHandle& m);
  std::vector<EntityStatus> poll(Ensemble& e);
  void stop(ModelHandle& m);
  void stop(Ensemble& e);
  // Only from terminal states; otherwise AlreadyRunning / BadState.
  LaunchReport restart(ModelHandle& m, bool block = false);
  LaunchReport restart(Ensemble& e, bool block = false);

  // Polls until every member is terminal or the timeout passes. Returns true
  // when all finished.
  bool wait(Ensemble& e, std::chrono::milliseconds timeout);
  bool wait(ModelHandle& m, std::chrono::milliseconds timeout);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest_path() const { return root_ / "manifest"; }
  void write_manifest() const;

  // Leaves running members alive when the experiment is destroyed.
  void detach() { detached_ = true; }

 private:
  void launch(ModelHandle& m);
  void wait_all(std::vector<ModelHandle*> members);

  std::string name_;
  std::filesystem::path root_;
  std::list<ModelHandle> models_;
  std::list<Ensemble> ensembles_;
  bool detached_ = false;
};

struct OrchestratorOptions {
  // Empty: $ORCA_SHARD_EXE, then orca-shard next to the running binary,
  // then orca-shard on PATH.
  std::string shard_exe;
  std::string host = "127.0.0.1";
  uint32_t workers = 1;
  std::chrono::milliseconds start_timeout{10000};
  // Topology file and shard logs; empty creates a temporary directory.
  std::filesystem::path dir;
};

// A running set of shard processes. Stops them on destruction.
class Orchestrator {
 public:
  Orchestrator() = default;
  Orchestrator(Orchestrator&& o) noexcept;
  Orchestrator& operator=(Orchestrator&& o) noexcept;
  ~Orchestrator();

  const ClusterTopology& topology() const { return topology_; }
  std::string seed_address() const { return topology_.shards().front().address; }
  const std::vector<pid_t>& pids() const { return pids_; }
  const std::filesystem::path& dir() const { return dir_; }
  void stop();

 private:
  friend Orchestrator launch_orchestrator(size_t, uint16_t, OrchestratorOptions);

  ClusterTopology topology_;
  std::vector<pid_t> pids_;
  std::filesystem::path dir_;
  bool owns_dir_ = false;
};

// Starts n shards on consecutive ports from base_port (0 picks free ports),
// writes the topology file, and waits for every shard to answer PING.
// Throws PortInUse, ShardStartTimeout, SpawnFailed.
Orchestrator launch_orchestrator(size_t n_shards, uint16_t base_port, OrchestratorOptions options = {});

std::string default_shard_exe();

// Sends PING; returns false on any failure.
bool ping_shard(const std::string& address, std::chrono::milliseconds timeout);

}  // namespace orca
