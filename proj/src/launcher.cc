#include "orca/launcher.h"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "orca/error.h"
#include "orca/net.h"
#include "orca/process.h"
#include "orca/protocol.h"

namespace fs = std::filesystem;

namespace orca {

const char*
status_name(EntityStatus s)
{
  switch (s) {
    case EntityStatus::created: return "created";
    case EntityStatus::generated: return "generated";
    case EntityStatus::running: return "running";
    case EntityStatus::completed: return "completed";
    case EntityStatus::failed: return "failed";
    case EntityStatus::stopped: return "stopped";
  }
  return "?";
}

std::optional<EntityStatus>
status_from_name(const std::string& s)
{
  for (auto st : {EntityStatus::created, EntityStatus::generated, EntityStatus::running,
                  EntityStatus::completed, EntityStatus::failed, EntityStatus::stopped}) {
    if (s == status_name(st)) {
      return st;
    }
  }
  return std::nullopt;
}

bool
is_terminal(EntityStatus s)
{
  return s == EntityStatus::completed || s == EntityStatus::failed ||
         s == EntityStatus::stopped;
}

const char*
strategy_name(Strategy::Kind k)
{
  switch (k) {
    case Strategy::Kind::all_permutations: return "all-permutations";
    case Strategy::Kind::step: return "step";
    case Strategy::Kind::replicas: return "replicas";
  }
  return "?";
}

void
Ensemble::attach_generator_files(const std::vector<fs::path>& templates)
{
  for (auto& m : members) {
    m.templates = templates;
  }
}

Ensemble
create_ensemble(
    const std::string& name, const ParamLists& params, Strategy strategy, const RunSettings& run)
{
  if (run.exe.empty()) {
    throw Error(ErrorCode::SpawnFailed, "run settings need an executable");
  }
  Ensemble e;
  e.name = name;
  e.strategy = strategy;
  std::vector<std::map<std::string, std::string>> sets;

  switch (strategy.kind) {
    case Strategy::Kind::all_permutations: {
      if (params.empty()) {
        throw Error(ErrorCode::EmptyParams, "all-permutations needs parameters");
      }
      sets.emplace_back();
      for (const auto& [key, values] : params) {
        if (values.empty()) {
          throw Error(ErrorCode::EmptyParams, "parameter '" + key + "' has no values");
        }
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& base : sets) {
          for (const auto& v : values) {
            auto s = base;
            s[key] = v;
            next.push_back(std::move(s));
          }
        }
        sets = std::move(next);
      }
      break;
    }
    case Strategy::Kind::step: {
      if (params.empty()) {
        throw Error(ErrorCode::EmptyParams, "step needs parameters");
      }
      const size_t len = params.begin()->second.size();
      for (const auto& [key, values] : params) {
        if (values.size() != len) {
          throw Error(ErrorCode::UnequalLengths, "step parameters must have equal lengths");
        }
      }
      if (len == 0) {
        throw Error(ErrorCode::EmptyParams, "step parameters are empty");
      }
      for (size_t i = 0; i < len; ++i) {
        std::map<std::string, std::string> s;
        for (const auto& [key, values] : params) {
          s[key] = values[i];
        }
        sets.push_back(std::move(s));
      }
      break;
    }
    case Strategy::Kind::replicas: {
      if (strategy.replicas < 1) {
        throw Error(ErrorCode::BadCount, "replicas needs n >= 1");
      }
      std::map<std::string, std::string> s;
      for (const auto& [key, values] : params) {
        if (values.size() > 1) {
          throw Error(
              ErrorCode::UnequalLengths, "replicas take single-valued parameters; '" + key +
                                             "' has " + std::to_string(values.size()));
        }
        if (!values.empty()) {
          s[key] = values[0];
        }
      }
      sets.assign(strategy.replicas, s);
      break;
    }
  }

  for (size_t i = 0; i < sets.size(); ++i) {
    ModelHandle m;
    m.name = name + "_" + std::to_string(i);
    m.run = run;
    m.params = std::move(sets[i]);
    e.members.push_back(std::move(m));
  }
  return e;
}

std::string
substitute_params(const std::string& text, const std::map<std::string, std::string>& params)
{
  static const std::regex token(";([A-Za-z_][A-Za-z0-9_]*);");
  std::string out;
  auto begin = std::sregex_iterator(text.begin(), text.end(), token);
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::string key = m[1].str();
    auto p = params.find(key);
    if (p == params.end()) {
      throw Error(ErrorCode::MissingParam, "no value for ;" + key + ";");
    }
    out.append(text, last, static_cast<size_t>(m.position(0)) - last);
    out += p->second;
    last = static_cast<size_t>(m.position(0) + m.length(0));
  }
  out.append(text, last, std::string::npos);
  return out;
}

Experiment::Experiment(std::string name, fs::path root)
    : name_(std::move(name)), root_(std::move(root))
{
  fs::create_directories(root_);
}

Experiment::~Experiment()
{
  if (detached_) {
    return;
  }
  for (auto& m : models_) {
    if (m.status == EntityStatus::running) stop(m);
  }
  for (auto& e : ensembles_) {
    for (auto& m : e.members) {
      if (m.status == EntityStatus::running) stop(m);
    }
  }
}

ModelHandle&
Experiment::create_model(
    const std::string& name, const RunSettings& run, std::map<std::string, std::string> params)
{
  if (run.exe.empty()) {
    throw Error(ErrorCode::SpawnFailed, "run settings need an executable");
  }
  ModelHandle m;
  m.name = name;
  m.run = run;
  m.params = std::move(params);
  models_.push_back(std::move(m));
  return models_.back();
}

Ensemble&
Experiment::create_ensemble(
    const std::string& name, const ParamLists& params, Strategy strategy, const RunSettings& run)
{
  return add(orca::create_ensemble(name, params, strategy, run));
}

Ensemble&
Experiment::add(Ensemble e)
{
  ensembles_.push_back(std::move(e));
  return ensembles_.back();
}

void
Experiment::generate(ModelHandle& m)
{
  if (m.status == EntityStatus::running) {
    throw Error(ErrorCode::AlreadyRunning, m.name + " is running");
  }
  // Render everything first so a bad template leaves no partial tree.
  std::vector<std::pair<fs::path, std::string>> rendered;
  for (const auto& t : m.templates) {
    std::ifstream in(t, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::TemplateNotFound, t.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    rendered.emplace_back(t.filename(), substitute_params(ss.str(), m.params));
  }
  m.dir = root_ / m.name;
  fs::create_directories(m.dir);
  for (const auto& [fname, text] : rendered) {
    std::ofstream out(m.dir / fname, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write " + (m.dir / fname).string());
    }
  }
  m.status = EntityStatus::generated;
  write_manifest();
}

void
Experiment::generate(Ensemble& e)
{
  for (auto& m : e.members) {
    generate(m);
  }
}

void
Experiment::launch(ModelHandle& m)
{
  if (m.status == EntityStatus::running) {
    throw Error(ErrorCode::AlreadyRunning, m.name + " is already running");
  }
  if (m.status == EntityStatus::created) {
    throw Error(ErrorCode::BadState, m.name + " has not been generated");
  }
  m.pids.clear();
  m.exit_codes.clear();
  const uint32_t copies = std::max<uint32_t>(m.run.processes, 1);
  try {
    for (uint32_t i = 0; i < copies; ++i) {
      proc::SpawnSpec spec;
      spec.exe = m.run.exe;
      spec.args = m.run.args;
      spec.env = m.run.env;
      spec.cwd = m.run.working_dir.empty() ? m.dir : m.run.working_dir;
      const std::string suffix = copies > 1 ? "." + std::to_string(i) : "";
      spec.stdout_path = m.dir / (m.name + suffix + ".out");
      spec.stderr_path = m.dir / (m.name + suffix + ".err");
      m.pids.push_back(proc::spawn(spec));
    }
  }
  catch (...) {
    for (pid_t p : m.pids) proc::terminate(p, std::chrono::milliseconds(200));
    m.pids.clear();
    m.status = EntityStatus::failed;
    throw;
  }
  m.exit_codes.assign(m.pids.size(), -1);
  m.status = EntityStatus::running;
}

LaunchReport
Experiment::start(ModelHandle& m, bool block)
{
  const auto t0 = std::chrono::steady_clock::now();
  launch(m);
  LaunchReport r;
  r.launched.emplace_back(m.name, m.pids);
  write_manifest();
  if (block) {
    wait_all({&m});
  }
  r.elapsed = std::chrono::steady_clock::now() - t0;
  return r;
}

LaunchReport
Experiment::start(Ensemble& e, bool block)
{
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& m : e.members) {
    if (m.status == EntityStatus::running) {
      throw Error(ErrorCode::AlreadyRunning, m.name + " is already running");
    }
    if (m.status == EntityStatus::created) {
      throw Error(ErrorCode::BadState, m.name + " has not been generated");
    }
  }
  LaunchReport r;
  std::vector<ModelHandle*> started;
  try {
    for (auto& m : e.members) {
      launch(m);
      started.push_back(&m);
      r.launched.emplace_back(m.name, m.pids);
    }
  }
  catch (...) {
    for (auto* m : started) stop(*m);
    write_manifest();
    throw;
  }
  write_manifest();
  if (block) {
    wait_all(started);
  }
  r.elapsed = std::chrono::steady_clock::now() - t0;
  return r;
}

EntityStatus
Experiment::poll(ModelHandle& m)
{
  if (m.status != EntityStatus::running) {
    return m.status;
  }
  bool all_done = true;
  bool any_failed = false;
  for (size_t i = 0; i < m.pids.size(); ++i) {
    if (m.exit_codes[i] == -1) {
      if (auto s = proc::try_wait(m.pids[i])) {
        m.exit_codes[i] = s->signaled ? 128 + s->code : s->code;
      }
    }
    if (m.exit_codes[i] == -1) {
      all_done = false;
    } else if (m.exit_codes[i] != 0) {
      any_failed = true;
    }
  }
  if (all_done) {
    m.status = any_failed ? EntityStatus::failed : EntityStatus::completed;
    write_manifest();
  }
  return m.status;
}

std::vector<EntityStatus>
Experiment::poll(Ensemble& e)
{
  std::vector<EntityStatus> out;
  for (auto& m : e.members) {
    out.push_back(poll(m));
  }
  return out;
}

void
Experiment::stop(ModelHandle& m)
{
  if (m.status != EntityStatus::running) {
    return;
  }
  for (size_t i = 0; i < m.pids.size(); ++i) {
    if (m.exit_codes[i] == -1) {
      const auto s = proc::terminate(m.pids[i]);
      m.exit_codes[i] = s.signaled ? 128 + s.code : s.code;
    }
  }
  m.status = EntityStatus::stopped;
  write_manifest();
}

void
Experiment::stop(Ensemble& e)
{
  for (auto& m : e.members) {
    stop(m);
  }
}

LaunchReport
Experiment::restart(ModelHandle& m, bool block)
{
  poll(m);
  if (!is_terminal(m.status)) {
    throw Error(
        m.status == EntityStatus::running ? ErrorCode::AlreadyRunning : ErrorCode::BadState,
        m.name + " is " + status_name(m.status) + "; restart needs a finished entity");
  }
  m.status = EntityStatus::generated;
  return start(m, block);
}

LaunchReport
Experiment::restart(Ensemble& e, bool block)
{
  poll(e);
  for (const auto& m : e.members) {
    if (!is_terminal(m.status)) {
      throw Error(
          m.status == EntityStatus::running ? ErrorCode::AlreadyRunning : ErrorCode::BadState,
          m.name + " is " + status_name(m.status) + "; restart needs a finished entity");
    }
  }
  for (auto& m : e.members) {
    m.status = EntityStatus::generated;
  }
  return start(e, block);
}

void
Experiment::wait_all(std::vector<ModelHandle*> members)
{
  for (;;) {
    bool done = true;
    for (auto* m : members) {
      if (!is_terminal(poll(*m))) {
        done = false;
      }
    }
    if (done) {
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

bool
Experiment::wait(Ensemble& e, std::chrono::milliseconds timeout)
{
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    bool done = true;
    for (auto s : poll(e)) {
      if (!is_terminal(s)) done = false;
    }
    if (done) return true;
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

bool
Experiment::wait(ModelHandle& m, std::chrono::milliseconds timeout)
{
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!is_terminal(poll(m))) {
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return true;
}

namespace {

nlohmann::ordered_json
member_json(const ModelHandle& m)
{
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["dir"] = m.dir.string();
  j["status"] = status_name(m.status);
  j["exe"] = m.run.exe;
  j["args"] = m.run.args;
  j["params"] = m.params;
  j["pids"] = m.pids;
  j["exit_codes"] = m.exit_codes;
  return j;
}

}  // namespace

void
Experiment::write_manifest() const
{
  nlohmann::ordered_json j;
  j["experiment"] = name_;
  j["path"] = root_.string();
  j["entities"] = nlohmann::ordered_json::array();
  for (const auto& m : models_) {
    auto mj = member_json(m);
    mj["type"] = "model";
    j["entities"].push_back(mj);
  }
  for (const auto& e : ensembles_) {
    nlohmann::ordered_json ej;
    ej["type"] = "ensemble";
    ej["name"] = e.name;
    ej["strategy"] = strategy_name(e.strategy.kind);
    if (e.batch) {
      ej["batch"] = {{"account", e.batch->account}, {"queue", e.batch->queue},
                     {"walltime", e.batch->walltime}};
    }
    ej["members"] = nlohmann::ordered_json::array();
    for (const auto& m : e.members) {
      ej["members"].push_back(member_json(m));
    }
    j["entities"].push_back(ej);
  }
  const fs::path tmp = root_ / "manifest.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, manifest_path());
}

std::string
default_shard_exe()
{
  if (const char* env = std::getenv("ORCA_SHARD_EXE"); env && *env) {
    return env;
  }
  const fs::path sibling = proc::self_dir() / "orca-shard";
  if (fs::exists(sibling)) {
    return sibling.string();
  }
  return "orca-shard";
}

bool
ping_shard(const std::string& address, std::chrono::milliseconds timeout)
{
  try {
    const auto hp = net::parse_address(address);
    net::Socket s = net::connect_tcp(hp.host, hp.port, timeout);
    wire::Request req;
    req.command = wire::Command::ping;
    req.request_id = 1;
    s.write_all(wire::encode_request(req));
    auto frame = s.read_frame(wire::kMaxFrame);
    if (!frame) return false;
    const auto resp = wire::decode_response(*frame);
    return resp.status == wire::Status::ok && resp.version == wire::kVersion;
  }
  catch (const std::exception&) {
    return false;
  }
}

Orchestrator::Orchestrator(Orchestrator&& o) noexcept
    : topology_(std::move(o.topology_)), pids_(std::move(o.pids_)), dir_(std::move(o.dir_)),
      owns_dir_(std::exchange(o.owns_dir_, false))
{
  o.pids_.clear();
}

Orchestrator&
Orchestrator::operator=(Orchestrator&& o) noexcept
{
  if (this != &o) {
    stop();
    topology_ = std::move(o.topology_);
    pids_ = std::move(o.pids_);
    o.pids_.clear();
    dir_ = std::move(o.dir_);
    owns_dir_ = std::exchange(o.owns_dir_, false);
  }
  return *this;
}

Orchestrator::~Orchestrator()
{
  stop();
}

void
Orchestrator::stop()
{
  for (pid_t p : pids_) {
    proc::terminate(p, std::chrono::milliseconds(2000));
  }
  pids_.clear();
  if (owns_dir_) {
    std::error_code ec;
    fs::remove_all(dir_, ec);
    owns_dir_ = false;
  }
}

Orchestrator
launch_orchestrator(size_t n_shards, uint16_t base_port, OrchestratorOptions options)
{
  if (n_shards < 1) {
    throw Error(ErrorCode::BadCount, "need at least one shard");
  }
  std::vector<uint16_t> ports;
  if (base_port == 0) {
    // Hold all ephemeral listeners at once so the ports are distinct.
    std::vector<net::Listener> probes;
    for (size_t i = 0; i < n_shards; ++i) {
      probes.emplace_back(options.host, 0);
      ports.push_back(probes.back().port());
    }
  } else {
    for (size_t i = 0; i < n_shards; ++i) {
      const uint32_t p = base_port + static_cast<uint32_t>(i);
      if (p > 65535 || !net::port_free(options.host, static_cast<uint16_t>(p))) {
        throw Error(ErrorCode::PortInUse, net::format_address(options.host, static_cast<uint16_t>(p)));
      }
      ports.push_back(static_cast<uint16_t>(p));
    }
  }

  std::vector<std::string> addresses;
  for (uint16_t p : ports) {
    addresses.push_back(net::format_address(options.host, p));
  }

  Orchestrator orc;
  orc.topology_ = plan_topology(n_shards, addresses);
  if (options.dir.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "orca-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) {
      throw Error(ErrorCode::IoError, "cannot create orchestrator directory");
    }
    orc.dir_ = tmpl;
    orc.owns_dir_ = true;
  } else {
    orc.dir_ = options.dir;
    fs::create_directories(orc.dir_);
  }
  const fs::path topo_file = orc.dir_ / "topology.txt";
  write_topology_file(topo_file.string(), orc.topology_);

  const std::string exe = options.shard_exe.empty() ? default_shard_exe() : options.shard_exe;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned threads = std::max<unsigned>(1, hw / static_cast<unsigned>(n_shards));

  for (size_t i = 0; i < n_shards; ++i) {
    proc::SpawnSpec spec;
    spec.exe = exe;
    spec.args = {"--listen", addresses[i], "--shard-id", std::to_string(i), "--topology",
                 topo_file.string(), "--workers", std::to_string(options.workers)};
    spec.env["OMP_NUM_THREADS"] = std::to_string(threads);
    spec.stdout_path = orc.dir_ / ("shard_" + std::to_string(i) + ".out");
    spec.stderr_path = orc.dir_ / ("shard_" + std::to_string(i) + ".err");
    orc.pids_.push_back(proc::spawn(spec));
  }

  const auto deadline = std::chrono::steady_clock::now() + options.start_timeout;
  for (size_t i = 0; i < n_shards; ++i) {
    for (;;) {
      if (ping_shard(addresses[i], std::chrono::milliseconds(500))) {
        break;
      }
      if (auto st = proc::try_wait(orc.pids_[i])) {
        orc.pids_[i] = -1;
        std::ifstream err(orc.dir_ / ("shard_" + std::to_string(i) + ".err"));
        std::stringstream ss;
        ss << err.rdbuf();
        const bool bind_failed = ss.str().find("PortInUse") != std::string::npos;
        std::erase(orc.pids_, -1);
        throw Error(
            bind_failed ? ErrorCode::PortInUse : ErrorCode::ShardStartTimeout,
            "shard " + std::to_string(i) + " exited during startup: " + ss.str());
      }
      if (std::chrono::steady_clock::now() > deadline) {
        throw Error(
            ErrorCode::ShardStartTimeout, "shard " + std::to_string(i) + " at " +
                                              addresses[i] + " did not answer PING");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  return orc;
}

}  // namespace orca
