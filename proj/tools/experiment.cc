// Local experiment driver: builds models/ensembles from a JSON config,
// generates their directories, launches them, and inspects or stops a
// previously launched experiment through its manifest.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orca/error.h"
#include "orca/launcher.h"
#include "orca/process.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

orca::RunSettings
run_settings(const json& j)
{
  orca::RunSettings r;
  r.exe = j.at("exe").get<std::string>();
  r.args = j.value("args", std::vector<std::string>{});
  r.env = j.value("env", std::map<std::string, std::string>{});
  if (j.contains("working_dir")) r.working_dir = j["working_dir"].get<std::string>();
  r.processes = j.value("processes", 1u);
  return r;
}

orca::Strategy
strategy(const json& j)
{
  const std::string s = j.value("strategy", "all-permutations");
  if (s == "all-permutations") return orca::Strategy::all_permutations();
  if (s == "step") return orca::Strategy::step();
  if (s == "replicas") return orca::Strategy::replicas_of(j.at("replicas").get<size_t>());
  throw orca::Error(orca::ErrorCode::Malformed, "unknown strategy '" + s + "'");
}

std::vector<fs::path>
templates(const json& j, const fs::path& base)
{
  std::vector<fs::path> out;
  for (const auto& t : j.value("templates", std::vector<std::string>{})) {
    fs::path p(t);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

int
run(const std::string& config_path, bool detach)
{
  std::ifstream in(config_path);
  if (!in) {
    throw orca::Error(orca::ErrorCode::IoError, "cannot read " + config_path);
  }
  const json cfg = json::parse(in);
  const fs::path base = fs::absolute(config_path).parent_path();
  fs::path root = cfg.value("path", cfg.at("name").get<std::string>());
  if (root.is_relative()) root = base / root;

  orca::Experiment exp(cfg.at("name").get<std::string>(), root);
  std::vector<orca::ModelHandle*> models;
  std::vector<orca::Ensemble*> ensembles;
  for (const auto& m : cfg.value("models", json::array())) {
    auto& h = exp.create_model(
        m.at("name").get<std::string>(), run_settings(m),
        m.value("params", std::map<std::string, std::string>{}));
    h.templates = templates(m, base);
    models.push_back(&h);
  }
  for (const auto& e : cfg.value("ensembles", json::array())) {
    auto& ens = exp.create_ensemble(
        e.at("name").get<std::string>(), e.value("params", orca::ParamLists{}), strategy(e),
        run_settings(e));
    ens.attach_generator_files(templates(e, base));
    if (e.contains("batch")) {
      const auto& b = e["batch"];
      ens.batch = orca::BatchSettings{
          b.value("account", ""), b.value("queue", ""), b.value("walltime", "")};
    }
    ensembles.push_back(&ens);
  }

  for (auto* m : models) exp.generate(*m);
  for (auto* e : ensembles) exp.generate(*e);
  for (auto* m : models) exp.start(*m, false);
  for (auto* e : ensembles) exp.start(*e, false);
  std::cout << "experiment " << root.string() << " started" << std::endl;

  if (detach) {
    exp.detach();
    return 0;
  }
  bool ok = true;
  auto report = [&](const orca::ModelHandle& m) {
    std::cout << m.name << " " << orca::status_name(m.status) << std::endl;
    ok = ok && m.status == orca::EntityStatus::completed;
  };
  for (auto* m : models) {
    exp.wait(*m, std::chrono::hours(24 * 365));
    report(*m);
  }
  for (auto* e : ensembles) {
    exp.wait(*e, std::chrono::hours(24 * 365));
    for (const auto& m : e->members) report(m);
  }
  return ok ? 0 : 1;
}

json
load_manifest(const fs::path& dir)
{
  std::ifstream in(dir / "manifest");
  if (!in) {
    throw orca::Error(orca::ErrorCode::IoError, "no manifest in " + dir.string());
  }
  return json::parse(in);
}

// Visits every member record in the manifest.
template <typename F>
void
for_members(json& manifest, F&& f)
{
  for (auto& ent : manifest.at("entities")) {
    if (ent.value("type", "") == "ensemble") {
      for (auto& m : ent.at("members")) f(m);
    } else {
      f(ent);
    }
  }
}

// A detached member is still "running" in the manifest; check its pids.
std::string
live_status(const json& m)
{
  const std::string recorded = m.value("status", "");
  if (recorded != "running") return recorded;
  for (pid_t p : m.value("pids", std::vector<pid_t>{})) {
    if (orca::proc::alive(p)) return "running";
  }
  return "exited";
}

int
status(const fs::path& dir)
{
  json manifest = load_manifest(dir);
  for_members(manifest, [](json& m) {
    std::cout << m.value("name", "?") << " " << live_status(m) << std::endl;
  });
  return 0;
}

int
stop(const fs::path& dir)
{
  json manifest = load_manifest(dir);
  for_members(manifest, [](json& m) {
    if (live_status(m) != "running") return;
    for (pid_t p : m.value("pids", std::vector<pid_t>{})) {
      ::kill(p, SIGTERM);
    }
    m["status"] = "stopped";
    std::cout << m.value("name", "?") << " stopped" << std::endl;
  });
  std::ofstream(dir / "manifest", std::ios::trunc) << manifest.dump(2) << "\n";
  return 0;
}

}  // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"experiment: launch and manage local ensembles"};
  app.require_subcommand(1);

  std::string config;
  bool detach = false;
  auto* run_cmd = app.add_subcommand("run", "generate and launch every entity in a config");
  run_cmd->add_option("config", config, "experiment JSON config")->required();
  run_cmd->add_flag("--detach", detach, "return after launch instead of waiting");

  std::string dir = ".";
  auto* status_cmd = app.add_subcommand("status", "print member statuses from a manifest");
  status_cmd->add_option("dir", dir, "experiment directory");
  auto* stop_cmd = app.add_subcommand("stop", "terminate running members of an experiment");
  stop_cmd->add_option("dir", dir, "experiment directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(config, detach);
    if (*status_cmd) return status(dir);
    if (*stop_cmd) return stop(dir);
  }
  catch (const std::exception& e) {
    std::cerr << "experiment: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
