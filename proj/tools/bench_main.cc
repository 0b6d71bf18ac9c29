// Scaling benchmark driver. "bench run" sweeps clients x shards on fresh
// clusters; "bench client" is the per-process client loop it spawns.

#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "orca/bench.h"
#include "orca/error.h"
#include "orca/launcher.h"
#include "orca/process.h"

namespace {

std::vector<uint32_t>
parse_list(const std::string& s)
{
  std::vector<uint32_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<uint32_t>(std::stoul(item)));
  }
  return out;
}

}  // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"bench: per-call latency across client and shard counts"};
  app.require_subcommand(1);

  std::string clients = "2,8,32", shards = "1,2,4", out = "bench_out", shard_exe;
  uint32_t iters = 10, min_samples = 0, rows = 16, cols = 32, hidden = 64, batch = 10000;
  auto* run_cmd = app.add_subcommand("run", "run the benchmark matrix");
  run_cmd->add_option("--clients", clients, "comma-separated client counts");
  run_cmd->add_option("--shards", shards, "comma-separated shard counts");
  run_cmd->add_option("--iters", iters, "iterations per client")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--min-samples", min_samples, "repeat cells until each has this many samples");
  run_cmd->add_option("--rows", rows, "tensor rows");
  run_cmd->add_option("--cols", cols, "tensor columns (model width)");
  run_cmd->add_option("--hidden", hidden, "hidden width of the MLP");
  run_cmd->add_option("--batch-size", batch, "model batch size");
  run_cmd->add_option("--shard-exe", shard_exe, "orca-shard executable");

  std::string seed_address;
  uint32_t id = 0;
  uint64_t seed = 0;
  auto* client_cmd = app.add_subcommand("client", "one client process (spawned by run)");
  client_cmd->add_option("--seed-address", seed_address, "any shard's host:port")->required();
  client_cmd->add_option("--id", id, "client id");
  client_cmd->add_option("--iters", iters, "iterations");
  client_cmd->add_option("--rows", rows, "tensor rows");
  client_cmd->add_option("--cols", cols, "tensor columns");
  client_cmd->add_option("--seed", seed, "data seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*client_cmd) {
      orca::bench::Workload w;
      w.rows = rows;
      w.cols = cols;
      auto client = orca::Client::connect(seed_address);
      const auto records = orca::bench::client_loop(client, w, id, iters, seed);
      std::cout << orca::bench::format_records(records);
      return 0;
    }

    orca::bench::BenchConfig config;
    config.client_counts = parse_list(clients);
    config.shard_counts = parse_list(shards);
    config.iterations = iters;
    config.min_samples = min_samples;
    config.workload = orca::bench::default_workload(rows, cols, hidden);
    config.workload.batch_size = batch;
    config.out_dir = out;
    config.client_exe = (orca::proc::self_dir() / "bench").string();
    config.shard_exe = shard_exe;

    const auto result = orca::bench::run_matrix(config);
    bool any_failed = false;
    for (const auto& c : result.cells) {
      std::cerr << "cell clients=" << c.cell.clients << " shards=" << c.cell.shards
                << " repeats=" << c.repeats << " wall="
                << std::chrono::duration<double>(c.wall).count() << "s"
                << (c.failed ? " FAILED: " + c.error : "") << std::endl;
      any_failed = any_failed || c.failed;
    }
    if (result.records.empty()) {
      std::cerr << "bench: no cell produced records" << std::endl;
      return 1;
    }
    const auto summary = orca::bench::summarize(result.records);
    orca::bench::emit(out, summary, result.records);
    std::cout << std::left << std::setw(8) << "clients" << std::setw(8) << "shards"
              << std::setw(15) << "api" << std::setw(8) << "n" << std::setw(14) << "mean_ms"
              << std::setw(14) << "median_ms" << "max_ms\n";
    for (const auto& [key, s] : summary) {
      std::cout << std::left << std::setw(8) << key.first.clients << std::setw(8)
                << key.first.shards << std::setw(15) << orca::bench::api_name(key.second)
                << std::setw(8) << s.n << std::setw(14) << s.mean * 1e3 << std::setw(14)
                << s.median * 1e3 << s.max * 1e3 << "\n";
    }
    return any_failed ? 1 : 0;
  }
  catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << std::endl;
    return 2;
  }
}
