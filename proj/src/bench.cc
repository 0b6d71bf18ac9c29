#include "orca/bench.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "orca/error.h"
#include "orca/launcher.h"
#include "orca/model.h"
#include "orca/process.h"

namespace fs = std::filesystem;

namespace orca::bench {

const char*
api_name(ApiCall a)
{
  switch (a) {
    case ApiCall::put_tensor: return "put_tensor";
    case ApiCall::run_script: return "run_script";
    case ApiCall::run_model: return "run_model";
    case ApiCall::unpack_tensor: return "unpack_tensor";
  }
  return "?";
}

ApiCall
api_from_name(const std::string& s)
{
  for (ApiCall a : kApiCalls) {
    if (s == api_name(a)) return a;
  }
  throw Error(ErrorCode::Malformed, "unknown api '" + s + "'");
}

Workload
default_workload(uint32_t rows, uint32_t cols, uint32_t hidden)
{
  std::mt19937_64 rng(42);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  auto dense = [&](uint32_t in, uint32_t out) {
    DenseLayer d;
    d.in = in;
    d.out = out;
    const float scale = 1.0f / std::sqrt(static_cast<float>(in));
    d.weights.resize(static_cast<size_t>(in) * out);
    for (auto& w : d.weights) w = nd(rng) * scale;
    d.bias.assign(out, 0.01f);
    return d;
  };
  Workload w;
  w.rows = rows;
  w.cols = cols;
  w.model_blob = encode_model(
      {dense(cols, hidden), ReluLayer{}, dense(hidden, hidden), TanhLayer{}, dense(hidden, cols)});
  w.script.name = w.script_name;
  w.script.arity = 1;
  w.script.steps = {ScriptStep{std::nullopt, ScriptOp::standardize, 0.0, 1.0}};
  w.script.finalize = Finalize::single;
  w.script.output_dtype = DType::f32;
  return w;
}

std::vector<TimingRecord>
client_loop(
    Client& client, const Workload& w, uint32_t client_id, uint32_t iterations, uint64_t seed)
{
  const std::string tag = "{c" + std::to_string(client_id) + "}";
  const std::string in = tag + ".in", pre = tag + ".pre", out = tag + ".out";
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (client_id + 1)));
  std::uniform_real_distribution<float> ud(-1.0f, 1.0f);
  std::vector<float> values(static_cast<size_t>(w.rows) * w.cols);

  std::vector<TimingRecord> records;
  records.reserve(static_cast<size_t>(iterations) * 4);
  auto timed = [&](uint32_t it, ApiCall api, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    TimingRecord r;
    r.client = client_id;
    r.iteration = it;
    r.api = api;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    records.push_back(r);
  };
  for (uint32_t it = 0; it < iterations; ++it) {
    for (auto& v : values) v = ud(rng);
    const Tensor t = Tensor::from_values<float>({w.rows, w.cols}, values);
    timed(it, ApiCall::put_tensor, [&] { client.put_tensor(in, t); });
    timed(it, ApiCall::run_script, [&] { client.run_script(w.script_name, {in}, pre); });
    timed(it, ApiCall::run_model, [&] { client.run_model(w.model_name, {pre}, {out}); });
    Tensor result;
    timed(it, ApiCall::unpack_tensor, [&] { result = client.get_tensor(out); });
    if (result.shape() != Shape{w.rows, w.cols}) {
      throw Error(ErrorCode::ShapeMismatch, "unexpected model output shape");
    }
  }
  return records;
}

uint32_t
repeats_for(const BenchConfig& c, uint32_t clients)
{
  const uint64_t per_run = static_cast<uint64_t>(clients) * c.iterations;
  if (c.min_samples == 0 || per_run == 0) return 1;
  return static_cast<uint32_t>(std::max<uint64_t>(1, (c.min_samples + per_run - 1) / per_run));
}

namespace {

std::string
read_file(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One fresh cluster, all clients concurrently; returns the cell's records.
std::vector<TimingRecord>
run_once(const BenchConfig& config, const Cell& cell, uint32_t repeat, const fs::path& dir)
{
  OrchestratorOptions opts;
  opts.shard_exe = config.shard_exe;
  opts.workers = config.shard_workers;
  opts.dir = dir / "cluster";
  Orchestrator orc = launch_orchestrator(cell.shards, 0, opts);

  {
    Client setup = Client::connect(orc.seed_address());
    setup.set_model(
        config.workload.model_name, config.workload.model_blob, config.workload.batch_size);
    setup.set_script(config.workload.script_name, config.workload.script);
  }
  if (config.cell_hook) {
    config.cell_hook(cell);
  }

  std::vector<pid_t> pids;
  std::vector<fs::path> outputs;
  try {
    for (uint32_t c = 0; c < cell.clients; ++c) {
      proc::SpawnSpec spec;
      spec.exe = config.client_exe;
      spec.args = {"client",   "--seed-address", orc.seed_address(), "--id", std::to_string(c),
                   "--iters",  std::to_string(config.iterations), "--rows",
                   std::to_string(config.workload.rows), "--cols",
                   std::to_string(config.workload.cols), "--seed", std::to_string(repeat)};
      spec.stdout_path = dir / ("client_" + std::to_string(c) + ".csv");
      spec.stderr_path = dir / ("client_" + std::to_string(c) + ".err");
      outputs.push_back(spec.stdout_path);
      pids.push_back(proc::spawn(spec));
    }
  }
  catch (...) {
    for (pid_t p : pids) proc::terminate(p, std::chrono::milliseconds(200));
    throw;
  }

  std::string failure;
  for (size_t i = 0; i < pids.size(); ++i) {
    const auto st = proc::wait(pids[i]);
    if (!st.success() && failure.empty()) {
      failure = "client " + std::to_string(i) + " exited with " +
                (st.signaled ? "signal " : "code ") + std::to_string(st.code) + ": " +
                read_file(dir / ("client_" + std::to_string(i) + ".err"));
    }
  }
  if (!failure.empty()) {
    throw Error(ErrorCode::CellFailed, failure);
  }

  std::vector<TimingRecord> records;
  for (size_t i = 0; i < outputs.size(); ++i) {
    auto part = parse_records(read_file(outputs[i]));
    if (part.size() != static_cast<size_t>(config.iterations) * 4) {
      throw Error(
          ErrorCode::CellFailed, "client " + std::to_string(i) + " reported " +
                                     std::to_string(part.size()) + " records");
    }
    for (auto& r : part) {
      r.cell = cell;
      r.repeat = repeat;
      records.push_back(r);
    }
  }
  return records;
}

}  // namespace

MatrixResult
run_matrix(const BenchConfig& config)
{
  if (config.client_counts.empty() || config.shard_counts.empty() || config.iterations == 0) {
    throw Error(ErrorCode::BadCount, "bench needs client counts, shard counts, iterations");
  }
  for (uint32_t v : config.client_counts) {
    if (v == 0) throw Error(ErrorCode::BadCount, "client count must be positive");
  }
  for (uint32_t v : config.shard_counts) {
    if (v == 0) throw Error(ErrorCode::BadCount, "shard count must be positive");
  }
  if (config.client_exe.empty()) {
    throw Error(ErrorCode::SpawnFailed, "bench needs a client executable");
  }
  fs::path root = config.out_dir;
  if (root.empty()) root = fs::temp_directory_path() / "orca-bench";
  fs::create_directories(root);

  MatrixResult result;
  for (uint32_t clients : config.client_counts) {
    for (uint32_t shards : config.shard_counts) {
      const Cell cell{clients, shards};
      CellResult cr;
      cr.cell = cell;
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<TimingRecord> cell_records;
      const uint32_t repeats = repeats_for(config, clients);
      try {
        for (uint32_t r = 0; r < repeats; ++r) {
          const fs::path dir = root / "cells" /
                               ("c" + std::to_string(clients) + "_s" + std::to_string(shards) +
                                "_r" + std::to_string(r));
          fs::remove_all(dir);
          fs::create_directories(dir);
          ++result.clusters_launched;
          auto part = run_once(config, cell, r, dir);
          cell_records.insert(cell_records.end(), part.begin(), part.end());
          ++cr.repeats;
        }
      }
      catch (const std::exception& e) {
        cr.failed = true;
        cr.error = e.what();
        cell_records.clear();
      }
      cr.wall = std::chrono::steady_clock::now() - t0;
      result.records.insert(result.records.end(), cell_records.begin(), cell_records.end());
      result.cells.push_back(std::move(cr));
    }
  }
  return result;
}

double
quantile(std::vector<double> sorted, double p)
{
  if (sorted.empty()) {
    throw Error(ErrorCode::EmptyGroup, "quantile of no samples");
  }
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary
summarize_values(std::vector<double> values)
{
  if (values.empty()) {
    throw Error(ErrorCode::EmptyGroup, "no samples");
  }
  std::sort(values.begin(), values.end());
  Summary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  return s;
}

std::map<SummaryKey, Summary>
summarize(const std::vector<TimingRecord>& records)
{
  if (records.empty()) {
    throw Error(ErrorCode::EmptyGroup, "no records to summarize");
  }
  std::map<SummaryKey, std::vector<double>> groups;
  for (const auto& r : records) {
    groups[{r.cell, r.api}].push_back(r.seconds);
  }
  std::map<SummaryKey, Summary> out;
  for (auto& [k, v] : groups) {
    out[k] = summarize_values(std::move(v));
  }
  return out;
}

namespace {

std::string
num(double v)
{
  std::ostringstream ss;
  ss << std::setprecision(9) << std::scientific << v;
  return ss.str();
}

void
write_file(const fs::path& p, const std::string& text)
{
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + p.string());
  }
}

}  // namespace

std::string
format_records(const std::vector<TimingRecord>& records)
{
  std::ostringstream ss;
  ss << kRecordsHeader << "\n";
  for (const auto& r : records) {
    ss << r.cell.clients << "," << r.cell.shards << "," << r.repeat << "," << r.client << ","
       << r.iteration << "," << api_name(r.api) << "," << num(r.seconds) << "\n";
  }
  return ss.str();
}

std::vector<TimingRecord>
parse_records(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  std::vector<TimingRecord> out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != kRecordsHeader) {
        throw Error(ErrorCode::Malformed, "unexpected records header: " + line);
      }
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) {
      throw Error(ErrorCode::Malformed, "bad record line: " + line);
    }
    try {
      TimingRecord r;
      r.cell.clients = static_cast<uint32_t>(std::stoul(f[0]));
      r.cell.shards = static_cast<uint32_t>(std::stoul(f[1]));
      r.repeat = static_cast<uint32_t>(std::stoul(f[2]));
      r.client = static_cast<uint32_t>(std::stoul(f[3]));
      r.iteration = static_cast<uint32_t>(std::stoul(f[4]));
      r.api = api_from_name(f[5]);
      r.seconds = std::stod(f[6]);
      if (!(r.seconds >= 0.0)) {
        throw Error(ErrorCode::Malformed, "negative elapsed time");
      }
      out.push_back(r);
    }
    catch (const std::logic_error&) {
      throw Error(ErrorCode::Malformed, "bad record line: " + line);
    }
  }
  if (header) {
    throw Error(ErrorCode::Malformed, "missing records header");
  }
  return out;
}

void
emit(
    const fs::path& dir, const std::map<SummaryKey, Summary>& summary,
    const std::vector<TimingRecord>& records)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  }
  std::ostringstream csv, box;
  csv << kSummaryHeader << "\n";
  box << "# clients shards api min q1 median q3 max mean n\n";
  for (const auto& [key, s] : summary) {
    const auto& [cell, api] = key;
    csv << cell.clients << "," << cell.shards << "," << api_name(api) << "," << s.n << ","
        << num(s.mean) << "," << num(s.median) << "," << num(s.q1) << "," << num(s.q3) << ","
        << num(s.min) << "," << num(s.max) << "\n";
    box << cell.clients << " " << cell.shards << " " << api_name(api) << " " << num(s.min) << " "
        << num(s.q1) << " " << num(s.median) << " " << num(s.q3) << " " << num(s.max) << " "
        << num(s.mean) << " " << s.n << "\n";
  }
  write_file(dir / "summary.csv", csv.str());
  write_file(dir / "boxplot.dat", box.str());
  write_file(dir / "records.csv", format_records(records));
}

}  // namespace orca::bench
