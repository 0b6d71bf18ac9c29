#pragma once

// Latency harness: many client processes issuing put / run_script /
// run_model / get against freshly launched clusters.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orca/bytes.h"
#include "orca/client.h"
#include "orca/script.h"

namespace orca::bench {

enum class ApiCall : uint8_t { put_tensor = 0, run_script = 1, run_model = 2, unpack_tensor = 3 };
inline constexpr ApiCall kApiCalls[] = {
    ApiCall::put_tensor, ApiCall::run_script, ApiCall::run_model, ApiCall::unpack_tensor};

const char* api_name(ApiCall a);
// Throws Malformed.
ApiCall api_from_name(const std::string& s);

struct Cell {
  uint32_t clients = 0;
  uint32_t shards = 0;
  auto operator<=>(const Cell&) const = default;
};

struct TimingRecord {
  Cell cell;
  uint32_t repeat = 0;
  uint32_t client = 0;
  uint32_t iteration = 0;
  ApiCall api = ApiCall::put_tensor;
  double seconds = 0.0;
};

struct Workload {
  uint32_t rows = 16;
  uint32_t cols = 32;
  std::string model_name = "bench_model";
  std::string script_name = "bench_script";
  Bytes model_blob;
  uint32_t batch_size = 10000;
  ScriptSpec script;
};

// The mini-MLP stand-in and the pass-through-shaped preprocessing script.
Workload default_workload(uint32_t rows = 16, uint32_t cols = 32, uint32_t hidden = 64);

struct ClientConfig {
  std::string seed_address;
  uint32_t client_id = 0;
  uint32_t iterations = 10;
  uint64_t seed = 0;
};

// One client's main loop: put, run_script, run_model, get; each call timed
// on its own. Keys are hash-tagged by client id, so no staging happens.
// Records carry cell/repeat zeroed.
std::vector<TimingRecord> client_loop(
    Client& client, const Workload& w, uint32_t client_id, uint32_t iterations, uint64_t seed);

struct BenchConfig {
  std::vector<uint32_t> client_counts{2, 8, 32};
  std::vector<uint32_t> shard_counts{1, 4};
  uint32_t iterations = 10;
  // Each cell is repeated on a fresh cluster until it holds at least this
  // many samples per api (0: run once).
  uint32_t min_samples = 0;
  Workload workload = default_workload();
  std::filesystem::path out_dir;
  // Executable providing "client" mode (the bench CLI itself).
  std::string client_exe;
  std::string shard_exe;
  uint32_t shard_workers = 1;
  // Test seam: runs after the cluster is up and before clients spawn;
  // throwing marks the cell failed.
  std::function<void(const Cell&)> cell_hook;
};

struct CellResult {
  Cell cell;
  uint32_t repeats = 0;
  bool failed = false;
  std::string error;
  std::chrono::nanoseconds wall{0};
};

struct MatrixResult {
  std::vector<TimingRecord> records;
  std::vector<CellResult> cells;
  uint32_t clusters_launched = 0;
};

uint32_t repeats_for(const BenchConfig& c, uint32_t clients);

// Cells run in order (clients outer, shards inner), each on a new cluster.
// A failing cell is recorded and the matrix continues.
MatrixResult run_matrix(const BenchConfig& config);

struct Summary {
  uint64_t n = 0;
  double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

// Linear interpolation between closest ranks: h = (n - 1) p.
double quantile(std::vector<double> sorted, double p);
Summary summarize_values(std::vector<double> values);

using SummaryKey = std::pair<Cell, ApiCall>;
// Throws EmptyGroup when a requested group has no samples.
std::map<SummaryKey, Summary> summarize(const std::vector<TimingRecord>& records);

inline constexpr const char* kSummaryHeader =
    "clients,shards,api,n,mean_s,median_s,q1_s,q3_s,min_s,max_s";
inline constexpr const char* kRecordsHeader = "clients,shards,repeat,client,iteration,api,seconds";

// summary.csv, boxplot.dat, records.csv in `dir`. Throws IoError.
void emit(
    const std::filesystem::path& dir, const std::map<SummaryKey, Summary>& summary,
    const std::vector<TimingRecord>& records);

std::string format_records(const std::vector<TimingRecord>& records);
// Throws Malformed.
std::vector<TimingRecord> parse_records(const std::string& text);

}  // namespace orca::bench
