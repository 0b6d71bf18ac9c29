// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here and printed with each result.

#include <algorithm>
#include <array>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "orca/bench.h"
#include "orca/eke.h"
#include "orca/launcher.h"
#include "orca/model.h"
#include "orca/process.h"
#include "orca/routing.h"
#include "test_support.h"

using namespace orca;
using namespace std::chrono_literals;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double
seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string
fmt(double v)
{
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---- oracles ---------------------------------------------------------------

// Table-driven CRC-16/XMODEM, table built from the polynomial here.
uint16_t
crc_oracle(std::string_view s)
{
  static const auto table = [] {
    std::array<uint16_t, 256> t{};
    for (int i = 0; i < 256; ++i) {
      uint16_t c = static_cast<uint16_t>(i << 8);
      for (int b = 0; b < 8; ++b) c = (c & 0x8000) ? static_cast<uint16_t>((c << 1) ^ 0x1021) : static_cast<uint16_t>(c << 1);
      t[i] = c;
    }
    return t;
  }();
  uint16_t crc = 0;
  for (unsigned char ch : s) crc = static_cast<uint16_t>((crc << 8) ^ table[((crc >> 8) ^ ch) & 0xFF]);
  return crc;
}

// Naive double-precision feed-forward evaluation.
std::vector<double>
mlp_oracle(const std::vector<Layer>& layers, std::vector<double> x, size_t rows, uint32_t width)
{
  for (const auto& l : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      std::vector<double> y(rows * d->out);
      for (size_t r = 0; r < rows; ++r) {
        for (uint32_t o = 0; o < d->out; ++o) {
          double acc = d->bias[o];
          for (uint32_t i = 0; i < d->in; ++i) acc += x[r * width + i] * double(d->weights[o * d->in + i]);
          y[r * d->out + o] = acc;
        }
      }
      x = std::move(y);
      width = d->out;
    } else if (std::holds_alternative<ReluLayer>(l)) {
      for (auto& v : x) v = v > 0 ? v : 0;
    } else if (std::holds_alternative<TanhLayer>(l)) {
      for (auto& v : x) v = std::tanh(v);
    } else {
      const auto& a = std::get<AffineLayer>(l);
      for (auto& v : x) v = v * a.scale + a.shift;
    }
  }
  return x;
}

DenseLayer
random_dense(std::mt19937_64& rng, uint32_t in, uint32_t out)
{
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  DenseLayer d{in, out, std::vector<float>(size_t(in) * out), std::vector<float>(out)};
  for (auto& w : d.weights) w = u(rng);
  for (auto& b : d.bias) b = u(rng);
  return d;
}

std::vector<float>
concat_rows(const std::vector<float>& a, uint32_t wa, const std::vector<float>& b, uint32_t wb, size_t rows)
{
  std::vector<float> out;
  for (size_t r = 0; r < rows; ++r) {
    out.insert(out.end(), a.begin() + r * wa, a.begin() + (r + 1) * wa);
    out.insert(out.end(), b.begin() + r * wb, b.begin() + (r + 1) * wb);
  }
  return out;
}

// ---- criteria ----------------------------------------------------------------

Outcome
protocol_round_trip()
{
  const auto t0 = Clock::now();
  testing::LocalCluster cluster(4);
  auto c = cluster.client();
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const DType dt = testing::all_dtypes()[i % 5];
    const auto t = testing::random_tensor(rng, dt, 1 + (i / 5) % 4);
    const std::string k = "t" + std::to_string(i);
    c.put_tensor(k, t);
    const auto back = c.get_tensor(k);
    if (back.dtype() != t.dtype() || back.shape() != t.shape() ||
        !std::equal(back.data().begin(), back.data().end(), t.data().begin(), t.data().end())) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 30.0,
          "mismatches=" + std::to_string(mismatches) + " runtime=" + fmt(secs) + "s (limit 30s)"};
}

Outcome
crc_conformance()
{
  const bool check = crc16("123456789") == 0x31C3 && crc_oracle("123456789") == 0x31C3;
  std::mt19937_64 rng(7);
  int oracle_mismatch = 0;
  std::vector<std::string> addrs;
  for (int i = 0; i < 16; ++i) addrs.push_back("127.0.0.1:" + std::to_string(7000 + i));
  const auto topo = plan_topology(16, addrs);
  std::vector<size_t> counts(16, 0);
  for (int i = 0; i < 100000; ++i) {
    std::string k(16, '\0');
    for (auto& ch : k) ch = static_cast<char>('a' + rng() % 26);
    if (crc16(k) != crc_oracle(k)) ++oracle_mismatch;
    if (key_slot(k).value() != crc_oracle(k) % 16384) ++oracle_mismatch;
    ++counts[topo.owner_of_key(k)];
  }
  double worst = 0;
  for (size_t n : counts) worst = std::max(worst, std::abs(double(n) / (100000.0 / 16) - 1.0));
  return {check && oracle_mismatch == 0 && worst <= 0.05,
          "crc(123456789)=0x" + [] {
            char b[8];
            std::snprintf(b, sizeof b, "%04X", crc16("123456789"));
            return std::string(b);
          }() + " oracle_mismatches=" + std::to_string(oracle_mismatch) +
              " max_shard_deviation=" + fmt(worst * 100) + "% (limit 5%)"};
}

Outcome
inference_oracle()
{
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<uint32_t> width(1, 16);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Layer> layers;
    uint32_t w = width(rng);
    const uint32_t in = w;
    const int dense = 1 + int(rng() % 3);
    for (int k = 0; k < dense; ++k) {
      const uint32_t out = width(rng);
      layers.push_back(random_dense(rng, w, out));
      w = out;
      if (k + 1 < dense) {
        if (rng() % 2) {
          layers.push_back(ReluLayer{});
        } else {
          layers.push_back(TanhLayer{});
        }
      }
    }
    const auto m = load_model(encode_model(layers));
    const size_t rows = 1 + rng() % 32;
    std::vector<float> x(rows * in);
    for (auto& v : x) v = u(rng);
    const auto got = run_model_exec(m, Tensor::from_values<float>({uint32_t(rows), in}, x)).values<float>();
    const auto want = mlp_oracle(layers, std::vector<double>(x.begin(), x.end()), rows, in);
    double diff = 0, ref = 0;
    for (size_t i = 0; i < got.size(); ++i) {
      diff = std::max(diff, std::abs(got[i] - want[i]));
      ref = std::max(ref, std::abs(want[i]));
    }
    worst = std::max(worst, ref > 0 ? diff / ref : diff);
  }
  return {worst <= 1e-6, "max_rel_err=" + fmt(worst) + " (limit 1e-6, norm-wise per model)"};
}

Outcome
batching_law()
{
  testing::LocalCluster cluster(1);
  std::mt19937_64 rng(64);
  const std::vector<Layer> layers = {random_dense(rng, 32, 256), TanhLayer{}, random_dense(rng, 256, 32)};
  const Bytes blob = encode_model(layers);
  const auto spec = load_model(blob);
  constexpr int kRequests = 64;
  constexpr uint32_t kRows = 64;
  std::vector<Tensor> inputs;
  {
    auto c = cluster.client();
    c.set_model("mlp", blob, 10000);
    std::uniform_real_distribution<float> u(-1, 1);
    for (int i = 0; i < kRequests; ++i) {
      std::vector<float> v(kRows * 32);
      for (auto& x : v) x = u(rng);
      inputs.push_back(Tensor::from_values<float>({kRows, 32}, v));
      c.put_tensor("x" + std::to_string(i), inputs.back());
    }
  }
  const auto before = cluster.core(0).info();
  std::vector<Client> clients;
  for (int i = 0; i < kRequests; ++i) clients.push_back(cluster.client());
  std::barrier sync(kRequests);
  std::atomic<int> errors{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < kRequests; ++i) {
    threads.emplace_back([&, i] {
      sync.arrive_and_wait();
      try {
        clients[i].run_model("mlp", {"x" + std::to_string(i)}, {"y" + std::to_string(i)});
      }
      catch (const std::exception&) {
        ++errors;
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto after = cluster.core(0).info();
  const uint64_t runs = after.model_runs - before.model_runs;
  const uint64_t execs = after.batch_executions - before.batch_executions;

  auto c = cluster.client();
  int mismatches = 0;
  for (int i = 0; i < kRequests; ++i) {
    const auto sequential = run_model_exec(spec, inputs[i]);
    if (!(c.get_tensor("y" + std::to_string(i)) == sequential)) ++mismatches;
  }
  return {errors == 0 && runs == kRequests && execs < kRequests && mismatches == 0,
          "model_runs=" + std::to_string(runs) + " batch_executions=" + std::to_string(execs) +
              " output_mismatches=" + std::to_string(mismatches) + " errors=" + std::to_string(errors.load())};
}

Outcome
data_movement()
{
  testing::LocalCluster cluster(4);
  auto c = cluster.client();
  std::mt19937_64 rng(16);
  const std::vector<Layer> layers = {random_dense(rng, 5, 8), ReluLayer{}, random_dense(rng, 8, 2)};
  c.set_model("m", encode_model(layers));
  const auto& topo = cluster.topology();
  std::uniform_real_distribution<float> u(-1, 1);
  int mismatches = 0;
  for (uint32_t sa = 0; sa < 4; ++sa) {
    for (uint32_t sb = 0; sb < 4; ++sb) {
      const std::string a = testing::key_on_shard(topo, sa, "a" + std::to_string(sa) + std::to_string(sb) + "_");
      const std::string b = testing::key_on_shard(topo, sb, "b" + std::to_string(sa) + std::to_string(sb) + "_");
      const std::string out = testing::key_on_shard(topo, (sa + sb + 1) % 4, "o" + std::to_string(sa) + std::to_string(sb) + "_");
      std::vector<float> va(6 * 2), vb(6 * 3);
      for (auto& x : va) x = u(rng);
      for (auto& x : vb) x = u(rng);
      c.put_tensor(a, Tensor::from_values<float>({6, 2}, va));
      c.put_tensor(b, Tensor::from_values<float>({6, 3}, vb));
      c.run_model("m", {a, b}, {out});
      const auto got = c.get_tensor(out).values<float>();
      const auto cat = concat_rows(va, 2, vb, 3, 6);
      const auto want = mlp_oracle(layers, std::vector<double>(cat.begin(), cat.end()), 6, 5);
      for (size_t i = 0; i < want.size(); ++i) {
        if (std::abs(got[i] - want[i]) > 1e-5 * std::max(1.0, std::abs(want[i]))) {
          ++mismatches;
          break;
        }
      }
    }
  }
  const size_t temps = cluster.temporaries().size();
  return {mismatches == 0 && temps == 0,
          "placements=16 mismatching=" + std::to_string(mismatches) + " temporaries_left=" + std::to_string(temps)};
}

Outcome
scaling_trends()
{
  const auto t0 = Clock::now();
  testing::TempDir tmp;
  bench::BenchConfig cfg;
  cfg.client_counts = {2, 8, 32};
  cfg.shard_counts = {1, 4};
  cfg.iterations = 10;
  cfg.min_samples = 200;
  cfg.out_dir = tmp.path();
  cfg.client_exe = ORCA_BENCH_EXE;
  cfg.shard_exe = ORCA_SHARD_EXE;
  const auto res = bench::run_matrix(cfg);
  for (const auto& cell : res.cells) {
    if (cell.failed) {
      return {false, "cell c" + std::to_string(cell.cell.clients) + "_s" + std::to_string(cell.cell.shards) +
                         " failed: " + cell.error};
    }
  }
  const auto summary = bench::summarize(res.records);
  bench::emit(tmp.path(), summary, res.records);
  auto mean = [&](uint32_t clients, uint32_t shards) {
    return summary.at({bench::Cell{clients, shards}, bench::ApiCall::run_model}).mean;
  };
  uint64_t min_n = UINT64_MAX;
  for (const auto& [k, s] : summary) min_n = std::min(min_n, s.n);
  const double m2 = mean(2, 1), m8 = mean(8, 1), m32 = mean(32, 1), m32x4 = mean(32, 4);
  const bool monotone = m8 >= 0.9 * m2 && m32 >= 0.9 * m8;
  const bool sharded = m32x4 <= m32;
  const double secs = seconds_since(t0);
  return {monotone && sharded && min_n >= 200 && secs < 600,
          "run_model mean@1 shard: 2c=" + fmt(m2 * 1e3) + "ms 8c=" + fmt(m8 * 1e3) + "ms 32c=" + fmt(m32 * 1e3) +
              "ms; 32c@4 shards=" + fmt(m32x4 * 1e3) + "ms; min samples/cell=" + std::to_string(min_n) +
              " runtime=" + fmt(secs) + "s (limit 600s)"};
}

Outcome
fp_suite()
{
  using namespace orca::eke;
  bool ok = fp(0) == 0 && kDefaultC == 36 && fp(1) == 36 && fp(1, 36) == fp(1);
  double worst = 0;
  int odd_fail = 0;
  for (int k = 0; k <= 2100; ++k) {
    const double x = std::max(1e-15, 1e-15 * std::pow(10.0, k / 100.0));
    for (double s : {1.0, -1.0}) {
      worst = std::max(worst, std::abs(fp_inv(fp(s * x)) - s * x) / x);
    }
    if (fp(-x) != -fp(x)) ++odd_fail;
  }
  ok = ok && odd_fail == 0 && worst <= 1e-12;
  return {ok, "odd_violations=" + std::to_string(odd_fail) + " max_roundtrip_rel_err=" + fmt(worst) +
                  " (limit 1e-12) C=" + fmt(kDefaultC)};
}

Outcome
weighted_sampling()
{
  using namespace orca::eke;
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> d(0, 0.5);
  const size_t n = 100000;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  const int bins = 16;
  const auto w = inverse_density_weights(v, bins);
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, width = (*hi_it - lo) / bins;
  auto ratio = [&](const std::vector<size_t>& idx) {
    std::vector<double> c(bins, 0);
    for (size_t i : idx) c[std::min(bins - 1, int((v[i] - lo) / width))] += 1;
    return *std::max_element(c.begin(), c.end()) / std::max(1.0, *std::min_element(c.begin(), c.end()));
  };
  SampleWeights flat{std::vector<double>(n, 1.0 / n)};
  const double r_flat = ratio(weighted_epoch_sample(n, flat, 1.0, 1));
  const double r_weighted = ratio(weighted_epoch_sample(n, w, 1.0, 1));

  // Deciles of the sampling distribution: samples ordered by value, cut where
  // the cumulative weight crosses each tenth.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<int> decile(n);
  double cum = 0;
  for (size_t i : order) {
    decile[i] = std::min(9, int(cum * 10));
    cum += w.weights[i];
  }
  std::array<double, 10> expected{}, got{};
  size_t drawn = 0;
  for (uint64_t seed = 100; drawn < 1000000; ++seed) {
    for (size_t i : weighted_epoch_sample(n, w, 1.0, seed)) {
      got[decile[i]] += 1;
      ++drawn;
    }
  }
  for (size_t i = 0; i < n; ++i) expected[decile[i]] += w.weights[i] * drawn;
  double worst = 0;
  for (int k = 0; k < 10; ++k) worst = std::max(worst, std::abs(got[k] - expected[k]) / expected[k]);
  return {r_weighted < r_flat && worst <= 0.02,
          "bin max/min ratio unweighted=" + fmt(r_flat) + " weighted=" + fmt(r_weighted) +
              " worst decile rel_err=" + fmt(worst * 100) + "% over " + std::to_string(drawn) + " draws (limit 2%)"};
}

Outcome
launcher_replicas()
{
  testing::TempDir tmp;
  std::ofstream(tmp.path() / "member.cfg") << "value = ;value;\nmode = ;mode;\n";
  RunSettings run;
  run.exe = "/bin/sh";
  run.args = {"-c", "sleep 2"};
  Experiment exp("acceptance", tmp.path() / "exp");
  auto& e = exp.create_ensemble("replica", {{"value", {"42"}}, {"mode", {"fast"}}}, Strategy::replicas_of(12), run);
  e.attach_generator_files({tmp.path() / "member.cfg"});
  exp.generate(e);
  int dirs = 0, bad_subst = 0;
  for (const auto& m : e.members) {
    if (fs::is_directory(m.dir)) ++dirs;
    std::ifstream in(m.dir / "member.cfg");
    std::stringstream ss;
    ss << in.rdbuf();
    if (ss.str() != "value = 42\nmode = fast\n") ++bad_subst;
  }
  const auto report = exp.start(e, false);
  const double start_s = std::chrono::duration<double>(report.elapsed).count();
  int running_after_start = 0;
  for (auto s : exp.poll(e)) running_after_start += s == EntityStatus::running;
  exp.wait(e, 30s);
  int completed = 0;
  for (auto s : exp.poll(e)) completed += s == EntityStatus::completed;
  return {dirs == 12 && bad_subst == 0 && completed == 12 && start_s < 1.0 && running_after_start == 12,
          "dirs=" + std::to_string(dirs) + " bad_substitutions=" + std::to_string(bad_subst) +
              " start_returned_in=" + fmt(start_s) + "s (limit 1s) running_after_start=" +
              std::to_string(running_after_start) + " completed=" + std::to_string(completed)};
}

Outcome
eke_demo()
{
  testing::TempDir tmp;
  proc::SpawnSpec spec;
  spec.exe = ORCA_EKE_DEMO_EXE;
  spec.args = {"--grid", "64,64", "--shards", "2", "--seed", "1", "--shard-exe", ORCA_SHARD_EXE};
  spec.stdout_path = tmp.path() / "demo.out";
  spec.stderr_path = tmp.path() / "demo.err";
  const auto st = proc::wait(proc::spawn(spec));
  std::ifstream in(spec.stdout_path);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    kv[k] = v;
  }
  const double min_eke = kv.count("min_eke") ? std::stod(kv["min_eke"]) : -1;
  const double rel = kv.count("max_rel_err") ? std::stod(kv["max_rel_err"]) : 1;
  const bool ok = st.success() && kv["points"] == "4096" && min_eke > 0 && rel <= 1e-6 && kv.count("ok");
  return {ok, "exit=" + std::to_string(st.code) + " points=" + kv["points"] + " min_eke=" + kv["min_eke"] +
                  " max_rel_err=" + kv["max_rel_err"] + " (limit 1e-6)"};
}

}  // namespace

int
main()
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"protocol round trip", protocol_round_trip},
      {"crc16 conformance", crc_conformance},
      {"inference oracle equivalence", inference_oracle},
      {"batching law", batching_law},
      {"data movement", data_movement},
      {"scaling trends", scaling_trends},
      {"signed-log suite", fp_suite},
      {"weighted sampling", weighted_sampling},
      {"launcher replicas", launcher_replicas},
      {"end-to-end demo", eke_demo},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    }
    catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
