#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "orca/eke.h"
#include "orca/eke_demo.h"
#include "test_support.h"

using namespace orca;
using namespace orca::eke;
using orca::testing::TempDir;
using orca::testing::thrown;

namespace {

PreprocessParams
fitted(const Grid& g, uint64_t seed)
{
  return fit_preprocess(g.points, synthetic_eke(g, seed));
}

// Population mean and std, computed directly.
std::pair<double, double>
moments(const std::vector<double>& v)
{
  long double s = 0;
  for (double x : v) s += x;
  const long double m = s / v.size();
  long double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {double(m), double(std::sqrt(ss / v.size()))};
}

}  // namespace

TEST_CASE("fp examples")
{
  CHECK(fp(0, 36) == 0);
  CHECK(fp(1, 36) == 36);
  CHECK(fp(-std::numbers::e, 36) == doctest::Approx(-37).epsilon(1e-15));
  CHECK(fp(std::numbers::e, 36) == doctest::Approx(37).epsilon(1e-15));
}

TEST_CASE("fp is odd and strictly increasing on each branch")
{
  double prev = fp(1e-15);
  for (int k = 0; k <= 2100; ++k) {
    const double x = 1e-15 * std::pow(10.0, k / 100.0);
    CHECK(fp(-x) == -fp(x));
    const double y = fp(x);
    if (k > 0) CHECK(y > prev);
    prev = y;
    // Injective overall: positive inputs never meet negative ones.
    CHECK(y > 0);
    CHECK(fp(-x) < 0);
  }
}

TEST_CASE("fp_inv")
{
  CHECK(fp_inv(36, 36) == 1);
  CHECK(fp_inv(0, 36) == 0);
  CHECK(fp_inv(-36, 36) == -1);
  CHECK(thrown([] { fp_inv(1, 36); }) == "DomainError");
  CHECK(thrown([] { fp_inv(-1, 36); }) == "DomainError");
  CHECK(thrown([] { fp_inv(1.4, 36, 1e-15); }) == "DomainError");
  CHECK(fp_inv(1.5, 36, 1e-15) > 0);
  for (int k = 0; k <= 2100; k += 7) {
    const double x = std::max(1e-15, 1e-15 * std::pow(10.0, k / 100.0));
    for (double s : {1.0, -1.0}) {
      const double back = fp_inv(fp(s * x));
      CHECK(std::abs(back - s * x) <= 1e-12 * x);
    }
  }
}

TEST_CASE("standardizer")
{
  const auto s = fit_standardizer({0, 2});
  CHECK(s.mean == 1);
  CHECK(s.std == 1);
  CHECK(thrown([] { fit_standardizer({1, 1, 1}); }) == "DegenerateFeature");
  CHECK(thrown([] { fit_standardizer({1}); }) == "DegenerateFeature");

  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(3, 7);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(2 + rng() % 500);
    for (auto& x : v) x = d(rng);
    const auto st = fit_standardizer(v);
    std::vector<double> z;
    for (double x : v) z.push_back(st.apply(x));
    const auto [m, sd] = moments(z);
    CHECK(std::abs(m) < 1e-12);
    CHECK(std::abs(sd - 1) < 1e-12);
  }
}

TEST_CASE("preprocess")
{
  PreprocessParams p;
  p.features = {Standardizer{std::log(2.0), 0.5}, Standardizer{0.3, 2}, Standardizer{fp(1e-5), 3},
                Standardizer{std::log(1e-3), 1}};
  p.target = {-2, 0.5};

  const FeatureVector at_mean{2.0, 0.3, 1e-5, 1e-3};
  for (double v : preprocess_values(at_mean, p)) CHECK(std::abs(v) < 1e-12);
  const auto t = preprocess(at_mean, p);
  CHECK(t.dtype() == DType::f32);
  CHECK(t.shape() == Shape{4});

  FeatureVector fv{std::numbers::e, 1.0, 0.0, 1.0};
  const auto v = preprocess_values(fv, p);
  CHECK(v[0] == doctest::Approx((1 - std::log(2.0)) / 0.5));
  CHECK(v[1] == doctest::Approx((1 - 0.3) / 2));
  CHECK(v[2] == doctest::Approx((0 - fp(1e-5)) / 3));
  CHECK(v[3] == doctest::Approx((0 - std::log(1e-3)) / 1));

  fv.rel_vorticity = p.epsilon / 2;
  CHECK(preprocess_values(fv, p)[2] == p.features[2].apply(0.0));
  fv.rel_vorticity = -p.epsilon / 2;
  CHECK(preprocess_values(fv, p)[2] == p.features[2].apply(0.0));

  CHECK(thrown([&] { preprocess({0.0, 0, 0, 1}, p); }) == "DomainError");
  CHECK(thrown([&] { preprocess({1.0, 0, 0, -1}, p); }) == "DomainError");
  p.features[1].std = 0;
  CHECK(thrown([&] { preprocess(at_mean, p); }) == "DegenerateFeature");
}

TEST_CASE("eke decode and encode")
{
  PreprocessParams p;
  p.target = {-3.5, 1.25};
  CHECK(eke_decode(0, p) == doctest::Approx(std::exp(-3.5)).epsilon(1e-15));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> e(-12, 4);
  for (int i = 0; i < 1000; ++i) {
    const double eke = std::pow(10.0, e(rng));
    CHECK(std::abs(eke_decode(eke_encode(eke, p), p) - eke) <= 1e-10 * eke);
  }
  for (double y : {-30.0, -1.0, 0.0, 1.0, 30.0}) CHECK(eke_decode(y, p) > 0);
  CHECK(thrown([&] { eke_encode(0, p); }) == "DomainError");
}

TEST_CASE("inverse density weights")
{
  std::vector<double> v(9, 0.0);
  v.push_back(1.0);
  const auto w = inverse_density_weights(v, 2);
  REQUIRE(w.weights.size() == 10);
  CHECK(w.weights[9] == doctest::Approx(9 * w.weights[0]));
  double sum = 0;
  for (double x : w.weights) {
    CHECK(x > 0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.epoch_fraction == doctest::Approx(0.1));

  std::vector<double> uniform;
  for (int i = 0; i < 6400; ++i) uniform.push_back(i);
  const auto wu = inverse_density_weights(uniform, 64);
  const auto [lo, hi] = std::minmax_element(wu.weights.begin(), wu.weights.end());
  CHECK(*hi / *lo < 1.05);

  CHECK(thrown([] { inverse_density_weights(std::vector<double>(10, 3.0), 2); }) == "DegenerateRange");
  CHECK(thrown([] { inverse_density_weights({1, 2}, 64); }) == "BadCount");
}

TEST_CASE("weighted epoch sampling")
{
  const size_t n = 1000;
  SampleWeights flat{std::vector<double>(n, 1.0 / n)};
  const auto idx = weighted_epoch_sample(n, flat, 0.1, 1);
  CHECK(idx.size() == 100);
  for (size_t i : idx) CHECK(i < n);
  CHECK(weighted_epoch_sample(n, flat, 0.1, 1) == idx);
  CHECK(weighted_epoch_sample(n, flat, 0.1, 2) != idx);

  SampleWeights peaked{std::vector<double>(n, 1e-9 / (n - 1))};
  peaked.weights[0] = 1 - 1e-9;
  size_t zeros = 0;
  for (size_t i : weighted_epoch_sample(n, peaked, 1.0, 3)) zeros += (i == 0);
  CHECK(zeros >= 999);

  CHECK(thrown([&] { weighted_epoch_sample(5, flat, 0.1, 1); }) == "BadCount");
}

TEST_CASE("draw frequencies match the weights per decile")
{
  // 100 samples with uneven weights; 10^6 draws.
  const size_t n = 100;
  SampleWeights w;
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    w.weights.push_back(1.0 + (i % 10) + 0.05 * i);
    total += w.weights.back();
  }
  for (auto& x : w.weights) x /= total;
  const auto draws = weighted_epoch_sample(n, w, 1.0, 99);
  REQUIRE(draws.size() == n);
  // Accumulate 10^4 epochs of n draws to reach 10^6 samples.
  std::array<double, 10> counts{}, expected{};
  size_t drawn = 0;
  for (uint64_t seed = 0; drawn < 1000000; ++seed) {
    for (size_t i : weighted_epoch_sample(n, w, 1.0, seed)) {
      counts[i / 10] += 1;
      ++drawn;
    }
  }
  for (size_t i = 0; i < n; ++i) expected[i / 10] += w.weights[i] * drawn;
  for (size_t d = 0; d < 10; ++d) {
    CAPTURE(d);
    CHECK(std::abs(counts[d] - expected[d]) / expected[d] < 0.02);
  }
}

TEST_CASE("weighting flattens a log-normal sample")
{
  std::mt19937_64 rng(12);
  std::lognormal_distribution<double> d(0, 0.5);
  std::vector<double> v(20000);
  for (auto& x : v) x = d(rng);
  const int bins = 16;
  const auto w = inverse_density_weights(v, bins);
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, width = (*hi_it - lo) / bins;
  auto ratio = [&](const std::vector<size_t>& idx) {
    std::vector<double> c(bins, 0);
    for (size_t i : idx) c[std::min(bins - 1, int((v[i] - lo) / width))] += 1;
    const double mx = *std::max_element(c.begin(), c.end());
    const double mn = std::max(1.0, *std::min_element(c.begin(), c.end()));
    return mx / mn;
  };
  SampleWeights flat{std::vector<double>(v.size(), 1.0 / v.size())};
  const double unweighted = ratio(weighted_epoch_sample(v.size(), flat, 1.0, 5));
  const double weighted = ratio(weighted_epoch_sample(v.size(), w, 1.0, 5));
  MESSAGE("max/min bin ratio: unweighted " << unweighted << ", weighted " << weighted);
  CHECK(weighted < unweighted);
}

TEST_CASE("params sidecar round trip")
{
  const auto g = synthetic_grid(16, 16, 3);
  const auto p = fitted(g, 3);
  TempDir tmp;
  const std::string path = (tmp.path() / "params.json").string();
  save_params(path, p);
  CHECK(load_params(path) == p);
  CHECK(parse_params(format_params(p)) == p);
  CHECK(thrown([] { parse_params("{}"); }) == "IoError");
  CHECK(thrown([] { load_params("/nonexistent/params.json"); }) == "IoError");
}

TEST_CASE("synthetic grid")
{
  const auto g = synthetic_grid(8, 5, 1);
  CHECK(g.points.size() == 40);
  bool pos = false, neg = false, zero = false;
  for (const auto& fv : g.points) {
    CHECK(fv.mke > 0);
    CHECK(fv.isopycnal_slope > 0);
    pos |= fv.rel_vorticity > 0;
    neg |= fv.rel_vorticity < 0;
    zero |= fv.rel_vorticity == 0;
  }
  CHECK((pos && neg && zero));
  CHECK(synthetic_grid(8, 5, 1).points.size() == g.points.size());
}

TEST_CASE("local inference agrees with the script and model stages")
{
  const auto g = synthetic_grid(6, 6, 2);
  const auto p = fitted(g, 2);
  const auto out = local_inference(stub_model(), g.points, p);
  REQUIRE(out.size() == g.points.size());
  for (double e : out) CHECK(e > 0);
  const auto zeros = local_inference(zero_model(), g.points, p);
  for (double e : zeros) CHECK(e == doctest::Approx(std::exp(p.target.mean)).epsilon(1e-12));
}

TEST_CASE("demo inference through a cluster")
{
  orca::testing::LocalCluster cluster(2);
  const auto g = synthetic_grid(12, 10, 4);
  const auto p = fitted(g, 4);
  auto c = cluster.client();
  c.set_script("eke_preprocess", preprocessing_script(p));

  c.set_model("eke_model", encode_model(zero_model()));
  for (double e : demo_inference(c, g.points, p)) {
    CHECK(e == doctest::Approx(std::exp(p.target.mean)).epsilon(1e-6));
  }

  c.set_model("eke_model", encode_model(stub_model()));
  const auto want = local_inference(stub_model(), g.points, p);
  DemoNames chunked;
  chunked.chunk = 25;
  for (const auto& names : {DemoNames{}, chunked}) {
    const auto got = demo_inference(c, g.points, p, names);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-6 * std::abs(want[i]));
    }
  }
  CHECK(cluster.temporaries().empty());
}

TEST_CASE("two concurrent members with eight calls each")
{
  orca::testing::LocalCluster cluster(2);
  const auto g = synthetic_grid(8, 8, 6);
  const auto p = fitted(g, 6);
  {
    auto c = cluster.client();
    c.set_script("eke_preprocess", preprocessing_script(p));
    c.set_model("eke_model", encode_model(stub_model()));
  }
  const auto want = local_inference(stub_model(), g.points, p);
  std::atomic<int> mismatches{0}, failures{0};
  std::vector<std::thread> members;
  for (int m = 0; m < 2; ++m) {
    members.emplace_back([&, m] {
      ClientOptions o;
      o.key_prefix = "member" + std::to_string(m) + ".";
      auto c = cluster.client(o);
      try {
        for (int call = 0; call < 8; ++call) {
          const auto got = demo_inference(c, g.points, p);
          for (size_t i = 0; i < got.size(); ++i) {
            if (std::abs(got[i] - want[i]) > 1e-6 * std::abs(want[i])) ++mismatches;
          }
        }
      }
      catch (const std::exception&) {
        ++failures;
      }
    });
  }
  for (auto& t : members) t.join();
  CHECK(failures == 0);
  CHECK(mismatches == 0);
}

TEST_CASE("the shipped stub model matches the built-in one")
{
  std::ifstream in(std::string(ORCA_SOURCE_DIR) + "/models/eke_stub.ssnn", std::ios::binary);
  REQUIRE(in);
  const Bytes blob((std::istreambuf_iterator<char>(in)), {});
  CHECK(blob == encode_model(stub_model()));
  const auto m = load_model(blob);
  CHECK(m.input_width() == 4u);
  CHECK(m.output_width(4) == 1u);
}
