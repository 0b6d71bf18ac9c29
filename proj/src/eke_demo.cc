#include "orca/eke_demo.h"

#include <cmath>
#include <numbers>
#include <random>

#include "orca/error.h"

namespace orca::eke {

Grid
synthetic_grid(uint32_t nx, uint32_t ny, uint64_t seed)
{
  Grid g;
  g.nx = nx;
  g.ny = ny;
  g.points.resize(static_cast<size_t>(nx) * ny);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double two_pi = 2.0 * std::numbers::pi;
  for (uint32_t j = 0; j < ny; ++j) {
    for (uint32_t i = 0; i < nx; ++i) {
      const double x = (i + 0.5) / nx;
      const double y = (j + 0.5) / ny;
      FeatureVector& f = g.points[static_cast<size_t>(j) * nx + i];
      f.mke = std::exp(-4.0 + 2.0 * std::sin(two_pi * x) * std::cos(two_pi * y) + noise(rng));
      f.rossby_norm = 0.5 + 0.4 * std::cos(std::numbers::pi * y) + 0.05 * noise(rng);
      // Every seventh point sits at exactly zero vorticity.
      f.rel_vorticity = (i + j) % 7 == 0
                            ? 0.0
                            : 1e-5 * std::sin(two_pi * (x + y)) * std::exp(3.0 * noise(rng));
      f.isopycnal_slope = std::exp(-7.0 + std::cos(two_pi * x) + noise(rng));
    }
  }
  return g;
}

std::vector<double>
synthetic_eke(const Grid& g, uint64_t seed)
{
  std::mt19937_64 rng(seed ^ 0xEEull);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<double> out;
  out.reserve(g.points.size());
  for (const auto& f : g.points) {
    out.push_back(std::exp(0.8 * std::log(f.mke) + 0.3 * std::log(f.isopycnal_slope) + noise(rng)));
  }
  return out;
}

ScriptSpec
preprocessing_script(const PreprocessParams& p, const std::string& name)
{
  ScriptSpec s;
  s.name = name;
  s.arity = static_cast<uint32_t>(kNumFeatures);
  auto standardize = [&](uint32_t i) {
    return ScriptStep{i, ScriptOp::standardize, p.features[i].mean, p.features[i].std};
  };
  s.steps = {
      ScriptStep{0u, ScriptOp::ln, 0.0, 0.0},
      standardize(0),
      standardize(1),
      ScriptStep{2u, ScriptOp::fp, p.C, p.epsilon},
      standardize(2),
      ScriptStep{3u, ScriptOp::ln, 0.0, 0.0},
      standardize(3),
  };
  s.finalize = Finalize::stack_last_axis;
  s.output_dtype = DType::f32;
  return s;
}

std::vector<Layer>
zero_model()
{
  DenseLayer d;
  d.in = static_cast<uint32_t>(kNumFeatures);
  d.out = 1;
  d.weights.assign(kNumFeatures, 0.0f);
  d.bias.assign(1, 0.0f);
  return {d};
}

std::vector<Layer>
stub_model(uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.5f);
  DenseLayer a;
  a.in = static_cast<uint32_t>(kNumFeatures);
  a.out = 8;
  a.weights.resize(a.in * a.out);
  for (auto& w : a.weights) w = nd(rng);
  a.bias.resize(a.out);
  for (auto& b : a.bias) b = 0.1f * nd(rng);
  DenseLayer b;
  b.in = 8;
  b.out = 1;
  b.weights.resize(8);
  for (auto& w : b.weights) w = nd(rng);
  b.bias = {0.05f};
  return {a, TanhLayer{}, b};
}

namespace {

std::vector<double>
decode_output(const Tensor& out, size_t n, const PreprocessParams& p)
{
  if (out.shape().size() != 2 || out.shape()[0] != n || out.shape()[1] != 1) {
    throw Error(ErrorCode::ShapeMismatch, "model output must be [N, 1]");
  }
  std::vector<double> eke(n);
  for (size_t i = 0; i < n; ++i) {
    eke[i] = eke_decode(out.as_double(i), p);
  }
  return eke;
}

}  // namespace

std::vector<double>
demo_inference(
    Client& client, const std::vector<FeatureVector>& points, const PreprocessParams& p,
    const DemoNames& names)
{
  const size_t chunk = names.chunk == 0 ? points.size() : names.chunk;
  const std::string& b = names.key_base;
  const std::vector<std::string> in_keys = {b + ".mke", b + ".rossby", b + ".vorticity", b + ".slope"};
  const std::string pre = b + ".features", out = b + ".lneke";

  std::vector<double> eke;
  eke.reserve(points.size());
  for (size_t start = 0; start < points.size(); start += chunk) {
    const size_t n = std::min(chunk, points.size() - start);
    std::array<std::vector<double>, kNumFeatures> cols;
    for (auto& c : cols) c.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const auto& f = points[start + i];
      cols[0][i] = f.mke;
      cols[1][i] = f.rossby_norm;
      cols[2][i] = f.rel_vorticity;
      cols[3][i] = f.isopycnal_slope;
    }
    for (size_t k = 0; k < kNumFeatures; ++k) {
      client.put_tensor(in_keys[k], Tensor::from_values<double>({static_cast<uint32_t>(n)}, cols[k]));
    }
    client.run_script(names.script, in_keys, pre);
    client.run_model(names.model, {pre}, {out});
    const auto part = decode_output(client.get_tensor(out), n, p);
    eke.insert(eke.end(), part.begin(), part.end());
  }
  for (const auto& k : in_keys) client.delete_tensor(k);
  client.delete_tensor(pre);
  client.delete_tensor(out);
  return eke;
}

std::vector<double>
local_inference(
    const std::vector<Layer>& model, const std::vector<FeatureVector>& points,
    const PreprocessParams& p)
{
  const size_t n = points.size();
  std::vector<float> features;
  features.reserve(n * kNumFeatures);
  for (const auto& f : points) {
    for (double v : preprocess_values(f, p)) {
      features.push_back(static_cast<float>(v));
    }
  }
  ModelSpec m;
  m.name = "local";
  m.layers = model;
  const Tensor batch = Tensor::from_values<float>(
      {static_cast<uint32_t>(n), static_cast<uint32_t>(kNumFeatures)}, features);
  return decode_output(run_model_exec(m, batch, KernelPolicy::serial), n, p);
}

}  // namespace orca::eke
