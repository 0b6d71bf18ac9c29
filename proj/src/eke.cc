#include "orca/eke.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace orca::eke {

double
fp(double x, double C)
{
  if (x < 0.0) {
    return -std::log(-x) - C;
  }
  if (x == 0.0) {
    return 0.0;
  }
  return std::log(x) + C;
}

double
fp_inv(double y, double C, double epsilon)
{
  if (y == 0.0) {
    return 0.0;
  }
  const double edge = C + std::log(epsilon);
  if (std::abs(y) < edge) {
    std::ostringstream msg;
    msg << "fp_inv(" << y << ") lies in the gap (0, " << edge << ") for C=" << C
        << ", epsilon=" << epsilon;
    throw Error(ErrorCode::DomainError, msg.str());
  }
  return y > 0.0 ? std::exp(y - C) : -std::exp(-y - C);
}

Standardizer
fit_standardizer(const std::vector<double>& samples)
{
  if (samples.size() < 2) {
    throw Error(ErrorCode::DegenerateFeature, "need at least 2 samples");
  }
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) {
    ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::DegenerateFeature, "feature has zero spread");
  }
  return {mean, sd};
}

std::array<double, kNumFeatures>
transform_features(const FeatureVector& fv, double C, double epsilon)
{
  if (!(fv.mke > 0.0)) {
    throw Error(ErrorCode::DomainError, "ln of non-positive MKE");
  }
  if (!(fv.isopycnal_slope > 0.0)) {
    throw Error(ErrorCode::DomainError, "ln of non-positive isopycnal slope");
  }
  const double vort = std::abs(fv.rel_vorticity) < epsilon ? 0.0 : fv.rel_vorticity;
  return {std::log(fv.mke), fv.rossby_norm, fp(vort, C), std::log(fv.isopycnal_slope)};
}

std::array<double, kNumFeatures>
preprocess_values(const FeatureVector& fv, const PreprocessParams& p)
{
  auto t = transform_features(fv, p.C, p.epsilon);
  for (size_t i = 0; i < kNumFeatures; ++i) {
    if (!(p.features[i].std > 0.0)) {
      throw Error(ErrorCode::DegenerateFeature, "feature std must be positive");
    }
    t[i] = p.features[i].apply(t[i]);
  }
  return t;
}

Tensor
preprocess(const FeatureVector& fv, const PreprocessParams& p)
{
  const auto v = preprocess_values(fv, p);
  std::vector<float> out(v.begin(), v.end());
  return Tensor::from_values<float>({kNumFeatures}, out);
}

double
eke_decode(double y_std, const PreprocessParams& p)
{
  return std::exp(p.target.invert(y_std));
}

double
eke_encode(double eke, const PreprocessParams& p)
{
  if (!(eke > 0.0)) {
    throw Error(ErrorCode::DomainError, "ln of non-positive EKE");
  }
  return p.target.apply(std::log(eke));
}

PreprocessParams
fit_preprocess(
    const std::vector<FeatureVector>& samples, const std::vector<double>& eke,
    double C, double epsilon)
{
  PreprocessParams p;
  p.C = C;
  p.epsilon = epsilon;
  std::array<std::vector<double>, kNumFeatures> cols;
  for (const auto& fv : samples) {
    const auto t = transform_features(fv, C, epsilon);
    for (size_t i = 0; i < kNumFeatures; ++i) {
      cols[i].push_back(t[i]);
    }
  }
  for (size_t i = 0; i < kNumFeatures; ++i) {
    p.features[i] = fit_standardizer(cols[i]);
  }
  std::vector<double> ln_eke;
  for (double e : eke) {
    if (!(e > 0.0)) {
      throw Error(ErrorCode::DomainError, "ln of non-positive EKE");
    }
    ln_eke.push_back(std::log(e));
  }
  p.target = fit_standardizer(ln_eke);
  return p;
}

namespace {

const char* const kFeatureNames[kNumFeatures] = {
    "mke", "rossby_norm", "rel_vorticity", "isopycnal_slope"};

}  // namespace

std::string
format_params(const PreprocessParams& p)
{
  nlohmann::ordered_json j;
  j["C"] = p.C;
  j["epsilon"] = p.epsilon;
  for (size_t i = 0; i < kNumFeatures; ++i) {
    j["features"][kFeatureNames[i]] = {{"mean", p.features[i].mean}, {"std", p.features[i].std}};
  }
  j["ln_eke"] = {{"mean", p.target.mean}, {"std", p.target.std}};
  return j.dump(2) + "\n";
}

PreprocessParams
parse_params(const std::string& text)
{
  PreprocessParams p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.C = j.value("C", kDefaultC);
    p.epsilon = j.value("epsilon", kDefaultEpsilon);
    for (size_t i = 0; i < kNumFeatures; ++i) {
      const auto& f = j.at("features").at(kFeatureNames[i]);
      p.features[i] = {f.at("mean").get<double>(), f.at("std").get<double>()};
    }
    p.target = {j.at("ln_eke").at("mean").get<double>(), j.at("ln_eke").at("std").get<double>()};
  }
  catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("bad params file: ") + e.what());
  }
  if (!(p.C > std::log(p.epsilon))) {
    throw Error(ErrorCode::DomainError, "C must exceed ln(epsilon)");
  }
  for (const auto& s : p.features) {
    if (!(s.std > 0.0)) {
      throw Error(ErrorCode::DegenerateFeature, "feature std must be positive");
    }
  }
  if (!(p.target.std > 0.0)) {
    throw Error(ErrorCode::DegenerateFeature, "ln(EKE) std must be positive");
  }
  return p;
}

void
save_params(const std::string& path, const PreprocessParams& p)
{
  std::ofstream out(path, std::ios::trunc);
  out << format_params(p);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path);
  }
}

PreprocessParams
load_params(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str());
}

SampleWeights
inverse_density_weights(const std::vector<double>& values, int n_bins)
{
  if (n_bins < 2) {
    throw Error(ErrorCode::BadCount, "need at least 2 bins");
  }
  if (values.size() < static_cast<size_t>(n_bins)) {
    throw Error(ErrorCode::BadCount, "fewer samples than bins");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    throw Error(ErrorCode::DegenerateRange, "all values are identical");
  }
  const double width = (hi - lo) / n_bins;
  auto bin_of = [&](double v) {
    const auto b = static_cast<int>((v - lo) / width);
    return std::clamp(b, 0, n_bins - 1);
  };
  std::vector<size_t> counts(static_cast<size_t>(n_bins), 0);
  for (double v : values) {
    ++counts[static_cast<size_t>(bin_of(v))];
  }
  // density = count / (n * width); the constant factor cancels under
  // normalization, so the weight is proportional to 1 / count.
  SampleWeights w;
  w.weights.resize(values.size());
  double total = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double density = static_cast<double>(counts[static_cast<size_t>(bin_of(values[i]))]) /
                           (static_cast<double>(values.size()) * width);
    w.weights[i] = 1.0 / density;
    total += w.weights[i];
  }
  for (double& x : w.weights) {
    x /= total;
  }
  return w;
}

std::vector<size_t>
weighted_epoch_sample(size_t n, const SampleWeights& w, double fraction, uint64_t seed)
{
  if (w.weights.size() != n) {
    throw Error(ErrorCode::BadCount, "weights do not match sample count");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::BadCount, "fraction must be in (0, 1]");
  }
  const auto draws = static_cast<size_t>(std::floor(fraction * static_cast<double>(n)));
  if (draws < 1) {
    throw Error(ErrorCode::BadCount, "fraction * n < 1");
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<size_t> dist(w.weights.begin(), w.weights.end());
  std::vector<size_t> out(draws);
  for (auto& i : out) {
    i = dist(rng);
  }
  return out;
}

}  // namespace orca::eke
