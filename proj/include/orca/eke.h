#pragma once

// Feature engineering for the eddy-kinetic-energy regression: signed-log
// transform, standardization, inverse-density sample weights.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "orca/tensor.h"

namespace orca::eke {

inline constexpr double kDefaultC = 36.0;
inline constexpr double kDefaultEpsilon = 1e-15;
inline constexpr int kDefaultBins = 64;
inline constexpr double kDefaultEpochFraction = 0.1;

// Signed log with offset: -ln|x| - C for x < 0, 0 at 0, ln x + C for x > 0.
double fp(double x, double C = kDefaultC);

// Inverse of fp on its image over |x| >= epsilon. Values in the open gap
// 0 < |y| < C + ln(epsilon) are not produced by fp and throw DomainError.
double fp_inv(double y, double C = kDefaultC, double epsilon = kDefaultEpsilon);

struct Standardizer {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
  bool operator==(const Standardizer&) const = default;
};

// Population mean/std. Needs >= 2 samples; zero spread throws
// DegenerateFeature.
Standardizer fit_standardizer(const std::vector<double>& samples);

// Feature order is fixed: mke, rossby_norm, rel_vorticity, isopycnal_slope.
struct FeatureVector {
  double mke = 1.0;
  double rossby_norm = 0.0;
  double rel_vorticity = 0.0;
  double isopycnal_slope = 1.0;
};

inline constexpr size_t kNumFeatures = 4;

struct PreprocessParams {
  double C = kDefaultC;
  double epsilon = kDefaultEpsilon;
  // Per feature, in transformed space (after ln / fp).
  std::array<Standardizer, kNumFeatures> features{};
  // Statistics of ln(EKE).
  Standardizer target{};

  bool operator==(const PreprocessParams&) const = default;
};

// Transformed but unstandardized features: ln mke, rossby, fp(vort), ln slope.
// |vort| < epsilon is clamped to 0 first. Throws DomainError for
// non-positive mke or slope.
std::array<double, kNumFeatures> transform_features(
    const FeatureVector& fv, double C = kDefaultC, double epsilon = kDefaultEpsilon);

// Standardized transformed features as f32 [4].
Tensor preprocess(const FeatureVector& fv, const PreprocessParams& p);
std::array<double, kNumFeatures> preprocess_values(
    const FeatureVector& fv, const PreprocessParams& p);

// exp(y_std * std + mean) of the stored ln(EKE) statistics.
double eke_decode(double y_std, const PreprocessParams& p);
double eke_encode(double eke, const PreprocessParams& p);

// Fits feature and target statistics from training samples.
PreprocessParams fit_preprocess(
    const std::vector<FeatureVector>& samples, const std::vector<double>& eke,
    double C = kDefaultC, double epsilon = kDefaultEpsilon);

// JSON sidecar.
std::string format_params(const PreprocessParams& p);
PreprocessParams parse_params(const std::string& text);
void save_params(const std::string& path, const PreprocessParams& p);
PreprocessParams load_params(const std::string& path);

struct SampleWeights {
  std::vector<double> weights;  // > 0, sum to 1
  double epoch_fraction = kDefaultEpochFraction;
};

// Equal-width histogram over [min, max]; each sample weighs 1 / density of
// its bin, normalized to sum 1. Throws DegenerateRange when min == max.
SampleWeights inverse_density_weights(const std::vector<double>& values, int n_bins = kDefaultBins);

// floor(fraction * n) indices drawn with replacement, P(i) proportional to
// w.weights[i]. Deterministic for a given seed.
std::vector<size_t> weighted_epoch_sample(
    size_t n, const SampleWeights& w, double fraction, uint64_t seed);

}  // namespace orca::eke
