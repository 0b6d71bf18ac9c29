#pragma once

// End-to-end EKE inference: features go into the cluster, are transformed
// by a stored script, fed to a stored model, and decoded on the way out.

#include <cstdint>
#include <string>
#include <vector>

#include "orca/client.h"
#include "orca/eke.h"
#include "orca/model.h"
#include "orca/script.h"

namespace orca::eke {

struct Grid {
  uint32_t nx = 0;
  uint32_t ny = 0;
  std::vector<FeatureVector> points;  // row-major, nx * ny
};

// Smooth synthetic fields with noise; deterministic per seed. Vorticity
// changes sign across the domain and includes exact zeros.
Grid synthetic_grid(uint32_t nx, uint32_t ny, uint64_t seed);
// A plausible ln(EKE) target for the synthetic features, used to fit the
// target statistics.
std::vector<double> synthetic_eke(const Grid& g, uint64_t seed);

// Arity-4 script: ln / identity / fp / ln, each standardized, stacked into
// f32 [N, 4].
ScriptSpec preprocessing_script(const PreprocessParams& p, const std::string& name = "eke_preprocess");

// 4 -> 1 stand-ins for the trained network.
std::vector<Layer> zero_model();
std::vector<Layer> stub_model(uint64_t seed = 7);

struct DemoNames {
  std::string model = "eke_model";
  std::string script = "eke_preprocess";
  std::string key_base = "eke";
  // Points per round trip; 0 sends the whole grid at once.
  uint32_t chunk = 0;
};

// Model and script must already be set in the cluster.
std::vector<double> demo_inference(
    Client& client, const std::vector<FeatureVector>& points, const PreprocessParams& p,
    const DemoNames& names = {});

// Same computation without a cluster.
std::vector<double> local_inference(
    const std::vector<Layer>& model, const std::vector<FeatureVector>& points,
    const PreprocessParams& p);

}  // namespace orca::eke
