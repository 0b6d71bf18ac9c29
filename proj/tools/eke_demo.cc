// Online EKE inference demo: synthetic features on an NX x NY grid go
// through a stored preprocessing script and a stored 4 -> 1 network on a
// local cluster, and are checked against the same pipeline run in-process.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "orca/client.h"
#include "orca/eke.h"
#include "orca/eke_demo.h"
#include "orca/launcher.h"

int
main(int argc, char** argv)
{
  CLI::App app{"eke-demo: end-to-end EKE inference through the cluster"};
  std::string grid = "64,64";
  uint32_t shards = 2;
  uint64_t seed = 1;
  std::string model_path, params_out, model_out, shard_exe;
  bool zero = false;
  double tolerance = 1e-6;
  app.add_option("--grid", grid, "NX,NY");
  app.add_option("--shards", shards, "shard count")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "feature seed");
  app.add_option("--model", model_path, "SSNN model file (default: built-in stub)");
  app.add_flag("--zero-model", zero, "use the all-zero stub model");
  app.add_option("--save-params", params_out, "write the fitted preprocessing sidecar here");
  app.add_option("--save-model", model_out, "write the model blob in use here");
  app.add_option("--shard-exe", shard_exe, "orca-shard executable");
  app.add_option("--tolerance", tolerance, "max relative error against the local pipeline");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto comma = grid.find(',');
    if (comma == std::string::npos) {
      throw orca::Error(orca::ErrorCode::Malformed, "--grid expects NX,NY");
    }
    const auto nx = static_cast<uint32_t>(std::stoul(grid.substr(0, comma)));
    const auto ny = static_cast<uint32_t>(std::stoul(grid.substr(comma + 1)));

    const auto g = orca::eke::synthetic_grid(nx, ny, seed);
    const auto params = orca::eke::fit_preprocess(g.points, orca::eke::synthetic_eke(g, seed));
    if (!params_out.empty()) {
      orca::eke::save_params(params_out, params);
    }

    std::vector<orca::Layer> layers;
    orca::Bytes blob;
    if (!model_path.empty()) {
      std::ifstream in(model_path, std::ios::binary);
      if (!in) throw orca::Error(orca::ErrorCode::IoError, "cannot read " + model_path);
      blob.assign(std::istreambuf_iterator<char>(in), {});
      layers = orca::load_model(blob).layers;
    } else {
      layers = zero ? orca::eke::zero_model() : orca::eke::stub_model();
      blob = orca::encode_model(layers);
    }
    if (!model_out.empty()) {
      std::ofstream out(model_out, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
      if (!out) throw orca::Error(orca::ErrorCode::IoError, "cannot write " + model_out);
    }

    orca::OrchestratorOptions opts;
    opts.shard_exe = shard_exe;
    auto orc = orca::launch_orchestrator(shards, 0, opts);
    auto client = orca::Client::connect(orc.seed_address());
    orca::eke::DemoNames names;
    client.set_model(names.model, blob, static_cast<uint32_t>(g.points.size()));
    client.set_script(names.script, orca::eke::preprocessing_script(params, names.script));

    const auto field = orca::eke::demo_inference(client, g.points, params, names);
    const auto oracle = orca::eke::local_inference(layers, g.points, params);

    double max_rel = 0.0;
    for (size_t i = 0; i < field.size(); ++i) {
      max_rel = std::max(max_rel, std::abs(field[i] - oracle[i]) / std::abs(oracle[i]));
    }
    const double min_eke = *std::min_element(field.begin(), field.end());
    const double max_eke = *std::max_element(field.begin(), field.end());
    std::cout << "points " << field.size() << "\n"
              << "shards " << shards << "\n"
              << "min_eke " << min_eke << "\n"
              << "max_eke " << max_eke << "\n"
              << "max_rel_err " << max_rel << "\n";
    const bool ok = field.size() == oracle.size() && min_eke > 0.0 && max_rel <= tolerance;
    std::cout << (ok ? "ok" : "MISMATCH") << std::endl;
    return ok ? 0 : 1;
  }
  catch (const std::exception& e) {
    std::cerr << "eke-demo: " << e.what() << std::endl;
    return 2;
  }
}
