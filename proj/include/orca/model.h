#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "orca/bytes.h"
#include "orca/tensor.h"

namespace orca {

struct DenseLayer {
  uint32_t in = 0;
  uint32_t out = 0;
  std::vector<float> weights;  // out x in, row-major
  std::vector<float> bias;     // out
  bool operator==(const DenseLayer&) const = default;
};
struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};
struct TanhLayer {
  bool operator==(const TanhLayer&) const = default;
};
struct AffineLayer {
  float scale = 1.0f;
  float shift = 0.0f;
  bool operator==(const AffineLayer&) const = default;
};

using Layer = std::variant<DenseLayer, ReluLayer, TanhLayer, AffineLayer>;

enum class Device { cpu };

enum class KernelPolicy { serial, parallel };

// Sequential feed-forward network. Immutable once loaded.
struct ModelSpec {
  std::string name;
  std::vector<Layer> layers;
  uint32_t batch_size = 1;
  Device device = Device::cpu;

  // Width of the first Dense layer's input, if any Dense layer exists.
  std::optional<uint32_t> input_width() const;
  // Output width for a given input width.
  uint32_t output_width(uint32_t input) const;
};

// SSNN-v1 blob:
//   "SSNN" | version u16 = 1 | layer count u16 |
//   per layer: kind u8 (1 Dense, 2 ReLU, 3 Tanh, 4 Affine)
//     Dense:  in u32 | out u32 | weights f32[in*out] | bias f32[out]
//     Affine: scale f32 | shift f32
// Throws BadMagic, BadVersion, DimMismatch, Truncated.
ModelSpec load_model(ByteSpan blob);
Bytes encode_model(const std::vector<Layer>& layers);

// Validates a batch against the model: f32, 2-D, width == input width.
// Throws DTypeMismatch, WidthMismatch.
void check_model_input(const ModelSpec& m, const Tensor& batch);

// batch is f32 [N x in]; returns f32 [N x out]. Throws DTypeMismatch,
// WidthMismatch.
Tensor run_model_exec(
    const ModelSpec& m, const Tensor& batch,
    KernelPolicy policy = KernelPolicy::parallel);

}  // namespace orca
