#include "orca/model.h"

#include <cstring>

#include "orca/kernels.h"

namespace orca {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'N', 'N'};
constexpr uint16_t kVersion = 1;

enum LayerKind : uint8_t { kDense = 1, kRelu = 2, kTanh = 3, kAffine = 4 };

}  // namespace

std::optional<uint32_t>
ModelSpec::input_width() const
{
  for (const auto& l : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      return d->in;
    }
  }
  return std::nullopt;
}

uint32_t
ModelSpec::output_width(uint32_t input) const
{
  uint32_t w = input;
  for (const auto& l : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      w = d->out;
    }
  }
  return w;
}

ModelSpec
load_model(ByteSpan blob)
{
  ByteReader in(blob);
  if (blob.size() < 4 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "blob does not start with \"SSNN\"");
  }
  in.raw(4);
  const uint16_t version = in.u16();
  if (version != kVersion) {
    throw Error(ErrorCode::BadVersion, "SSNN version " + std::to_string(version));
  }
  const uint16_t count = in.u16();
  ModelSpec m;
  std::optional<uint32_t> width;
  for (uint16_t i = 0; i < count; ++i) {
    const uint8_t kind = in.u8();
    switch (kind) {
      case kDense: {
        DenseLayer d;
        d.in = in.u32();
        d.out = in.u32();
        if (d.in == 0 || d.out == 0) {
          throw Error(ErrorCode::DimMismatch, "Dense layer with zero width");
        }
        if (width && *width != d.in) {
          throw Error(
              ErrorCode::DimMismatch, "layer " + std::to_string(i) + " expects " +
                                          std::to_string(d.in) + " inputs, previous Dense gives " +
                                          std::to_string(*width));
        }
        const uint64_t nw = static_cast<uint64_t>(d.in) * d.out;
        if (nw * 4 > in.remaining()) {
          throw Error(ErrorCode::Truncated, "Dense weights truncated");
        }
        d.weights.resize(static_cast<size_t>(nw));
        for (auto& v : d.weights) {
          v = in.f32();
        }
        d.bias.resize(d.out);
        for (auto& v : d.bias) {
          v = in.f32();
        }
        width = d.out;
        m.layers.emplace_back(std::move(d));
        break;
      }
      case kRelu: m.layers.emplace_back(ReluLayer{}); break;
      case kTanh: m.layers.emplace_back(TanhLayer{}); break;
      case kAffine: {
        AffineLayer a;
        a.scale = in.f32();
        a.shift = in.f32();
        m.layers.emplace_back(a);
        break;
      }
      default:
        throw Error(ErrorCode::BadModel, "unknown layer kind " + std::to_string(kind));
    }
  }
  if (!in.done()) {
    throw Error(ErrorCode::BadModel, "trailing bytes after last layer");
  }
  return m;
}

Bytes
encode_model(const std::vector<Layer>& layers)
{
  ByteWriter w;
  for (char c : kMagic) {
    w.u8(static_cast<uint8_t>(c));
  }
  w.u16(kVersion);
  w.u16(static_cast<uint16_t>(layers.size()));
  for (const auto& l : layers) {
    std::visit(
        [&w](const auto& layer) {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, DenseLayer>) {
            w.u8(kDense);
            w.u32(layer.in);
            w.u32(layer.out);
            for (float v : layer.weights) w.f32(v);
            for (float v : layer.bias) w.f32(v);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            w.u8(kRelu);
          } else if constexpr (std::is_same_v<L, TanhLayer>) {
            w.u8(kTanh);
          } else {
            w.u8(kAffine);
            w.f32(layer.scale);
            w.f32(layer.shift);
          }
        },
        l);
  }
  return std::move(w).take();
}

void
check_model_input(const ModelSpec& m, const Tensor& batch)
{
  if (batch.dtype() != DType::f32) {
    throw Error(
        ErrorCode::DTypeMismatch,
        std::string("model input must be f32, got ") + dtype_name(batch.dtype()));
  }
  if (batch.ndim() != 2) {
    throw Error(
        ErrorCode::WidthMismatch,
        "model input must be 2-D, got " + std::to_string(batch.ndim()) + " dims");
  }
  const auto width = m.input_width();
  if (width && batch.shape()[1] != *width) {
    throw Error(
        ErrorCode::WidthMismatch, "model expects width " + std::to_string(*width) +
                                      ", got " + std::to_string(batch.shape()[1]));
  }
}

Tensor
run_model_exec(const ModelSpec& m, const Tensor& batch, KernelPolicy policy)
{
  check_model_input(m, batch);
  const size_t rows = batch.shape()[0];
  uint32_t width = batch.shape()[1];
  std::vector<float> x = batch.values<float>();
  std::vector<float> y;
  const bool par = policy == KernelPolicy::parallel;

  for (const auto& l : m.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      y.assign(rows * d->out, 0.0f);
      if (par) {
        kernels::dense_parallel(x, rows, d->in, d->out, d->weights, d->bias, y);
      } else {
        kernels::dense_serial(x, rows, d->in, d->out, d->weights, d->bias, y);
      }
      x.swap(y);
      width = d->out;
    } else if (std::holds_alternative<ReluLayer>(l)) {
      par ? kernels::relu_parallel(x) : kernels::relu_serial(x);
    } else if (std::holds_alternative<TanhLayer>(l)) {
      par ? kernels::tanh_parallel(x) : kernels::tanh_serial(x);
    } else {
      const auto& a = std::get<AffineLayer>(l);
      par ? kernels::affine_parallel(x, a.scale, a.shift)
          : kernels::affine_serial(x, a.scale, a.shift);
    }
  }
  return Tensor::from_values<float>({static_cast<uint32_t>(rows), width}, x);
}

}  // namespace orca
