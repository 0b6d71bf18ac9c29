#include "orca/tensor.h"

#include <limits>

namespace orca {

size_t
dtype_width(DType dtype)
{
  switch (dtype) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i32: return 4;
    case DType::i64: return 8;
    case DType::u8: return 1;
  }
  throw Error(ErrorCode::BadDType, "unknown dtype");
}

std::optional<DType>
dtype_from_code(uint8_t code)
{
  if (code >= 1 && code <= 5) {
    return static_cast<DType>(code);
  }
  return std::nullopt;
}

const char*
dtype_name(DType dtype)
{
  switch (dtype) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
    case DType::i64: return "i64";
    case DType::u8: return "u8";
  }
  return "?";
}

std::optional<DType>
dtype_from_name(std::string_view name)
{
  for (uint8_t c = 1; c <= 5; ++c) {
    if (name == dtype_name(static_cast<DType>(c))) {
      return static_cast<DType>(c);
    }
  }
  return std::nullopt;
}

size_t
shape_elements(const Shape& shape)
{
  size_t n = 1;
  for (uint32_t d : shape) {
    n *= d;
  }
  return n;
}

namespace {

void
check_shape(const Shape& shape)
{
  if (shape.empty() || shape.size() > kMaxDims) {
    throw Error(
        ErrorCode::BadShape,
        "ndim must be in [1, 8], got " + std::to_string(shape.size()));
  }
  for (uint32_t d : shape) {
    if (d < 1) {
      throw Error(ErrorCode::BadShape, "dimension < 1");
    }
  }
}

}  // namespace

Tensor::Tensor(DType dtype, Shape shape, Bytes data)
    : dtype_(dtype), shape_(std::move(shape)), data_(std::move(data))
{
  if (!dtype_from_code(static_cast<uint8_t>(dtype))) {
    throw Error(ErrorCode::BadDType, "unknown dtype code");
  }
  check_shape(shape_);
  const size_t expected = num_elements() * dtype_width(dtype_);
  if (data_.size() != expected) {
    throw Error(
        ErrorCode::ShapeMismatch, "payload is " + std::to_string(data_.size()) +
                                      " bytes, shape needs " +
                                      std::to_string(expected));
  }
}

double
Tensor::as_double(size_t i) const
{
  const uint8_t* p = data_.data() + i * dtype_width(dtype_);
  switch (dtype_) {
    case DType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    case DType::f64: { double v; std::memcpy(&v, p, 8); return v; }
    case DType::i32: { int32_t v; std::memcpy(&v, p, 4); return v; }
    case DType::i64: { int64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
    case DType::u8: return *p;
  }
  return 0.0;
}

Tensor
make_tensor(DType dtype, Shape shape, Bytes data)
{
  return Tensor(dtype, std::move(shape), std::move(data));
}

size_t
serialized_size(const Tensor& t)
{
  return 2 + 4 * t.ndim() + t.data().size();
}

void
serialize_tensor(const Tensor& t, ByteWriter& out)
{
  out.u8(static_cast<uint8_t>(t.dtype()));
  out.u8(static_cast<uint8_t>(t.ndim()));
  for (uint32_t d : t.shape()) {
    out.u32(d);
  }
  // Host order is little-endian on every supported target, so the payload is
  // copied verbatim.
  static_assert(std::endian::native == std::endian::little);
  out.raw(t.data());
}

Bytes
serialize_tensor(const Tensor& t)
{
  ByteWriter w;
  serialize_tensor(t, w);
  return std::move(w).take();
}

Tensor
read_tensor(ByteReader& in)
{
  const uint8_t code = in.u8();
  const auto dtype = dtype_from_code(code);
  if (!dtype) {
    throw Error(ErrorCode::BadDType, "dtype code " + std::to_string(code));
  }
  const uint8_t ndim = in.u8();
  if (ndim == 0 || ndim > kMaxDims) {
    throw Error(ErrorCode::BadShape, "ndim " + std::to_string(ndim));
  }
  Shape shape(ndim);
  uint64_t elements = 1;
  for (auto& d : shape) {
    d = in.u32();
    if (d == 0) {
      throw Error(ErrorCode::BadShape, "dimension < 1");
    }
    elements *= d;
    if (elements > std::numeric_limits<uint32_t>::max() * uint64_t{16}) {
      throw Error(ErrorCode::BadShape, "tensor too large");
    }
  }
  const uint64_t nbytes = elements * dtype_width(*dtype);
  if (nbytes > in.remaining()) {
    throw Error(ErrorCode::Truncated, "payload shorter than shape requires");
  }
  const ByteSpan payload = in.raw(static_cast<size_t>(nbytes));
  return Tensor(*dtype, std::move(shape), Bytes(payload.begin(), payload.end()));
}

Tensor
deserialize_tensor(ByteSpan bytes)
{
  ByteReader in(bytes);
  Tensor t = read_tensor(in);
  if (!in.done()) {
    throw Error(
        ErrorCode::ShapeMismatch,
        std::to_string(in.remaining()) + " trailing bytes after payload");
  }
  return t;
}

void
Dataset::add_tensor(const std::string& name, Tensor t)
{
  if (name.empty()) {
    throw Error(ErrorCode::BadShape, "tensor name must be non-empty");
  }
  if (!tensors_.emplace(name, std::move(t)).second) {
    throw Error(ErrorCode::DuplicateName, "tensor '" + name + "' already in dataset");
  }
}

const Tensor&
Dataset::get_tensor(const std::string& name) const
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw Error(ErrorCode::NotFound, "no tensor '" + name + "' in dataset");
  }
  return it->second;
}

template <class T>
void
Dataset::append_meta(const std::string& name, T v)
{
  if (name.empty()) {
    throw Error(ErrorCode::MetaKindMismatch, "metadata name must be non-empty");
  }
  auto [it, inserted] = meta_.try_emplace(name);
  if (inserted) {
    it->second.name = name;
    it->second.values = std::vector<T>{};
  }
  auto* list = std::get_if<std::vector<T>>(&it->second.values);
  if (list == nullptr) {
    throw Error(ErrorCode::MetaKindMismatch, "field '" + name + "' holds another kind");
  }
  list->push_back(std::move(v));
}

void
Dataset::add_meta_scalar(const std::string& name, double v)
{
  append_meta(name, v);
}

void
Dataset::add_meta_scalar(const std::string& name, int64_t v)
{
  append_meta(name, v);
}

void
Dataset::add_meta_string(const std::string& name, std::string v)
{
  append_meta(name, std::move(v));
}

const MetaField&
Dataset::get_meta(const std::string& name) const
{
  auto it = meta_.find(name);
  if (it == meta_.end()) {
    throw Error(ErrorCode::NotFound, "no metadata field '" + name + "'");
  }
  return it->second;
}

Dataset
dataset_add_tensor(Dataset ds, const std::string& name, Tensor t)
{
  ds.add_tensor(name, std::move(t));
  return ds;
}

Bytes
serialize_dataset(const Dataset& ds)
{
  ByteWriter w;
  w.u16(static_cast<uint16_t>(ds.tensors().size()));
  for (const auto& [name, t] : ds.tensors()) {
    w.str(name);
    serialize_tensor(t, w);
  }
  w.u16(static_cast<uint16_t>(ds.meta().size()));
  for (const auto& [name, field] : ds.meta()) {
    w.str(name);
    w.u8(static_cast<uint8_t>(field.kind()));
    std::visit(
        [&w](const auto& list) {
          w.u32(static_cast<uint32_t>(list.size()));
          for (const auto& v : list) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) {
              w.f64(v);
            } else if constexpr (std::is_same_v<V, int64_t>) {
              w.i64(v);
            } else {
              w.str(v);
            }
          }
        },
        field.values);
  }
  return std::move(w).take();
}

Dataset
deserialize_dataset(ByteSpan bytes, std::string name)
{
  Dataset ds(std::move(name));
  ByteReader in(bytes);
  const uint16_t ntensors = in.u16();
  for (uint16_t i = 0; i < ntensors; ++i) {
    std::string tname = in.str();
    ds.add_tensor(tname, read_tensor(in));
  }
  const uint16_t nmeta = in.u16();
  for (uint16_t i = 0; i < nmeta; ++i) {
    const std::string fname = in.str();
    if (ds.meta().count(fname) != 0) {
      throw Error(ErrorCode::DuplicateName, "metadata field '" + fname + "' repeated");
    }
    const uint8_t kind = in.u8();
    const uint32_t count = in.u32();
    if (kind < 1 || kind > 3) {
      throw Error(ErrorCode::MetaKindMismatch, "metadata kind " + std::to_string(kind));
    }
    if (count == 0) {
      throw Error(ErrorCode::MetaKindMismatch, "empty metadata field '" + fname + "'");
    }
    for (uint32_t j = 0; j < count; ++j) {
      switch (static_cast<MetaKind>(kind)) {
        case MetaKind::scalar_f64: ds.add_meta_scalar(fname, in.f64()); break;
        case MetaKind::scalar_i64: ds.add_meta_scalar(fname, in.i64()); break;
        case MetaKind::string_list: ds.add_meta_string(fname, in.str()); break;
      }
    }
  }
  if (!in.done()) {
    throw Error(ErrorCode::ShapeMismatch, "trailing bytes after dataset");
  }
  return ds;
}

}  // namespace orca
