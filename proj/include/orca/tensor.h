#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "orca/bytes.h"
#include "orca/error.h"

namespace orca {

enum class DType : uint8_t { f32 = 1, f64 = 2, i32 = 3, i64 = 4, u8 = 5 };

inline constexpr size_t kMaxDims = 8;

size_t dtype_width(DType dtype);
std::optional<DType> dtype_from_code(uint8_t code);
const char* dtype_name(DType dtype);
std::optional<DType> dtype_from_name(std::string_view name);

template <class T> struct DTypeOf;
template <> struct DTypeOf<float> { static constexpr DType value = DType::f32; };
template <> struct DTypeOf<double> { static constexpr DType value = DType::f64; };
template <> struct DTypeOf<int32_t> { static constexpr DType value = DType::i32; };
template <> struct DTypeOf<int64_t> { static constexpr DType value = DType::i64; };
template <> struct DTypeOf<uint8_t> { static constexpr DType value = DType::u8; };

using Shape = std::vector<uint32_t>;

size_t shape_elements(const Shape& shape);

// Immutable n-dimensional array: dtype, row-major shape, contiguous payload.
// Scalars are shape [1]; zero-dim tensors do not exist.
class Tensor {
 public:
  Tensor() = default;

  // Validates shape and payload length (make_tensor).
  Tensor(DType dtype, Shape shape, Bytes data);

  template <class T>
  static Tensor from_values(Shape shape, std::span<const T> values)
  {
    Bytes data(values.size() * sizeof(T));
    if (!values.empty()) {
      std::memcpy(data.data(), values.data(), data.size());
    }
    return Tensor(DTypeOf<T>::value, std::move(shape), std::move(data));
  }

  template <class T>
  static Tensor from_values(Shape shape, const std::vector<T>& values)
  {
    return from_values<T>(std::move(shape), std::span<const T>(values));
  }

  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  size_t ndim() const { return shape_.size(); }
  size_t num_elements() const { return shape_elements(shape_); }
  ByteSpan data() const { return data_; }

  // Copies the payload out as T. Throws DTypeMismatch when T does not match.
  template <class T>
  std::vector<T> values() const
  {
    if (DTypeOf<T>::value != dtype_) {
      throw Error(
          ErrorCode::DTypeMismatch,
          std::string("tensor holds ") + dtype_name(dtype_) + ", requested " +
              dtype_name(DTypeOf<T>::value));
    }
    std::vector<T> out(num_elements());
    if (!out.empty()) {
      std::memcpy(out.data(), data_.data(), data_.size());
    }
    return out;
  }

  // Element i converted to double, for any dtype.
  double as_double(size_t i) const;

  bool operator==(const Tensor&) const = default;

 private:
  DType dtype_ = DType::f32;
  Shape shape_;
  Bytes data_;
};

Tensor make_tensor(DType dtype, Shape shape, Bytes data);

// dtype u8 | ndim u8 | dims u32[ndim] | payload, little-endian.
Bytes serialize_tensor(const Tensor& t);
void serialize_tensor(const Tensor& t, ByteWriter& out);
size_t serialized_size(const Tensor& t);

// Requires the buffer to hold exactly one tensor.
Tensor deserialize_tensor(ByteSpan bytes);
// Reads one tensor from the stream and leaves the reader after it.
Tensor read_tensor(ByteReader& in);

enum class MetaKind : uint8_t { scalar_f64 = 1, scalar_i64 = 2, string_list = 3 };

struct MetaField {
  std::string name;
  std::variant<std::vector<double>, std::vector<int64_t>, std::vector<std::string>>
      values;

  MetaKind kind() const { return static_cast<MetaKind>(values.index() + 1); }
  bool operator==(const MetaField&) const = default;
};

// Named group of tensors and metadata addressed by a single key.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  // Throws DuplicateName.
  void add_tensor(const std::string& name, Tensor t);
  const Tensor& get_tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const { return tensors_.count(name) != 0; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  // Appends to the named field, creating it. Mixing kinds in one field
  // throws MetaKindMismatch.
  void add_meta_scalar(const std::string& name, double v);
  void add_meta_scalar(const std::string& name, int64_t v);
  void add_meta_string(const std::string& name, std::string v);
  const MetaField& get_meta(const std::string& name) const;
  const std::map<std::string, MetaField>& meta() const { return meta_; }

  bool operator==(const Dataset&) const = default;

 private:
  template <class T>
  void append_meta(const std::string& name, T v);

  std::string name_;
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, MetaField> meta_;
};

Dataset dataset_add_tensor(Dataset ds, const std::string& name, Tensor t);

// u16 tensor count | (name, tensor)* | u16 meta count | meta records.
// Meta record: name | kind u8 | count u32 | values. The dataset name is the
// storage key and is not part of the blob.
Bytes serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(ByteSpan bytes, std::string name);

}  // namespace orca
