#include "orca/kernels.h"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace orca::kernels {

namespace {

inline void
dense_row(
    const float* x, uint32_t in, uint32_t out, const float* w, const float* b,
    float* y)
{
  for (uint32_t o = 0; o < out; ++o) {
    const float* wr = w + static_cast<size_t>(o) * in;
    // Double accumulation keeps long dot products within f32 rounding.
    double acc = b[o];
    for (uint32_t i = 0; i < in; ++i) {
      acc += static_cast<double>(x[i]) * wr[i];
    }
    y[o] = static_cast<float>(acc);
  }
}

// Elementwise loops below this size are not worth a parallel region.
constexpr long kParallelThreshold = 4096;

}  // namespace

void
dense_serial(
    std::span<const float> x, size_t rows, uint32_t in, uint32_t out,
    std::span<const float> w, std::span<const float> b, std::span<float> y)
{
  for (size_t r = 0; r < rows; ++r) {
    dense_row(x.data() + r * in, in, out, w.data(), b.data(), y.data() + r * out);
  }
}

void
dense_parallel(
    std::span<const float> x, size_t rows, uint32_t in, uint32_t out,
    std::span<const float> w, std::span<const float> b, std::span<float> y)
{
  const long n = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (n > 1)
  for (long r = 0; r < n; ++r) {
    dense_row(
        x.data() + static_cast<size_t>(r) * in, in, out, w.data(), b.data(),
        y.data() + static_cast<size_t>(r) * out);
  }
}

void
relu_serial(std::span<float> x)
{
  for (float& v : x) {
    v = v > 0.0f ? v : 0.0f;
  }
}

void
relu_parallel(std::span<float> x)
{
  const long n = static_cast<long>(x.size());
  float* p = x.data();
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    p[i] = p[i] > 0.0f ? p[i] : 0.0f;
  }
}

void
tanh_serial(std::span<float> x)
{
  for (float& v : x) {
    v = std::tanh(v);
  }
}

void
tanh_parallel(std::span<float> x)
{
  const long n = static_cast<long>(x.size());
  float* p = x.data();
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    p[i] = std::tanh(p[i]);
  }
}

void
affine_serial(std::span<float> x, float scale, float shift)
{
  for (float& v : x) {
    v = v * scale + shift;
  }
}

void
affine_parallel(std::span<float> x, float scale, float shift)
{
  const long n = static_cast<long>(x.size());
  float* p = x.data();
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    p[i] = p[i] * scale + shift;
  }
}

int
max_threads()
{
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace orca::kernels
