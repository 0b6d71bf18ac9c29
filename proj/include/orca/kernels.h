#pragma once

// Row-batched kernels behind model execution. Each op has a serial reference
// and an OpenMP version that splits rows across threads. Per-row accumulation
// order is identical in both, so results are bitwise equal.

#include <cstdint>
#include <span>

namespace orca::kernels {

// y[r, o] = sum_i x[r, i] * w[o, i] + b[o]; w is out x in, row-major.
void dense_serial(
    std::span<const float> x, size_t rows, uint32_t in, uint32_t out,
    std::span<const float> w, std::span<const float> b, std::span<float> y);
void dense_parallel(
    std::span<const float> x, size_t rows, uint32_t in, uint32_t out,
    std::span<const float> w, std::span<const float> b, std::span<float> y);

void relu_serial(std::span<float> x);
void relu_parallel(std::span<float> x);

void tanh_serial(std::span<float> x);
void tanh_parallel(std::span<float> x);

void affine_serial(std::span<float> x, float scale, float shift);
void affine_parallel(std::span<float> x, float scale, float shift);

int max_threads();

}  // namespace orca::kernels
