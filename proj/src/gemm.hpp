#pragma once

#include <cstddef>

namespace salsanet::nn::detail {

// C[m x n] += A[m x k] * B[k x n], all row-major and densely packed.
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                     float* c);

// dst[cols x rows] = transpose(src[rows x cols])
void transpose(std::size_t rows, std::size_t cols, const float* src, float* dst);

}  // namespace salsanet::nn::detail
