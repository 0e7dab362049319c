#include "gemm.hpp"

#include <algorithm>
#include <vector>

namespace salsanet::nn::detail {

namespace {

// Register tile and cache blocking. Both operands are packed so the kernel streams
// contiguous memory; the summation order depends only on (m, n, k).
constexpr std::size_t kRows = 8;
constexpr std::size_t kCols = 32;
constexpr std::size_t kDepthBlock = 256;
constexpr std::size_t kColBlock = 512;

std::size_t round_up(std::size_t v, std::size_t to) { return (v + to - 1) / to * to; }

inline void kernel(std::size_t k, const float* __restrict a, const float* __restrict b, float* __restrict c,
                   std::size_t ldc, std::size_t rows, std::size_t cols) {
  float acc[kRows][kCols] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * kCols;
    const float* acol = a + p * kRows;
    for (std::size_t r = 0; r < kRows; ++r) {
      const float av = acol[r];
      for (std::size_t j = 0; j < kCols; ++j) acc[r][j] += av * brow[j];
    }
  }
  if (rows == kRows && cols == kCols) {
    for (std::size_t r = 0; r < kRows; ++r)
      for (std::size_t j = 0; j < kCols; ++j) c[r * ldc + j] += acc[r][j];
    return;
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] += acc[r][j];
}

// Few output columns: transpose B (zero-padded to groups of four columns) and take dot
// products along k for two rows of A against four columns at a time.
constexpr std::size_t kNarrow = 16;
constexpr std::size_t kLanes = 16;

inline void dot_block(std::size_t rows, std::size_t k_main, std::size_t k, const float* a, const float* bt,
                      float* out /* [2][4] */) {
  float acc[2][4][kLanes] = {};
  const float* a0 = a;
  const float* a1 = rows > 1 ? a + k : a;
  for (std::size_t p = 0; p < k_main; p += kLanes) {
    for (std::size_t j = 0; j < 4; ++j) {
      const float* brow = bt + j * k + p;
      for (std::size_t l = 0; l < kLanes; ++l) {
        acc[0][j][l] += a0[p + l] * brow[l];
        acc[1][j][l] += a1[p + l] * brow[l];
      }
    }
  }
  for (std::size_t r = 0; r < 2; ++r) {
    const float* arow = r == 0 ? a0 : a1;
    for (std::size_t j = 0; j < 4; ++j) {
      float tail = 0.0f;
      for (std::size_t p = k_main; p < k; ++p) tail += arow[p] * bt[j * k + p];
      float sum = 0.0f;
      for (std::size_t l = 0; l < kLanes; ++l) sum += acc[r][j][l];
      out[r * 4 + j] = sum + tail;
    }
  }
}

void gemm_narrow(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  const std::size_t n_pad = round_up(n, 4);
  std::vector<float> bt(n_pad * k, 0.0f);
  transpose(k, n, b, bt.data());
  const std::size_t k_main = k / kLanes * kLanes;
  float out[8];
  for (std::size_t i = 0; i < m; i += 2) {
    const std::size_t rows = std::min<std::size_t>(2, m - i);
    for (std::size_t j0 = 0; j0 < n; j0 += 4) {
      dot_block(rows, k_main, k, a + i * k, bt.data() + j0 * k, out);
      const std::size_t cols = std::min<std::size_t>(4, n - j0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) c[(i + r) * n + j0 + j] += out[r * 4 + j];
    }
  }
}

}  // namespace

void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                     float* c) {
  if (m == 0 || n == 0 || k == 0) return;
  if (n < kNarrow && k >= kLanes) {
    gemm_narrow(m, n, k, a, b, c);
    return;
  }
  const std::size_t m_pad = round_up(m, kRows);
  std::vector<float> a_pack(m_pad * std::min(k, kDepthBlock));
  std::vector<float> b_pack(round_up(std::min(n, kColBlock), kCols) * std::min(k, kDepthBlock));
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t kb = std::min(kDepthBlock, k - k0);
    // A panels: [panel][p][row]
    for (std::size_t i0 = 0; i0 < m_pad; i0 += kRows) {
      float* dst = a_pack.data() + i0 * kb;
      for (std::size_t p = 0; p < kb; ++p) {
        for (std::size_t r = 0; r < kRows; ++r) {
          dst[p * kRows + r] = i0 + r < m ? a[(i0 + r) * k + k0 + p] : 0.0f;
        }
      }
    }
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
      const std::size_t nb = std::min(kColBlock, n - j0);
      const std::size_t nb_pad = round_up(nb, kCols);
      // B panels: [panel][p][col]
      for (std::size_t jp = 0; jp < nb_pad; jp += kCols) {
        float* dst = b_pack.data() + jp * kb;
        const std::size_t valid = std::min(kCols, nb - std::min(nb, jp));
        for (std::size_t p = 0; p < kb; ++p) {
          const float* src = b + (k0 + p) * n + j0 + jp;
          float* row = dst + p * kCols;
          std::copy(src, src + valid, row);
          std::fill(row + valid, row + kCols, 0.0f);
        }
      }
      for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
        const std::size_t rows = std::min(kRows, m - i0);
        for (std::size_t jp = 0; jp < nb; jp += kCols) {
          kernel(kb, a_pack.data() + i0 * kb, b_pack.data() + jp * kb, c + i0 * n + j0 + jp, n, rows,
                 std::min(kCols, nb - jp));
        }
      }
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const float* src, float* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t i1 = std::min(rows, i0 + kBlock);
      const std::size_t j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
      }
    }
  }
}

}  // namespace salsanet::nn::detail
