#include "embanon/numerics/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace embanon::numerics {

namespace {

std::atomic<std::size_t> g_threads{1};

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 512;
constexpr std::size_t kRows = 4;
// Below this many multiply-adds threading costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 22;

// Computes columns [j_begin, j_end) of C. Every C element accumulates its k
// terms in ascending order regardless of blocking.
void gemm_columns(std::size_t m, std::size_t n, std::size_t k,
                  const double* __restrict a, const double* __restrict b,
                  double* __restrict c, std::size_t j_begin,
                  std::size_t j_end) {
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t k1 = std::min(k, k0 + kBlockK);
    for (std::size_t j0 = j_begin; j0 < j_end; j0 += kBlockN) {
      const std::size_t j1 = std::min(j_end, j0 + kBlockN);
      std::size_t i = 0;
      for (; i + kRows <= m; i += kRows) {
        double* __restrict c0 = c + (i + 0) * n;
        double* __restrict c1 = c + (i + 1) * n;
        double* __restrict c2 = c + (i + 2) * n;
        double* __restrict c3 = c + (i + 3) * n;
        for (std::size_t p = k0; p < k1; ++p) {
          const double a0 = a[(i + 0) * k + p];
          const double a1 = a[(i + 1) * k + p];
          const double a2 = a[(i + 2) * k + p];
          const double a3 = a[(i + 3) * k + p];
          const double* __restrict brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) {
            const double bv = brow[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        double* __restrict ci = c + i * n;
        for (std::size_t p = k0; p < k1; ++p) {
          const double av = a[i * k + p];
          const double* __restrict brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) ci[j] += av * brow[j];
        }
      }
    }
  }
}

}  // namespace

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }
std::size_t num_threads() { return g_threads; }

void gemm(std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  if (m == 0 || n == 0 || k == 0) return;

  const std::size_t threads =
      (m * n * k >= kParallelWork) ? std::min(g_threads.load(), n / 64 + 1)
                                   : 1;
  if (threads <= 1) {
    gemm_columns(m, n, k, a.data(), b.data(), c.data(), 0, n);
    return;
  }
  // Column chunks are multiples of 8 to keep vector lanes aligned.
  const std::size_t chunk = ((n + threads - 1) / threads + 7) / 8 * 8;
  std::vector<std::jthread> workers;
  for (std::size_t j0 = 0; j0 < n; j0 += chunk) {
    const std::size_t j1 = std::min(n, j0 + chunk);
    workers.emplace_back([=] {
      gemm_columns(m, n, k, a.data(), b.data(), c.data(), j0, j1);
    });
  }
}

void transpose(std::size_t m, std::size_t n, std::span<const double> in,
               std::span<double> out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < m; i0 += kTile) {
    const std::size_t i1 = std::min(m, i0 + kTile);
    for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
      const std::size_t j1 = std::min(n, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
      }
    }
  }
}

}  // namespace embanon::numerics
