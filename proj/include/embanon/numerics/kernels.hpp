#pragma once

#include <cstddef>
#include <span>

namespace embanon::numerics {

// Upper bound on worker threads used by large kernels. Work is partitioned
// over output columns and each element is always reduced in the same order,
// so results are bit-identical for every thread count.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// C[m x n] (+)= A[m x k] * B[k x n], all row-major and contiguous.
void gemm(std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

// out[n x m] = in[m x n]^T
void transpose(std::size_t m, std::size_t n, std::span<const double> in,
               std::span<double> out);

}  // namespace embanon::numerics
