#pragma once

#include <cstddef>

// Dense GEMM kernels. Shapes are given as (m, k, n):
//   nn:  C[m x n] (+)= A[m x k]   * B[k x n]
//   nt:  C[m x n] (+)= A[m x k]   * B[n x k]^T
//   tn:  C[m x n] (+)= A[k x m]^T * B[k x n]
// Every variant writes each output element from exactly one thread and sums
// over k in ascending order, so results do not depend on the thread count.

namespace tnf::kernels {

/// Straight triple loops. The reference the optimized path is tested against.
namespace serial {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
}  // namespace serial

/// Cache-friendly loop order, OpenMP over output rows when the problem is
/// large and no enclosing parallel region exists.
namespace parallel {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
}  // namespace parallel

/// Work (m*k*n) below which the parallel kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 18;

int max_threads();

}  // namespace tnf::kernels
