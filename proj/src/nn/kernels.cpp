#include "tnf/nn/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace tnf::kernels {

int max_threads() { return omp_get_max_threads(); }

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

}  // namespace serial

namespace parallel {

namespace {

bool go_parallel(std::size_t m, std::size_t k, std::size_t n) {
    return m > 1 && m * k * n >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

// C tiles of kRows x kCols stay in registers over the whole k loop. A is
// read as A[i, p] (a[i * k + p]) or, when TransA, as a[p * m + i].
constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 8;

template <bool TransA>
inline double a_at(const double* a, std::size_t i, std::size_t p, std::size_t m, std::size_t k) {
    return TransA ? a[p * m + i] : a[i * k + p];
}

// `panel` holds A rows i0..i0+kRows-1 packed as panel[p * kRows + r].
void tile(const double* panel, const double* b, double* c, std::size_t k, std::size_t n, std::size_t i0, std::size_t j0,
          bool accumulate) {
    double acc[kRows][kCols];
    for (std::size_t r = 0; r < kRows; ++r) {
        for (std::size_t q = 0; q < kCols; ++q) acc[r][q] = accumulate ? c[(i0 + r) * n + j0 + q] : 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
        const double* __restrict brow = b + p * n + j0;
        const double* __restrict av = panel + p * kRows;
        for (std::size_t r = 0; r < kRows; ++r) {
            for (std::size_t q = 0; q < kCols; ++q) acc[r][q] += av[r] * brow[q];
        }
    }
    for (std::size_t r = 0; r < kRows; ++r) {
        for (std::size_t q = 0; q < kCols; ++q) c[(i0 + r) * n + j0 + q] = acc[r][q];
    }
}

// Rows [i0, i1) and columns [j0, n), element by element.
template <bool TransA>
void edge(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, std::size_t i0,
          std::size_t i1, std::size_t j0, bool accumulate) {
    for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < n; ++j) {
            double s = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a_at<TransA>(a, i, p, m, k) * b[p * n + j];
            c[i * n + j] = s;
        }
    }
}

template <bool TransA>
void gemm_tiled(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                bool accumulate) {
    const std::size_t full_cols = n - n % kCols;
    const auto blocks = static_cast<std::int64_t>((m + kRows - 1) / kRows);
#pragma omp parallel for schedule(static) if (go_parallel(m, k, n))
    for (std::int64_t bb = 0; bb < blocks; ++bb) {
        const std::size_t i0 = static_cast<std::size_t>(bb) * kRows;
        const std::size_t i1 = std::min(m, i0 + kRows);
        if (i1 - i0 == kRows) {
            std::vector<double> panel(k * kRows);
            for (std::size_t p = 0; p < k; ++p) {
                for (std::size_t r = 0; r < kRows; ++r) panel[p * kRows + r] = a_at<TransA>(a, i0 + r, p, m, k);
            }
            for (std::size_t j0 = 0; j0 < full_cols; j0 += kCols) tile(panel.data(), b, c, k, n, i0, j0, accumulate);
            edge<TransA>(a, b, c, m, k, n, i0, i1, full_cols, accumulate);
        } else {
            edge<TransA>(a, b, c, m, k, n, i0, i1, 0, accumulate);
        }
    }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    gemm_tiled<false>(a, b, c, m, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    // Transpose B once so tiles read rows of B^T contiguously.
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    gemm_tiled<true>(a, b, c, m, k, n, accumulate);
}

}  // namespace parallel

}  // namespace tnf::kernels
