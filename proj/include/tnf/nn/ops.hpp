#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnf/nn/matrix.hpp"

namespace tnf::nn {

// Matrix products on the parallel kernels. Shapes are checked and a
// std::invalid_argument is thrown on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
void matmul_into(ConstView a, ConstView b, View c, bool accumulate);
void matmul_nt_into(ConstView a, ConstView b, View c, bool accumulate);
void matmul_tn_into(ConstView a, ConstView b, View c, bool accumulate);

/// Row-wise softmax in place. Entries equal to -inf get probability 0.
void softmax_rows(Matrix& m);

/// Softmax(Q K^T / sqrt(d_k) + mask) with d_k = Q.cols(). `key_valid`, when
/// non-empty, marks keys that may be attended (others get -inf).
Matrix attention_probs(const Matrix& q, const Matrix& k, std::span<const std::uint8_t> key_valid = {});

/// Softmax(Q K^T / sqrt(d_k)) V.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const std::uint8_t> key_valid = {});

/// Columns [begin, begin+width) of m as a new matrix, and the inverse scatter.
Matrix column_block(const Matrix& m, std::size_t begin, std::size_t width);
void add_column_block(Matrix& dst, const Matrix& block, std::size_t begin);

/// Concat(head_1..head_H) W^O with head_h = Attention(X Wq_h, X Wk_h, X Wv_h),
/// where Wq_h is the h-th block of d/H columns of wq. Throws
/// std::invalid_argument when d is not divisible by H.
Matrix multi_head_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv, const Matrix& wo,
                            int heads, std::span<const std::uint8_t> key_valid = {});

/// ReLU(h W1 + b1) W2 + b2, per position.
Matrix ffn(const Matrix& h, const Matrix& w1, std::span<const double> b1, const Matrix& w2, std::span<const double> b2);

inline constexpr double kLayerNormEps = 1e-12;

struct LayerNormCache {
    Matrix xhat;
    std::vector<double> rstd;
};

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per row.
Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                  LayerNormCache* cache = nullptr);

/// Backward of layer_norm; accumulates into dgamma/dbeta, returns dx.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, std::span<const double> gamma,
                           std::span<double> dgamma, std::span<double> dbeta);

}  // namespace tnf::nn
