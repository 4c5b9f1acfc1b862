#include "tnf/nn/ops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tnf/nn/kernels.hpp"

namespace tnf::nn {

namespace {

[[noreturn]] void shape_error(const char* op, std::size_t a, std::size_t b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

}  // namespace

void matmul_into(ConstView a, ConstView b, View c, bool accumulate) {
    if (a.cols != b.rows) shape_error("matmul", a.cols, b.rows);
    if (c.rows != a.rows || c.cols != b.cols) shape_error("matmul output", c.rows * c.cols, a.rows * b.cols);
    kernels::parallel::gemm_nn(a.data, b.data, c.data, a.rows, a.cols, b.cols, accumulate);
}

void matmul_nt_into(ConstView a, ConstView b, View c, bool accumulate) {
    if (a.cols != b.cols) shape_error("matmul_nt", a.cols, b.cols);
    if (c.rows != a.rows || c.cols != b.rows) shape_error("matmul_nt output", c.rows * c.cols, a.rows * b.rows);
    kernels::parallel::gemm_nt(a.data, b.data, c.data, a.rows, a.cols, b.rows, accumulate);
}

void matmul_tn_into(ConstView a, ConstView b, View c, bool accumulate) {
    if (a.rows != b.rows) shape_error("matmul_tn", a.rows, b.rows);
    if (c.rows != a.cols || c.cols != b.cols) shape_error("matmul_tn output", c.rows * c.cols, a.cols * b.cols);
    kernels::parallel::gemm_tn(a.data, b.data, c.data, a.cols, a.rows, b.cols, accumulate);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    matmul_into(view(a), view(b), view(c), false);
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.rows());
    matmul_nt_into(view(a), view(b), view(c), false);
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix c(a.cols(), b.cols());
    matmul_tn_into(view(a), view(b), view(c), false);
    return c;
}

void softmax_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : row) mx = std::max(mx, v);
        if (!std::isfinite(mx)) throw std::domain_error("softmax row has no finite entry");
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : row) v *= inv;
    }
}

Matrix attention_probs(const Matrix& q, const Matrix& k, std::span<const std::uint8_t> key_valid) {
    if (q.cols() != k.cols()) shape_error("attention Q/K", q.cols(), k.cols());
    if (!key_valid.empty() && key_valid.size() != k.rows()) shape_error("attention mask", key_valid.size(), k.rows());
    Matrix s = matmul_nt(q, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (std::size_t i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = (!key_valid.empty() && !key_valid[j]) ? -std::numeric_limits<double>::infinity() : row[j] * scale;
        }
    }
    softmax_rows(s);
    return s;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const std::uint8_t> key_valid) {
    if (k.rows() != v.rows()) shape_error("attention K/V", k.rows(), v.rows());
    return matmul(attention_probs(q, k, key_valid), v);
}

Matrix column_block(const Matrix& m, std::size_t begin, std::size_t width) {
    if (begin + width > m.cols()) shape_error("column_block", begin + width, m.cols());
    Matrix out(m.rows(), width);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto src = m.row(r).subspan(begin, width);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

void add_column_block(Matrix& dst, const Matrix& block, std::size_t begin) {
    if (block.rows() != dst.rows() || begin + block.cols() > dst.cols()) shape_error("add_column_block", block.cols(), dst.cols());
    for (std::size_t r = 0; r < dst.rows(); ++r) {
        auto d = dst.row(r).subspan(begin, block.cols());
        auto s = block.row(r);
        for (std::size_t c = 0; c < s.size(); ++c) d[c] += s[c];
    }
}

Matrix multi_head_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv, const Matrix& wo,
                            int heads, std::span<const std::uint8_t> key_valid) {
    const std::size_t d = wq.cols();
    if (heads <= 0 || d % static_cast<std::size_t>(heads) != 0) {
        throw std::invalid_argument("multi_head_attention: d=" + std::to_string(d) + " not divisible by H=" +
                                    std::to_string(heads));
    }
    const std::size_t dk = d / static_cast<std::size_t>(heads);
    const Matrix q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
    Matrix concat(x.rows(), v.cols());
    for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
        const Matrix head = attention(column_block(q, h * dk, dk), column_block(k, h * dk, dk),
                                      column_block(v, h * dk, dk), key_valid);
        add_column_block(concat, head, h * dk);
    }
    return matmul(concat, wo);
}

Matrix ffn(const Matrix& h, const Matrix& w1, std::span<const double> b1, const Matrix& w2, std::span<const double> b2) {
    if (b1.size() != w1.cols()) shape_error("ffn b1", b1.size(), w1.cols());
    if (b2.size() != w2.cols()) shape_error("ffn b2", b2.size(), w2.cols());
    Matrix a = matmul(h, w1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = std::max(0.0, row[c] + b1[c]);
    }
    Matrix out = matmul(a, w2);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b2[c];
    }
    return out;
}

Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta, LayerNormCache* cache) {
    const std::size_t n = x.rows(), d = x.cols();
    if (gamma.size() != d || beta.size() != d) shape_error("layer_norm", gamma.size(), d);
    Matrix y(n, d);
    if (cache) {
        cache->xhat = Matrix(n, d);
        cache->rstd.assign(n, 0.0);
    }
    for (std::size_t r = 0; r < n; ++r) {
        auto xr = x.row(r);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        auto yr = y.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            const double xh = (xr[c] - mean) * rstd;
            if (cache) cache->xhat(r, c) = xh;
            yr[c] = gamma[c] * xh + beta[c];
        }
        if (cache) cache->rstd[r] = rstd;
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, std::span<const double> gamma,
                           std::span<double> dgamma, std::span<double> dbeta) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Matrix dx(n, d);
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < n; ++r) {
        auto g = dy.row(r);
        auto xh = cache.xhat.row(r);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            dgamma[c] += g[c] * xh[c];
            dbeta[c] += g[c];
            dxhat[c] = g[c] * gamma[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        auto out = dx.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            out[c] = cache.rstd[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    return dx;
}

}  // namespace tnf::nn
