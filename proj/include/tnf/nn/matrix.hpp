#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace tnf::nn {

/// Dense row-major matrix of doubles. Vectors are 1 x n.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Non-owning view of a row-major block inside a parameter buffer.
template <typename T>
struct BasicView {
    T* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    operator BasicView<const T>() const { return {data, rows, cols}; }

    T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<T> row(std::size_t r) const { return {data + r * cols, cols}; }
    std::size_t size() const { return rows * cols; }
};
using View = BasicView<double>;
using ConstView = BasicView<const double>;

inline ConstView view(const Matrix& m) { return {m.data(), m.rows(), m.cols()}; }
inline View view(Matrix& m) { return {m.data(), m.rows(), m.cols()}; }

}  // namespace tnf::nn
