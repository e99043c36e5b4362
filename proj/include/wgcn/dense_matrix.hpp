#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgcn {

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_) {
            throw std::invalid_argument("DenseMatrix: value count " + std::to_string(values_.size()) +
                                        " does not match shape " + std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

/// a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

/// aᵀ * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.rows() == b.rows(), "matmul_tn: row counts differ");
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto a_row = a.row(k);
        const auto b_row = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a_row[i];
            if (aki == 0.0) continue;
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
        }
    }
    return out;
}

/// a * bᵀ
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.cols(), "matmul_nt: column counts differ");
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto a_row = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto b_row = b.row(j);
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) sum += a_row[k] * b_row[k];
            out(i, j) = sum;
        }
    }
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline double squared_norm(const DenseMatrix& a) {
    double sum = 0.0;
    for (double v : a.values()) sum += v * v;
    return sum;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    return worst;
}

}  // namespace wgcn
