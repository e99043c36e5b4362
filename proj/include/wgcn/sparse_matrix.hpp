#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wgcn/dense_matrix.hpp"

namespace wgcn {

/// Entries with magnitude below this are removed after a sparse-sparse product.
inline constexpr double kDropTolerance = 1e-12;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Compressed sparse row matrix in canonical form: column indices strictly
/// increasing within each row and no stored zeros. Immutable once built.
class SparseMatrix {
public:
    SparseMatrix() : row_offsets_(1, 0) {}

    /// Validating constructor from raw CSR arrays.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values)
        : rows_(rows),
          cols_(cols),
          row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)),
          values_(std::move(values)) {
        validate();
    }

    static SparseMatrix zeros(std::size_t rows, std::size_t cols) {
        SparseMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.row_offsets_.assign(rows + 1, 0);
        return m;
    }

    static SparseMatrix identity(std::size_t n, double scale = 1.0) {
        SparseMatrix m;
        m.rows_ = n;
        m.cols_ = n;
        m.row_offsets_.resize(n + 1);
        std::iota(m.row_offsets_.begin(), m.row_offsets_.end(), std::size_t{0});
        m.col_indices_.resize(n);
        std::iota(m.col_indices_.begin(), m.col_indices_.end(), std::size_t{0});
        m.values_.assign(n, scale);
        if (scale == 0.0) return zeros(n, n);
        return m;
    }

    /// Duplicates are summed; entries that sum to exactly zero are dropped.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
        for (const auto& t : triplets) {
            if (t.row >= rows || t.col >= cols) {
                throw std::invalid_argument("from_triplets: entry (" + std::to_string(t.row) + "," +
                                            std::to_string(t.col) + ") outside " + std::to_string(rows) +
                                            "x" + std::to_string(cols));
            }
        }
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.row_offsets_.assign(rows + 1, 0);
        std::size_t i = 0;
        while (i < triplets.size()) {
            const std::size_t r = triplets[i].row;
            const std::size_t c = triplets[i].col;
            double sum = 0.0;
            for (; i < triplets.size() && triplets[i].row == r && triplets[i].col == c; ++i)
                sum += triplets[i].value;
            if (sum != 0.0) {
                m.col_indices_.push_back(c);
                m.values_.push_back(sum);
                ++m.row_offsets_[r + 1];
            }
        }
        std::partial_sum(m.row_offsets_.begin(), m.row_offsets_.end(), m.row_offsets_.begin());
        return m;
    }

    static SparseMatrix from_dense(const DenseMatrix& d) {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t j = 0; j < d.cols(); ++j)
                if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
        return from_triplets(d.rows(), d.cols(), std::move(t));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<const std::size_t> row_indices(std::size_t r) const noexcept {
        return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
    }
    std::span<const double> row_values(std::size_t r) const noexcept {
        return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
    }

    /// Binary search within the row; zero when absent.
    double at(std::size_t r, std::size_t c) const {
        const auto idx = row_indices(r);
        const auto it = std::lower_bound(idx.begin(), idx.end(), c);
        if (it == idx.end() || *it != c) return 0.0;
        return row_values(r)[static_cast<std::size_t>(it - idx.begin())];
    }

    DenseMatrix to_dense() const {
        DenseMatrix d(rows_, cols_);
        for (std::size_t r = 0; r < rows_; ++r) {
            const auto idx = row_indices(r);
            const auto val = row_values(r);
            for (std::size_t k = 0; k < idx.size(); ++k) d(r, idx[k]) = val[k];
        }
        return d;
    }

    SparseMatrix transpose() const {
        SparseMatrix t;
        t.rows_ = cols_;
        t.cols_ = rows_;
        t.row_offsets_.assign(cols_ + 1, 0);
        for (std::size_t c : col_indices_) ++t.row_offsets_[c + 1];
        std::partial_sum(t.row_offsets_.begin(), t.row_offsets_.end(), t.row_offsets_.begin());
        t.col_indices_.resize(nnz());
        t.values_.resize(nnz());
        std::vector<std::size_t> cursor(t.row_offsets_.begin(), t.row_offsets_.end() - 1);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
                const std::size_t dst = cursor[col_indices_[k]]++;
                t.col_indices_[dst] = r;
                t.values_[dst] = values_[k];
            }
        }
        return t;
    }

    /// Rows selected in the given order.
    SparseMatrix select_rows(std::span<const std::size_t> rows) const {
        SparseMatrix s;
        s.rows_ = rows.size();
        s.cols_ = cols_;
        s.row_offsets_.assign(rows.size() + 1, 0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] >= rows_) throw std::invalid_argument("select_rows: row index out of range");
            const auto idx = row_indices(rows[i]);
            const auto val = row_values(rows[i]);
            s.col_indices_.insert(s.col_indices_.end(), idx.begin(), idx.end());
            s.values_.insert(s.values_.end(), val.begin(), val.end());
            s.row_offsets_[i + 1] = s.col_indices_.size();
        }
        return s;
    }

    /// Applies f to every stored value; results equal to zero are dropped.
    template <typename F>
    SparseMatrix map_values(F&& f) const {
        std::vector<Triplet> t;
        t.reserve(nnz());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
                t.push_back({r, col_indices_[k], f(r, col_indices_[k], values_[k])});
        return from_triplets(rows_, cols_, std::move(t));
    }

    bool is_square() const noexcept { return rows_ == cols_; }

    /// max |a_ij - a_ji|; requires a square matrix.
    double asymmetry() const {
        if (!is_square()) throw std::invalid_argument("asymmetry: matrix is not square");
        double worst = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            const auto idx = row_indices(r);
            const auto val = row_values(r);
            for (std::size_t k = 0; k < idx.size(); ++k)
                worst = std::max(worst, std::abs(val[k] - at(idx[k], r)));
        }
        return worst;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    void validate() const {
        if (row_offsets_.size() != rows_ + 1) throw std::invalid_argument("CSR: row_offsets length must be rows+1");
        if (row_offsets_.front() != 0) throw std::invalid_argument("CSR: row_offsets[0] must be 0");
        if (row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size())
            throw std::invalid_argument("CSR: nnz mismatch between offsets, indices and values");
        for (std::size_t r = 0; r < rows_; ++r) {
            if (row_offsets_[r] > row_offsets_[r + 1]) throw std::invalid_argument("CSR: row_offsets decreasing");
            for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
                if (col_indices_[k] >= cols_) throw std::invalid_argument("CSR: column index out of range");
                if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1])
                    throw std::invalid_argument("CSR: column indices not strictly increasing");
                if (values_[k] == 0.0) throw std::invalid_argument("CSR: explicit zero stored");
            }
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

/// Sparse-dense product a * b.
inline DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("spmm: dimension mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto out_row = out.row(r);
        const auto idx = a.row_indices(r);
        const auto val = a.row_values(r);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto b_row = b.row(idx[k]);
            const double v = val[k];
            for (std::size_t j = 0; j < b_row.size(); ++j) out_row[j] += v * b_row[j];
        }
    }
    return out;
}

/// aᵀ * b without materializing the transpose.
inline DenseMatrix spmm_tn(const SparseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("spmm_tn: dimension mismatch");
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto idx = a.row_indices(r);
        const auto val = a.row_values(r);
        const auto b_row = b.row(r);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto out_row = out.row(idx[k]);
            const double v = val[k];
            for (std::size_t j = 0; j < b_row.size(); ++j) out_row[j] += v * b_row[j];
        }
    }
    return out;
}

/// Sparse-sparse product (row-wise Gustavson with a dense accumulator).
inline SparseMatrix sp_sp_mm(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("sp_sp_mm: dimension mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
    std::vector<std::size_t> offsets(a.rows() + 1, 0);
    std::vector<std::size_t> indices;
    std::vector<double> values;

    std::vector<double> accum(b.cols(), 0.0);
    std::vector<char> occupied(b.cols(), 0);
    std::vector<std::size_t> touched;

    for (std::size_t r = 0; r < a.rows(); ++r) {
        touched.clear();
        const auto a_idx = a.row_indices(r);
        const auto a_val = a.row_values(r);
        for (std::size_t k = 0; k < a_idx.size(); ++k) {
            const auto b_idx = b.row_indices(a_idx[k]);
            const auto b_val = b.row_values(a_idx[k]);
            for (std::size_t q = 0; q < b_idx.size(); ++q) {
                const std::size_t c = b_idx[q];
                if (!occupied[c]) {
                    occupied[c] = 1;
                    touched.push_back(c);
                }
                accum[c] += a_val[k] * b_val[q];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t c : touched) {
            if (std::abs(accum[c]) >= kDropTolerance) {
                indices.push_back(c);
                values.push_back(accum[c]);
            }
            accum[c] = 0.0;
            occupied[c] = 0;
        }
        offsets[r + 1] = indices.size();
    }
    return SparseMatrix(a.rows(), b.cols(), std::move(offsets), std::move(indices), std::move(values));
}

/// Elementwise sum of two same-shape sparse matrices.
inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
    std::vector<Triplet> t;
    t.reserve(a.nnz() + b.nnz());
    for (const SparseMatrix* m : {&a, &b})
        for (std::size_t r = 0; r < m->rows(); ++r) {
            const auto idx = m->row_indices(r);
            const auto val = m->row_values(r);
            for (std::size_t k = 0; k < idx.size(); ++k) t.push_back({r, idx[k], val[k]});
        }
    return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

/// (a + aᵀ) / 2; removes floating-point asymmetry left by chained products.
inline SparseMatrix symmetrize(const SparseMatrix& a) {
    return add(a, a.transpose()).map_values([](std::size_t, std::size_t, double v) { return 0.5 * v; });
}

struct NormalizeStats {
    /// Rows with zero degree, left as all-zero rows and columns.
    std::size_t zero_degree_rows = 0;
};

inline constexpr double kSymmetryTolerance = 1e-10;

/// D^{-1/2} (A + I) D^{-1/2} with self-loops, else D^{-1/2} A D^{-1/2};
/// D holds the row sums of the matrix actually being normalized.
inline SparseMatrix normalize_symmetric(const SparseMatrix& a, bool add_self_loops, NormalizeStats* stats = nullptr) {
    if (!a.is_square()) throw std::invalid_argument("normalize_symmetric: matrix is not square");
    if (a.asymmetry() > kSymmetryTolerance) throw std::invalid_argument("normalize_symmetric: matrix is not symmetric");
    for (double v : a.values())
        if (v < 0.0) throw std::invalid_argument("normalize_symmetric: negative entry");

    const SparseMatrix m = add_self_loops ? add(a, SparseMatrix::identity(a.rows())) : a;
    std::vector<double> inv_sqrt_degree(m.rows(), 0.0);
    std::size_t zero_rows = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double degree = 0.0;
        for (double v : m.row_values(r)) degree += v;
        if (degree > 0.0) {
            inv_sqrt_degree[r] = 1.0 / std::sqrt(degree);
        } else {
            ++zero_rows;
        }
    }
    if (stats) stats->zero_degree_rows = zero_rows;
    return m.map_values([&](std::size_t r, std::size_t c, double v) {
        return inv_sqrt_degree[r] * v * inv_sqrt_degree[c];
    });
}

/// a^k by repeated squaring; k = 0 gives the identity.
inline SparseMatrix matrix_power(const SparseMatrix& a, std::size_t k) {
    if (!a.is_square()) throw std::invalid_argument("matrix_power: matrix is not square");
    SparseMatrix result = SparseMatrix::identity(a.rows());
    if (k == 0) return result;
    SparseMatrix base = a;
    bool first = true;
    while (k > 0) {
        if (k & 1U) {
            result = first ? base : sp_sp_mm(result, base);
            first = false;
        }
        k >>= 1U;
        if (k > 0) base = sp_sp_mm(base, base);
    }
    return result;
}

}  // namespace wgcn
