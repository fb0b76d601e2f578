#include "symmlp/matrix.hpp"

#include <algorithm>

namespace symmlp {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols_)
            throw DimensionError("ragged rows: row " + std::to_string(r) + " has " +
                                 std::to_string(rows[r].size()) + " entries, expected " +
                                 std::to_string(m.cols_));
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("row index out of range");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::column_block(std::size_t begin, std::size_t end) const {
    if (begin > end || end > cols_) throw DimensionError("column block out of range");
    Matrix out(rows_, end - begin);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
    return out;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
    return out;
}

Matrix hconcat(const Matrix& left, const Matrix& right) {
    if (left.empty() && left.cols() == 0) return right;
    if (right.empty() && right.cols() == 0) return left;
    if (left.rows() != right.rows()) throw DimensionError("hconcat: row count mismatch");
    Matrix out(left.rows(), left.cols() + right.cols());
    for (std::size_t r = 0; r < left.rows(); ++r) {
        auto dst = out.row(r);
        std::copy(left.row(r).begin(), left.row(r).end(), dst.begin());
        std::copy(right.row(r).begin(), right.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols()));
    }
    return out;
}

}  // namespace symmlp
