#include "hetreg/matrix.hpp"

#include <cmath>

namespace hetreg {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_)
        throw DimensionMismatch("matrix entry count does not match rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto &row : rows) {
        if (row.size() != c) throw DimensionMismatch("ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::from_row(std::span<const double> row) {
    Matrix m(1, row.size());
    for (std::size_t j = 0; j < row.size(); ++j) m(0, j) = row[j];
    return m;
}

Matrix Matrix::from_col(std::span<const double> col) {
    Matrix m(col.size(), 1);
    for (std::size_t i = 0; i < col.size(); ++i) m(i, 0) = col[i];
    return m;
}

Vector Matrix::row_vec(std::size_t r) const {
    return Vector(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                  data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
}

Vector Matrix::col_vec(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, c);
    return out;
}

Matrix operator+(const Matrix &a, const Matrix &b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix add shape");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix &a, const Matrix &b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix sub shape");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(const Matrix &a, const Matrix &b) {
    require(a.cols() == b.rows(), "matrix multiply shape");
    Matrix out(a.rows(), b.cols(), 0.0);
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double *brow = b.data().data() + p * m;
            double *orow = out.data().data() + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix operator*(double s, const Matrix &a) {
    Matrix out = a;
    for (double &v : out.data()) v *= s;
    return out;
}

Vector operator*(const Matrix &a, const Vector &x) {
    require(a.cols() == x.size(), "matrix-vector shape");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row_span(i), x);
    return out;
}

Matrix transposed(const Matrix &a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix symmetrized(const Matrix &a) {
    require(a.square(), "symmetrize requires square input");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        out(i, i) = a(i, i);
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

double trace(const Matrix &a) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
    return t;
}

double frobenius_norm(const Matrix &a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double frobenius_distance(const Matrix &a, const Matrix &b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "frobenius distance shape");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double relative_frobenius_error(const Matrix &a, const Matrix &b) {
    return frobenius_distance(a, b) / (1.0 + frobenius_norm(b));
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot shape");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "squared distance shape");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix &a) { return all_finite(std::span<const double>(a.data())); }

} // namespace hetreg
