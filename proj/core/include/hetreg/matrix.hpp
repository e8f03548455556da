#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "hetreg/errors.hpp"

namespace hetreg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Plain value type; the SPD wrapper in
/// linalg.hpp carries the stronger covariance invariants.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix from_row(std::span<const double> row);
    static Matrix from_col(std::span<const double> col);

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return rows_ == cols_; }

    std::vector<double> &data() noexcept { return data_; }
    const std::vector<double> &data() const noexcept { return data_; }

    std::span<const double> row_span(std::size_t r) const {
        return std::span<const double>(data_.data() + r * cols_, cols_);
    }
    Vector row_vec(std::size_t r) const;
    Vector col_vec(std::size_t c) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix &a, const Matrix &b);
Matrix operator-(const Matrix &a, const Matrix &b);
Matrix operator*(const Matrix &a, const Matrix &b);
Matrix operator*(double s, const Matrix &a);
Vector operator*(const Matrix &a, const Vector &x);

Matrix transposed(const Matrix &a);
Matrix symmetrized(const Matrix &a); // (A + A^T)/2, exact on both triangles

double trace(const Matrix &a);
double frobenius_norm(const Matrix &a);
double frobenius_distance(const Matrix &a, const Matrix &b);
/// ||a - b||_F / (1 + ||b||_F)
double relative_frobenius_error(const Matrix &a, const Matrix &b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);
bool all_finite(const Matrix &a);

inline void require(bool ok, const char *what) {
    if (!ok) throw DimensionMismatch(what);
}

} // namespace hetreg
