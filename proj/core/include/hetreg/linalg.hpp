#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "hetreg/matrix.hpp"

namespace hetreg {

/// Symmetric positive (semi-)definite matrix. Construction checks symmetry
/// to a relative tolerance of 1e-10 and rejects inputs whose smallest
/// eigenvalue falls below -1e-8 * trace/dim; negative roundoff eigenvalues
/// inside that tolerance are clamped to zero.
class SPDMatrix {
public:
    SPDMatrix() = default;
    explicit SPDMatrix(Matrix m);

    static SPDMatrix identity(std::size_t n);
    static SPDMatrix diagonal(std::span<const double> variances);

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Matrix &matrix() const noexcept { return m_; }
    double trace() const { return hetreg::trace(m_); }

private:
    struct unchecked_t {};
    SPDMatrix(Matrix m, unchecked_t) : m_(std::move(m)) {}

    Matrix m_;

    friend SPDMatrix spd_sqrt(const SPDMatrix &);
    friend SPDMatrix spd_inverse(const SPDMatrix &);
    friend SPDMatrix project_to_spd(const Matrix &, double);
};

/// Eigendecomposition of a symmetric matrix: eigenvalues ascending,
/// eigenvectors as orthonormal columns in matching order.
struct EigenPair {
    Vector eigenvalues;
    Matrix eigenvectors;

    Matrix reconstruct() const;
};

/// Calls to the eigendecomposition / matrix-root routines, per thread.
/// Training paths are contracted to leave this at zero.
namespace instrument {
std::uint64_t eig_calls() noexcept;
void reset_eig_calls() noexcept;
} // namespace instrument

/// Scale-equivariant regularization floor: 1e-6 * trace/dim.
double ridge_floor(double trace, std::size_t dim);

/// Lower-triangular L with positive diagonal such that L L^T = a.
/// Throws NotPositiveDefinite when a pivot is <= 0.
Matrix cholesky(const SPDMatrix &a);

/// Cyclic Jacobi sweep eigendecomposition; tolerance 1e-12, 100-sweep cap.
EigenPair sym_eig(const SPDMatrix &a);

/// Symmetric PSD square root S with S*S = a.
SPDMatrix spd_sqrt(const SPDMatrix &a);

/// Inverse of a strictly positive definite matrix, via Cholesky.
SPDMatrix spd_inverse(const SPDMatrix &a);

/// sqrt((u-v)^T P (u-v)) for a precision matrix P (already inverted by the
/// caller). Zero iff u == v when P is positive definite.
double mahalanobis(std::span<const double> u, std::span<const double> v,
                   const SPDMatrix &precision);

/// Population-convention weighted mean and covariance over the rows of
/// `points`. Weights must be nonnegative and sum to 1 within 1e-10.
std::pair<Vector, SPDMatrix> weighted_covariance(const Matrix &points,
                                                 std::span<const double> weights);

/// Symmetrize, then clamp eigenvalues to >= floor. Returns already-valid
/// input unchanged, which makes the projection exactly idempotent.
SPDMatrix project_to_spd(const Matrix &a, double floor);

// Triangular-solve helpers shared with the autodiff ops.
void forward_substitute(const Matrix &lower, std::span<const double> b, std::span<double> x);
void backward_substitute_t(const Matrix &lower, std::span<const double> b, std::span<double> x);

/// 2 * sum(log L_ii) for a Cholesky factor L; the stable log-determinant.
double logdet_from_cholesky(const Matrix &lower);

} // namespace hetreg
