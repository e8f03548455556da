#include "hetreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hetreg {

namespace instrument {
namespace {
thread_local std::uint64_t g_eig_calls = 0;
}
std::uint64_t eig_calls() noexcept { return g_eig_calls; }
void reset_eig_calls() noexcept { g_eig_calls = 0; }
} // namespace instrument

double ridge_floor(double trace, std::size_t dim) {
    return dim == 0 ? 0.0 : 1e-6 * trace / static_cast<double>(dim);
}

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kPsdTol = 1e-8;      // scaled by trace/dim
constexpr double kJacobiTol = 1e-12;  // off-norm relative to total norm
constexpr std::size_t kJacobiMaxSweeps = 100;

bool is_symmetric(const Matrix &a) {
    if (!a.square()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol * (1.0 + std::abs(a(i, j))))
                return false;
    return true;
}

// Returns false on a non-positive pivot instead of throwing.
bool try_cholesky(const Matrix &a, Matrix &lower) {
    const std::size_t n = a.rows();
    lower = Matrix(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

// Cyclic Jacobi rotations on a symmetric matrix. Eigenvalues ascending,
// eigenvector columns orthonormal, sign fixed so the largest-magnitude
// component of each vector is positive.
EigenPair jacobi_eig(const Matrix &input) {
    ++instrument::g_eig_calls;
    const std::size_t n = input.rows();
    Matrix a = symmetrized(input);
    Matrix q = Matrix::identity(n);

    const double total = frobenius_norm(a);
    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    std::size_t sweep = 0;
    while (off_norm() > kJacobiTol * (1.0 + total)) {
        if (sweep++ >= kJacobiMaxSweeps)
            throw ConvergenceFailure("jacobi eigendecomposition did not converge");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apq = a(p, r);
                if (apq == 0.0) continue;
                const double theta = 0.5 * std::atan2(2.0 * apq, a(r, r) - a(p, p));
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, r);
                    a(k, p) = c * akp - s * akq;
                    a(k, r) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(r, k);
                    a(p, k) = c * apk - s * aqk;
                    a(r, k) = s * apk + c * aqk;
                }
                a(p, r) = 0.0;
                a(r, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double qkp = q(k, p);
                    const double qkq = q(k, r);
                    q(k, p) = c * qkp - s * qkq;
                    q(k, r) = s * qkp + c * qkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    EigenPair out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.eigenvalues[j] = a(src, src);
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(q(i, src)) > best) {
                best = std::abs(q(i, src));
                arg = i;
            }
        }
        const double sign = q(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = sign * q(i, src);
    }
    return out;
}

Matrix reconstruct_clamped(const EigenPair &e, double floor) {
    const std::size_t n = e.eigenvalues.size();
    Matrix scaled = e.eigenvectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double lam = std::max(e.eigenvalues[j], floor);
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= lam;
    }
    return symmetrized(scaled * transposed(e.eigenvectors));
}

} // namespace

Matrix EigenPair::reconstruct() const {
    const std::size_t n = eigenvalues.size();
    Matrix scaled = eigenvectors;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= eigenvalues[j];
    return scaled * transposed(eigenvectors);
}

SPDMatrix::SPDMatrix(Matrix m) : m_(std::move(m)) {
    if (!m_.square()) throw DimensionMismatch("SPD matrix must be square");
    if (!all_finite(m_)) throw Error("SPD matrix entries must be finite");
    if (!is_symmetric(m_)) throw Error("SPD matrix must be symmetric");

    // Fast path: a successful Cholesky proves strict positive definiteness
    // without touching the eigendecomposition counter.
    Matrix probe;
    if (try_cholesky(m_, probe)) return;

    const EigenPair e = jacobi_eig(m_);
    const double scale = hetreg::trace(m_) / static_cast<double>(dim());
    const double lo = -kPsdTol * std::max(scale, 0.0);
    if (e.eigenvalues.front() < lo)
        throw NotPositiveDefinite("matrix is not positive semi-definite");
    if (e.eigenvalues.front() < 0.0) m_ = reconstruct_clamped(e, 0.0);
}

SPDMatrix SPDMatrix::identity(std::size_t n) { return SPDMatrix(Matrix::identity(n), unchecked_t{}); }

SPDMatrix SPDMatrix::diagonal(std::span<const double> variances) {
    for (double v : variances)
        if (!(v >= 0.0)) throw NotPositiveDefinite("diagonal covariance needs nonnegative entries");
    return SPDMatrix(Matrix::diagonal(variances), unchecked_t{});
}

Matrix cholesky(const SPDMatrix &a) {
    Matrix lower;
    if (!try_cholesky(a.matrix(), lower))
        throw NotPositiveDefinite("cholesky pivot <= 0: degenerate covariance");
    return lower;
}

EigenPair sym_eig(const SPDMatrix &a) { return jacobi_eig(a.matrix()); }

SPDMatrix spd_sqrt(const SPDMatrix &a) {
    const EigenPair e = jacobi_eig(a.matrix());
    const std::size_t n = a.dim();
    Matrix scaled = e.eigenvectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double lam = std::sqrt(std::max(e.eigenvalues[j], 0.0));
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= lam;
    }
    return SPDMatrix(symmetrized(scaled * transposed(e.eigenvectors)), SPDMatrix::unchecked_t{});
}

SPDMatrix spd_inverse(const SPDMatrix &a) {
    const Matrix l = cholesky(a);
    const std::size_t n = a.dim();
    Matrix inv(n, n);
    Vector e(n, 0.0), y(n), x(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        forward_substitute(l, e, y);
        backward_substitute_t(l, y, x);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
        e[j] = 0.0;
    }
    return SPDMatrix(symmetrized(inv), SPDMatrix::unchecked_t{});
}

double mahalanobis(std::span<const double> u, std::span<const double> v,
                   const SPDMatrix &precision) {
    if (u.size() != v.size() || u.size() != precision.dim())
        throw DimensionMismatch("mahalanobis dimensions do not match");
    const std::size_t n = u.size();
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = u[i] - v[i];
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += precision(i, j) * (u[j] - v[j]);
        q += di * row;
    }
    return std::sqrt(std::max(q, 0.0));
}

std::pair<Vector, SPDMatrix> weighted_covariance(const Matrix &points,
                                                 std::span<const double> weights) {
    const std::size_t n_rows = points.rows();
    const std::size_t dim = points.cols();
    if (n_rows == 0) throw DimensionMismatch("weighted covariance needs at least one point");
    if (weights.size() != n_rows) throw DimensionMismatch("one weight per point required");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) throw Error("weights must sum to 1 within 1e-10");

    Vector mean(dim, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += weights[r] * points(r, c);

    Matrix cov(dim, dim, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double w = weights[r];
        for (std::size_t a = 0; a < dim; ++a) {
            const double da = points(r, a) - mean[a];
            for (std::size_t b = 0; b < dim; ++b)
                cov(a, b) += w * da * (points(r, b) - mean[b]);
        }
    }
    return {std::move(mean), SPDMatrix(symmetrized(cov))};
}

SPDMatrix project_to_spd(const Matrix &a, double floor) {
    if (!a.square()) throw DimensionMismatch("projection requires a square matrix");
    const Matrix sym = symmetrized(a);
    const EigenPair e = jacobi_eig(sym);
    // Slack absorbs reconstruction roundoff so projecting twice is a no-op.
    const double slack = 1e-10 * (1.0 + frobenius_norm(sym));
    if (e.eigenvalues.front() >= floor - slack)
        return SPDMatrix(sym, SPDMatrix::unchecked_t{});
    return SPDMatrix(reconstruct_clamped(e, floor), SPDMatrix::unchecked_t{});
}

void forward_substitute(const Matrix &lower, std::span<const double> b, std::span<double> x) {
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * x[j];
        x[i] = s / lower(i, i);
    }
}

void backward_substitute_t(const Matrix &lower, std::span<const double> b, std::span<double> x) {
    const std::size_t n = lower.rows();
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= lower(j, ii) * x[j];
        x[ii] = s / lower(ii, ii);
    }
}

double logdet_from_cholesky(const Matrix &lower) {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
    return 2.0 * s;
}

} // namespace hetreg
