#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "hetreg/gaussian.hpp"
#include "hetreg/verify.hpp"

using namespace hetreg;

namespace {

// log-density with all constants, for the Monte-Carlo KL oracle
double log_pdf(const Gaussian &g, std::span<const double> x) {
    const std::size_t k = g.dim();
    const Matrix l = cholesky(g.cov);
    Vector r(k);
    for (std::size_t i = 0; i < k; ++i) r[i] = x[i] - g.mean[i];
    Vector z(k);
    forward_substitute(l, r, z);
    const double quad = dot(z, z);
    return -0.5 * (quad + logdet_from_cholesky(l) +
                   static_cast<double>(k) * std::log(2.0 * std::numbers::pi));
}

} // namespace

TEST_CASE("gaussian_nll closed-form cases") {
    const Gaussian pred(Vector{0.0, 0.0}, SPDMatrix::identity(2));
    const Vector at_mean{0.0, 0.0};
    CHECK(gaussian_nll(at_mean, pred) == doctest::Approx(0.0));

    const Vector off_by_one{1.0, 0.0};
    CHECK(gaussian_nll(off_by_one, pred) == doctest::Approx(1.0));
}

TEST_CASE("gaussian_nll matches a cofactor-expansion oracle at dim 4") {
    std::mt19937_64 rng(17);
    const Gaussian pred = verify::random_gaussian(4, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(4);
    for (double &v : y) v = normal(rng);

    // determinant by recursive cofactor expansion
    std::function<double(const std::vector<std::vector<double>> &)> det =
        [&](const std::vector<std::vector<double>> &m) -> double {
        const std::size_t n = m.size();
        if (n == 1) return m[0][0];
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<std::vector<double>> minor(n - 1, std::vector<double>(n - 1));
            for (std::size_t r = 1; r < n; ++r) {
                std::size_t cc = 0;
                for (std::size_t c = 0; c < n; ++c) {
                    if (c == j) continue;
                    minor[r - 1][cc++] = m[r][c];
                }
            }
            sum += (j % 2 ? -1.0 : 1.0) * m[0][j] * det(minor);
        }
        return sum;
    };

    std::vector<std::vector<double>> sigma(4, std::vector<double>(4));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) sigma[i][j] = pred.cov(i, j);
    const double det_sigma = det(sigma);

    // inverse via adjugate
    Matrix inv(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            std::vector<std::vector<double>> minor(3, std::vector<double>(3));
            std::size_t rr = 0;
            for (std::size_t r = 0; r < 4; ++r) {
                if (r == i) continue;
                std::size_t cc = 0;
                for (std::size_t c = 0; c < 4; ++c) {
                    if (c == j) continue;
                    minor[rr][cc++] = sigma[r][c];
                }
                ++rr;
            }
            inv(j, i) = (((i + j) % 2) ? -1.0 : 1.0) * det(minor) / det_sigma;
        }

    double quad = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            quad += (y[i] - pred.mean[i]) * inv(i, j) * (y[j] - pred.mean[j]);
    const double oracle = std::log(det_sigma) + quad;

    CHECK(gaussian_nll(y, pred) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("kl_divergence closed-form cases") {
    const Gaussian std2(Vector{0.0, 0.0}, SPDMatrix::identity(2));
    CHECK(kl_divergence(std2, std2) == doctest::Approx(0.0));

    const Gaussian shifted(Vector{1.0, 0.0}, SPDMatrix::identity(2));
    CHECK(kl_divergence(shifted, std2) == doctest::Approx(0.5));

    const double degenerate[2] = {1.0, 0.0};
    CHECK_THROWS_AS(
        (void)kl_divergence(Gaussian(Vector{0.0, 0.0}, SPDMatrix::diagonal(degenerate)), std2),
        DegenerateDistribution);
}

TEST_CASE("kl_divergence agrees with a Monte-Carlo estimate at dim 3") {
    std::mt19937_64 rng(29);
    const Gaussian p = verify::random_gaussian(3, rng);
    const Gaussian q = verify::random_gaussian(3, rng);
    const double closed = kl_divergence(p, q);

    const std::size_t n = 1000000;
    const Matrix samples = sample_gaussian(p, n, rng);
    double mc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = samples.row_span(r);
        mc += log_pdf(p, x) - log_pdf(q, x);
    }
    mc /= static_cast<double>(n);
    CHECK(closed == doctest::Approx(mc).epsilon(0.01));
}

TEST_CASE("calibrated_kl identity-case arithmetic") {
    for (std::size_t k : {std::size_t(1), std::size_t(2), std::size_t(5)}) {
        const Gaussian pred(Vector(k, 0.0), SPDMatrix::identity(k));
        const Vector y(k, 0.0);
        // trace k, residual 0, logdets 0: 0.5*(k/2 - k) = -k/4
        CHECK(calibrated_kl(y, SPDMatrix::identity(k), pred) ==
              doctest::Approx(-static_cast<double>(k) / 4.0));
    }
}

TEST_CASE("calibrated_kl stationary covariance is the prior/residual average") {
    std::mt19937_64 rng(31);
    const std::size_t dim = 2, n = 6;
    const Gaussian truth = verify::random_gaussian(dim, rng);
    const Matrix ys = sample_gaussian(truth, n, rng);

    Vector mean(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += ys(r, c) / n;
    Matrix resid(dim, dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b)
                resid(a, b) += (ys(r, a) - mean[a]) * (ys(r, b) - mean[b]) / n;

    const Matrix stationary = 0.5 * (truth.cov.matrix() + resid);
    const Gaussian at_stationary(mean, SPDMatrix(symmetrized(stationary)));

    auto objective = [&](const Gaussian &pred) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            total += calibrated_kl(ys.row_span(r), truth.cov, pred);
        return total / n;
    };
    const double at_min = objective(at_stationary);

    // nudging the covariance in random symmetric directions never improves it
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix dir(dim, dim);
        for (double &v : dir.data()) v = 0.02 * normal(rng);
        const Matrix shifted = stationary + symmetrized(dir);
        const Gaussian moved(mean, project_to_spd(shifted, 1e-9));
        CHECK(objective(moved) >= at_min - 1e-12);
    }
}

TEST_CASE("w2_exact closed-form cases") {
    const Gaussian a(Vector{0.0, 0.0}, SPDMatrix::identity(2));
    CHECK(w2_exact(a, a) == doctest::Approx(0.0));

    const Gaussian b(Vector{3.0, 4.0}, SPDMatrix::identity(2));
    CHECK(w2_exact(a, b) == doctest::Approx(25.0));

    const double v1[2] = {4.0, 1.0}, v2[2] = {1.0, 4.0};
    const Gaussian c(Vector{0.0, 0.0}, SPDMatrix::diagonal(v1));
    const Gaussian d(Vector{0.0, 0.0}, SPDMatrix::diagonal(v2));
    CHECK(w2_exact(c, d) == doctest::Approx(2.0)); // (2-1)^2 + (1-2)^2
}

TEST_CASE("w2_bound closed-form cases and instrumentation") {
    const SqrtGaussian a(Vector{0.0, 0.0}, Matrix::from_rows({{2.0, 0.0}, {0.0, 1.0}}));
    const SqrtGaussian b(Vector{0.0, 0.0}, Matrix::from_rows({{1.0, 0.0}, {0.0, 2.0}}));
    CHECK(w2_bound(a, a) == 0.0);

    instrument::reset_eig_calls();
    const double bound = w2_bound(a, b);
    CHECK(instrument::eig_calls() == 0); // no eigendecomposition on this path
    CHECK(bound == doctest::Approx(2.0));

    const Gaussian ga(Vector{0.0, 0.0}, SPDMatrix(a.sqrt_cov * a.sqrt_cov));
    const Gaussian gb(Vector{0.0, 0.0}, SPDMatrix(b.sqrt_cov * b.sqrt_cov));
    CHECK(w2_exact(ga, gb) == doctest::Approx(bound)); // commuting factors: tight

    const SqrtGaussian wrong_dim(Vector{0.0}, Matrix::from_rows({{1.0}}));
    CHECK_THROWS_AS((void)w2_bound(a, wrong_dim), DimensionMismatch);
}

TEST_CASE("trace_root_gap zero cases and 2x2 nonnegativity sweep") {
    CHECK(trace_root_gap(SPDMatrix::identity(3), SPDMatrix::identity(3)) ==
          doctest::Approx(0.0));

    const double d1[2] = {2.0, 3.0}, d2[2] = {5.0, 0.5};
    CHECK(trace_root_gap(SPDMatrix::diagonal(d1), SPDMatrix::diagonal(d2)) ==
          doctest::Approx(0.0).epsilon(1e-9));

    // exhaustive 2x2 sweep over rotation angles and spectra
    double min_gap = 1e300;
    for (int ia = 0; ia < 8; ++ia)
        for (int ib = 0; ib < 8; ++ib)
            for (int la = 1; la <= 3; ++la)
                for (int lb = 1; lb <= 3; ++lb) {
                    auto rotated = [](double angle, double l0, double l1) {
                        const double c = std::cos(angle), s = std::sin(angle);
                        const Matrix q = Matrix::from_rows({{c, -s}, {s, c}});
                        const Vector d{l0, l1};
                        return SPDMatrix(
                            symmetrized(q * Matrix::diagonal(d) * transposed(q)));
                    };
                    const SPDMatrix a = rotated(ia * 0.3927, la * 0.7, la * 2.1);
                    const SPDMatrix b = rotated(ib * 0.3927, lb * 1.3, lb * 0.4);
                    min_gap = std::min(min_gap, trace_root_gap(a, b));
                }
    CHECK(min_gap >= -1e-9);
}

TEST_CASE("transform_gaussian identity, scaling and a sampling oracle") {
    std::mt19937_64 rng(37);
    const Gaussian g = verify::random_gaussian(2, rng);

    const Gaussian same = transform_gaussian(g, Matrix::identity(2));
    CHECK(frobenius_distance(same.cov.matrix(), g.cov.matrix()) <= 1e-12);

    const Gaussian doubled = transform_gaussian(g, 2.0 * Matrix::identity(2));
    CHECK(frobenius_distance(doubled.cov.matrix(), 4.0 * g.cov.matrix()) <= 1e-10);

    // random rotation: sample covariance of R*y matches R Sigma R^T within 3%
    const double angle = 0.83;
    const Matrix r = Matrix::from_rows(
        {{std::cos(angle), -std::sin(angle)}, {std::sin(angle), std::cos(angle)}});
    const Gaussian pushed = transform_gaussian(g, r);

    const std::size_t n = 100000;
    const Matrix ys = sample_gaussian(g, n, rng);
    Vector mean(2, 0.0);
    Matrix cov(2, 2, 0.0);
    std::vector<Vector> mapped(n, Vector(2));
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t i = 0; i < 2; ++i)
            mapped[row][i] = r(i, 0) * ys(row, 0) + r(i, 1) * ys(row, 1);
        for (std::size_t i = 0; i < 2; ++i) mean[i] += mapped[row][i] / n;
    }
    for (std::size_t row = 0; row < n; ++row)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                cov(i, j) += (mapped[row][i] - mean[i]) * (mapped[row][j] - mean[j]) / n;
    CHECK(frobenius_distance(cov, pushed.cov.matrix()) <=
          0.03 * frobenius_norm(pushed.cov.matrix()));
}

TEST_CASE("sqrt gaussian accepts indefinite symmetric factors") {
    const Matrix indefinite = Matrix::from_rows({{1.0, 2.0}, {2.0, -1.0}});
    const SqrtGaussian g(Vector{0.0, 0.0}, indefinite);
    const SPDMatrix implied = g.implied_cov(); // square of a symmetric matrix
    CHECK(sym_eig(implied).eigenvalues.front() >= -1e-10);

    const Matrix asymmetric = Matrix::from_rows({{1.0, 2.0}, {0.0, 1.0}});
    CHECK_THROWS((void)SqrtGaussian(Vector{0.0, 0.0}, asymmetric));
}
