#include "hetreg/gaussian.hpp"

#include <cmath>

namespace hetreg {

namespace {

// Tr((L L^T)^{-1} P) via one forward and one backward solve per column.
double trace_of_solve(const Matrix &lower, const Matrix &p) {
    const std::size_t n = lower.rows();
    Vector col(n), y(n), x(n);
    double t = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = p(i, j);
        forward_substitute(lower, col, y);
        backward_substitute_t(lower, y, x);
        t += x[j];
    }
    return t;
}

double quad_form_of_solve(const Matrix &lower, std::span<const double> r) {
    const std::size_t n = lower.rows();
    Vector z(n);
    forward_substitute(lower, r, z);
    return dot(z, z);
}

} // namespace

Gaussian::Gaussian(Vector mu, SPDMatrix sigma) : mean(std::move(mu)), cov(std::move(sigma)) {
    if (mean.size() != cov.dim())
        throw DimensionMismatch("gaussian mean and covariance dimensions differ");
}

SqrtGaussian::SqrtGaussian(Vector mu, Matrix s) : mean(std::move(mu)), sqrt_cov(std::move(s)) {
    if (!sqrt_cov.square() || mean.size() != sqrt_cov.rows())
        throw DimensionMismatch("sqrt factor must be square and match the mean");
    for (std::size_t i = 0; i < sqrt_cov.rows(); ++i)
        for (std::size_t j = i + 1; j < sqrt_cov.cols(); ++j)
            if (std::abs(sqrt_cov(i, j) - sqrt_cov(j, i)) >
                1e-10 * (1.0 + std::abs(sqrt_cov(i, j))))
                throw Error("sqrt factor must be symmetric");
}

SPDMatrix SqrtGaussian::implied_cov() const { return SPDMatrix(sqrt_cov * sqrt_cov); }

double gaussian_nll(std::span<const double> y, const Gaussian &pred) {
    if (y.size() != pred.dim()) throw DimensionMismatch("observation dimension mismatch");
    const Matrix l = cholesky(pred.cov);
    Vector r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - pred.mean[i];
    return logdet_from_cholesky(l) + quad_form_of_solve(l, r);
}

double kl_divergence(const Gaussian &p, const Gaussian &q) {
    if (p.dim() != q.dim()) throw DimensionMismatch("KL dimension mismatch");
    const std::size_t k = p.dim();
    const Matrix lq = cholesky(q.cov);

    Matrix lp;
    try {
        lp = cholesky(p.cov);
    } catch (const NotPositiveDefinite &) {
        throw DegenerateDistribution("det of the p-side covariance is not positive");
    }

    Vector dmu(k);
    for (std::size_t i = 0; i < k; ++i) dmu[i] = q.mean[i] - p.mean[i];

    const double trace_term = trace_of_solve(lq, p.cov.matrix());
    const double mean_term = quad_form_of_solve(lq, dmu);
    const double logdet_ratio = logdet_from_cholesky(lq) - logdet_from_cholesky(lp);
    return 0.5 * (trace_term + mean_term - static_cast<double>(k) + logdet_ratio);
}

double calibrated_kl(std::span<const double> y, const SPDMatrix &prior, const Gaussian &pred) {
    if (y.size() != pred.dim() || prior.dim() != pred.dim())
        throw DimensionMismatch("calibrated KL dimension mismatch");
    const std::size_t k = pred.dim();
    const Matrix l = cholesky(pred.cov);

    Matrix lprior;
    try {
        lprior = cholesky(prior);
    } catch (const NotPositiveDefinite &) {
        throw DegenerateDistribution("det of the prior covariance is not positive");
    }

    Vector r(k);
    for (std::size_t i = 0; i < k; ++i) r[i] = pred.mean[i] - y[i];

    const double trace_term = trace_of_solve(l, prior.matrix());
    const double resid_term = quad_form_of_solve(l, r);
    const double logdet_ratio = logdet_from_cholesky(l) - logdet_from_cholesky(lprior);
    return 0.5 * (0.5 * (trace_term + resid_term) - static_cast<double>(k) + logdet_ratio);
}

double w2_exact(const Gaussian &a, const Gaussian &b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("w2 dimension mismatch");
    const SPDMatrix root_b = spd_sqrt(b.cov);
    const Matrix product = root_b.matrix() * a.cov.matrix() * root_b.matrix();
    const SPDMatrix cross = spd_sqrt(SPDMatrix(symmetrized(product)));

    double cov_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    if (cov_term < 0.0) cov_term = 0.0; // roundoff guard
    return squared_distance(a.mean, b.mean) + cov_term;
}

double w2_bound(const SqrtGaussian &a, const SqrtGaussian &b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("w2 bound dimension mismatch");
    double frob = 0.0;
    const std::size_t n = a.dim();
    for (std::size_t i = 0; i < n * n; ++i) {
        const double d = a.sqrt_cov.data()[i] - b.sqrt_cov.data()[i];
        frob += d * d;
    }
    return squared_distance(a.mean, b.mean) + frob;
}

double trace_root_gap(const SPDMatrix &a, const SPDMatrix &b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("trace gap dimension mismatch");
    const SPDMatrix root_a = spd_sqrt(a);
    const SPDMatrix root_b = spd_sqrt(b);
    const Matrix product = root_a.matrix() * b.matrix() * root_a.matrix();
    const SPDMatrix cross = spd_sqrt(SPDMatrix(symmetrized(product)));
    return cross.trace() - trace(root_a.matrix() * root_b.matrix());
}

Gaussian transform_gaussian(const Gaussian &g, const Matrix &r) {
    if (!r.square() || r.rows() != g.dim())
        throw DimensionMismatch("transform must be square and match the distribution");
    Vector mean = r * g.mean;
    Matrix cov = r * g.cov.matrix() * transposed(r);
    return Gaussian(std::move(mean), project_to_spd(cov, 0.0));
}

Matrix sample_gaussian(const Gaussian &g, std::size_t count, std::mt19937_64 &rng) {
    const std::size_t n = g.dim();
    const Matrix l = cholesky(g.cov);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(count, n);
    Vector xi(n);
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t i = 0; i < n; ++i) xi[i] = normal(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double v = g.mean[i];
            for (std::size_t j = 0; j <= i; ++j) v += l(i, j) * xi[j];
            out(r, i) = v;
        }
    }
    return out;
}

} // namespace hetreg
