#pragma once

#include <random>

#include "hetreg/linalg.hpp"

namespace hetreg {

/// Multivariate normal distribution: mean plus SPD covariance.
struct Gaussian {
    Vector mean;
    SPDMatrix cov;

    Gaussian() = default;
    Gaussian(Vector mu, SPDMatrix sigma);

    std::size_t dim() const noexcept { return mean.size(); }
};

/// Gaussian parameterized by a symmetric square-root factor. The factor may
/// be indefinite while training; the implied covariance S*S is PSD either way.
struct SqrtGaussian {
    Vector mean;
    Matrix sqrt_cov;

    SqrtGaussian() = default;
    SqrtGaussian(Vector mu, Matrix s);

    std::size_t dim() const noexcept { return mean.size(); }
    /// S*S as a validated covariance.
    SPDMatrix implied_cov() const;
};

/// log|Sigma| + (y-mu)^T Sigma^{-1} (y-mu), constant terms dropped.
double gaussian_nll(std::span<const double> y, const Gaussian &pred);

/// KL(p || q) between multivariate normals, closed form.
double kl_divergence(const Gaussian &p, const Gaussian &q);

/// KL with the trace and residual terms halved, so the covariance minimizer
/// matches the prior instead of twice it.
double calibrated_kl(std::span<const double> y, const SPDMatrix &prior, const Gaussian &pred);

/// Squared 2-Wasserstein distance:
/// ||mu1-mu2||^2 + Tr[S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}].
double w2_exact(const Gaussian &a, const Gaussian &b);

/// Eigendecomposition-free upper bound on w2_exact:
/// ||mu1-mu2||^2 + ||S1 - S2||_F^2 on the square-root factors.
double w2_bound(const SqrtGaussian &a, const SqrtGaussian &b);

/// Tr[(A^{1/2} B A^{1/2})^{1/2}] - Tr(A^{1/2} B^{1/2}); nonnegative for
/// positive definite inputs.
double trace_root_gap(const SPDMatrix &a, const SPDMatrix &b);

/// Affine pushforward: mean -> R mu, covariance -> R Sigma R^T.
Gaussian transform_gaussian(const Gaussian &g, const Matrix &r);

/// One draw from g appended per row; uses the Cholesky factor of the
/// covariance (pass a pre-projected covariance for singular cases).
Matrix sample_gaussian(const Gaussian &g, std::size_t count, std::mt19937_64 &rng);

} // namespace hetreg
