#pragma once

#include "hetreg/dataset.hpp"

namespace hetreg {

/// Bivariate distribution-fitting study: random target with strong
/// correlation, identity-covariance starting point.
struct BivariateProblem {
    Gaussian target; // |correlation| > 0.5
    Gaussian init;   // random mean, identity covariance
};

BivariateProblem gen_bivariate_problem(std::uint64_t seed);

/// Samples drawn from the bivariate target, with a constant dummy input
/// column so the generic training loop applies; ground truth per row is the
/// target itself.
RegressionDataset sample_bivariate_dataset(const BivariateProblem &problem, std::size_t n,
                                           std::uint64_t seed);

/// x ~ U[-5,5]; mean per variant (1) |x| sin 2pi x, (2) (5-|x|) sin 2pi x,
/// (3) 5 sin 2pi x; noise sigma(x) = |x|.
RegressionDataset gen_sinusoid(int variant, std::size_t n, std::uint64_t seed);
double sinusoid_mean(int variant, double x);
inline double sinusoid_sigma(double x) { return std::abs(x); }

/// Joint-Gaussian (X, Y) with equal dims plus an input-dependent diagonal
/// noise component; ground truth per row is the conditional distribution.
RegressionDataset gen_multivariate(std::size_t dim, std::size_t n, std::uint64_t seed);
/// Sample count interpolated linearly from 4000 at dim 4 to 20000 at dim 32.
std::size_t multivariate_sample_count(std::size_t dim);

struct StandardizeResult {
    RegressionDataset ds;
    Vector input_mean, input_std;
    Vector target_mean, target_std;
};

/// Column-wise zero mean, unit variance; constant columns keep their values
/// (std recorded as 1). Ground-truth distributions are transformed to match.
StandardizeResult standardize(const RegressionDataset &ds);

/// Random column partition: round(fraction * cols) observation columns
/// (at least one), the rest targets.
RegressionDataset feature_split(const Matrix &table, double fraction, std::uint64_t seed);

/// Deterministic shuffled split; first part has round((1-test_fraction)*N) rows.
std::pair<RegressionDataset, RegressionDataset> train_test_split(const RegressionDataset &ds,
                                                                 double test_fraction,
                                                                 std::uint64_t seed);

} // namespace hetreg
