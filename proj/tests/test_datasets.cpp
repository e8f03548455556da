#include <doctest.h>

#include <cmath>
#include <random>

#include "hetreg/datasets.hpp"

using namespace hetreg;

TEST_CASE("bivariate problem meets its construction contract") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const BivariateProblem p = gen_bivariate_problem(seed);
        const double corr =
            p.target.cov(0, 1) / std::sqrt(p.target.cov(0, 0) * p.target.cov(1, 1));
        CHECK(std::abs(corr) > 0.5);
        CHECK(frobenius_distance(p.init.cov.matrix(), Matrix::identity(2)) == 0.0);
        for (double m : p.target.mean) {
            CHECK(m >= -3.0);
            CHECK(m <= 3.0);
        }
    }
}

TEST_CASE("bivariate sampler matches the target covariance at scale") {
    const BivariateProblem p = gen_bivariate_problem(3);
    const RegressionDataset ds = sample_bivariate_dataset(p, 100000, 5);
    Vector mean(2, 0.0);
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t c = 0; c < 2; ++c) mean[c] += ds.targets(r, c) / ds.size();
    Matrix cov(2, 2, 0.0);
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b)
                cov(a, b) += (ds.targets(r, a) - mean[a]) * (ds.targets(r, b) - mean[b]) /
                             ds.size();
    CHECK(frobenius_distance(cov, p.target.cov.matrix()) <=
          0.03 * frobenius_norm(p.target.cov.matrix()));
}

TEST_CASE("sinusoid means and degenerate point") {
    CHECK(sinusoid_mean(1, 0.0) == 0.0);
    CHECK(sinusoid_sigma(0.0) == 0.0);
    CHECK(sinusoid_mean(3, 0.25) == doctest::Approx(5.0)); // sin(pi/2) = 1
    CHECK(sinusoid_mean(2, 5.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS((void)sinusoid_mean(4, 0.0), UnknownVariant);
    CHECK_THROWS_AS((void)gen_sinusoid(0, 10, 1), UnknownVariant);
}

TEST_CASE("sinusoid residual spread tracks |x| in a bin") {
    const RegressionDataset ds = gen_sinusoid(1, 200000, 11);
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const double x = ds.inputs(r, 0);
        if (std::abs(x) < 2.0 || std::abs(x) > 2.1) continue;
        const double resid = ds.targets(r, 0) - sinusoid_mean(1, x);
        sum_sq += resid * resid;
        ++count;
    }
    REQUIRE(count > 500);
    const double std_dev = std::sqrt(sum_sq / count);
    CHECK(std_dev == doctest::Approx(2.05).epsilon(0.05));
}

TEST_CASE("multivariate sample counts and ground truth") {
    CHECK(multivariate_sample_count(4) == 4000);
    CHECK(multivariate_sample_count(32) == 20000);
    CHECK(multivariate_sample_count(18) == 12000);

    const RegressionDataset ds = gen_multivariate(4, 0, 13);
    CHECK(ds.size() == 4000);
    REQUIRE(ds.ground_truth.has_value());

    // heteroscedastic by construction: covariances differ across rows
    double max_gap = 0.0;
    for (std::size_t r = 1; r < 50; ++r)
        max_gap = std::max(max_gap, frobenius_distance((*ds.ground_truth)[r].cov.matrix(),
                                                       (*ds.ground_truth)[0].cov.matrix()));
    CHECK(max_gap > 0.0);
}

TEST_CASE("multivariate conditional covariance matches conditional sampling") {
    // fix one input row, resample its conditional; the empirical covariance
    // should match the stored ground truth within sampling error
    const std::size_t dim = 3;
    const RegressionDataset ds = gen_multivariate(dim, 3000, 17);
    const Gaussian &gt = (*ds.ground_truth)[5];

    std::mt19937_64 rng(99);
    const Matrix draws = sample_gaussian(gt, 60000, rng);
    Vector mean(dim, 0.0);
    for (std::size_t r = 0; r < draws.rows(); ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += draws(r, c) / draws.rows();
    Matrix cov(dim, dim, 0.0);
    for (std::size_t r = 0; r < draws.rows(); ++r)
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b)
                cov(a, b) += (draws(r, a) - mean[a]) * (draws(r, b) - mean[b]) / draws.rows();
    CHECK(frobenius_distance(cov, gt.cov.matrix()) <= 0.05 * frobenius_norm(gt.cov.matrix()));
}

TEST_CASE("standardize zeroes means, units variances, transforms ground truth") {
    RegressionDataset ds = gen_multivariate(2, 500, 19);
    for (std::size_t r = 0; r < ds.size(); ++r) ds.inputs(r, 0) = ds.inputs(r, 0) * 3.0 + 10.0;

    const StandardizeResult s = standardize(ds);
    for (std::size_t c = 0; c < ds.input_dim(); ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < s.ds.size(); ++r) mean += s.ds.inputs(r, c) / s.ds.size();
        for (std::size_t r = 0; r < s.ds.size(); ++r) {
            const double d = s.ds.inputs(r, c) - mean;
            var += d * d / s.ds.size();
        }
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-10));
    }
    // the transformed ground truth stays consistent with the transformed targets
    const Gaussian &g0 = (*s.ds.ground_truth)[0];
    const Gaussian &orig = (*ds.ground_truth)[0];
    for (std::size_t c = 0; c < 2; ++c)
        CHECK(g0.mean[c] ==
              doctest::Approx((orig.mean[c] - s.target_mean[c]) / s.target_std[c]));

    // unstandardizing with the recorded statistics restores the input
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < ds.input_dim(); ++c)
            CHECK(s.ds.inputs(r, c) * s.input_std[c] + s.input_mean[c] ==
                  doctest::Approx(ds.inputs(r, c)).epsilon(1e-12));

    // constant column: untouched values, recorded std 1
    RegressionDataset flat;
    flat.inputs = Matrix(10, 2, 0.0);
    for (std::size_t r = 0; r < 10; ++r) {
        flat.inputs(r, 0) = static_cast<double>(r);
        flat.inputs(r, 1) = 4.2;
    }
    flat.targets = Matrix(10, 1, 1.0);
    const StandardizeResult fs = standardize(flat);
    CHECK(fs.input_std[1] == 1.0);
    for (std::size_t r = 0; r < 10; ++r)
        CHECK(fs.ds.inputs(r, 1) == 4.2); // constant column left untouched
}

TEST_CASE("feature_split column counts and determinism") {
    const Matrix table(20, 4, 1.0);
    const RegressionDataset ds4 = feature_split(table, 0.25, 7);
    CHECK(ds4.input_dim() == 1);
    CHECK(ds4.target_dim() == 3);

    const Matrix table8(20, 8, 1.0);
    const RegressionDataset ds8 = feature_split(table8, 0.25, 7);
    CHECK(ds8.input_dim() == 2);
    CHECK(ds8.target_dim() == 6);

    // same seed, same partition
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix randomized(30, 8);
    for (double &v : randomized.data()) v = normal(rng);
    const RegressionDataset a = feature_split(randomized, 0.25, 11);
    const RegressionDataset b = feature_split(randomized, 0.25, 11);
    CHECK(a.inputs.data() == b.inputs.data());
    CHECK(a.targets.data() == b.targets.data());

    const Matrix narrow(5, 1, 1.0);
    CHECK_THROWS_AS((void)feature_split(narrow, 0.25, 1), TooFewColumns);
}

TEST_CASE("train_test_split partitions without overlap") {
    const RegressionDataset ds = gen_sinusoid(1, 100, 23);
    const auto [train_ds, test_ds] = train_test_split(ds, 0.2, 9);
    CHECK(train_ds.size() == 80);
    CHECK(test_ds.size() == 20);
    CHECK(train_ds.ground_truth.has_value());
}
