#include "hetreg/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace hetreg {

namespace {

// A = M^T M + 1e-3 I with M standard normal: strictly PD, well conditioned.
Matrix random_spd(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(n, n);
    for (double &v : m.data()) v = normal(rng);
    Matrix a = transposed(m) * m;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1e-3;
    return symmetrized(a);
}

} // namespace

BivariateProblem gen_bivariate_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean_range(-3.0, 3.0);

    Matrix cov;
    for (;;) {
        cov = random_spd(2, rng);
        const double corr = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
        if (std::abs(corr) > 0.5) break;
    }

    BivariateProblem out;
    out.target = Gaussian({mean_range(rng), mean_range(rng)}, SPDMatrix(cov));
    out.init = Gaussian({mean_range(rng), mean_range(rng)}, SPDMatrix::identity(2));
    return out;
}

RegressionDataset sample_bivariate_dataset(const BivariateProblem &problem, std::size_t n,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RegressionDataset ds;
    ds.inputs = Matrix(n, 1, 0.0);
    ds.targets = sample_gaussian(problem.target, n, rng);
    ds.ground_truth = std::vector<Gaussian>(n, problem.target);
    return ds;
}

double sinusoid_mean(int variant, double x) {
    const double carrier = std::sin(2.0 * std::numbers::pi * x);
    switch (variant) {
    case 1: return std::abs(x) * carrier;
    case 2: return (5.0 - std::abs(x)) * carrier;
    case 3: return 5.0 * carrier;
    default: throw UnknownVariant("sinusoid variant must be 1, 2 or 3");
    }
}

RegressionDataset gen_sinusoid(int variant, std::size_t n, std::uint64_t seed) {
    if (variant < 1 || variant > 3) throw UnknownVariant("sinusoid variant must be 1, 2 or 3");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x_range(-5.0, 5.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    RegressionDataset ds;
    ds.inputs = Matrix(n, 1);
    ds.targets = Matrix(n, 1);
    ds.ground_truth = std::vector<Gaussian>();
    ds.ground_truth->reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double x = x_range(rng);
        const double mean = sinusoid_mean(variant, x);
        const double sigma = sinusoid_sigma(x);
        ds.inputs(r, 0) = x;
        ds.targets(r, 0) = mean + sigma * normal(rng);
        const double var = sigma * sigma;
        ds.ground_truth->emplace_back(Vector{mean},
                                      SPDMatrix::diagonal(std::span<const double>(&var, 1)));
    }
    return ds;
}

std::size_t multivariate_sample_count(std::size_t dim) {
    const double d = static_cast<double>(dim);
    return static_cast<std::size_t>(std::llround(4000.0 + (20000.0 - 4000.0) * (d - 4.0) / 28.0));
}

RegressionDataset gen_multivariate(std::size_t dim, std::size_t n, std::uint64_t seed) {
    if (dim < 2) throw DimensionMismatch("multivariate scenario needs dim >= 2");
    if (n == 0) n = multivariate_sample_count(dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // joint covariance over (X, Y), partitioned into blocks
    const Matrix joint = random_spd(2 * dim, rng);
    Matrix jxx(dim, dim), jxy(dim, dim), jyy(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            jxx(i, j) = joint(i, j);
            jxy(i, j) = joint(i, dim + j);
            jyy(i, j) = joint(dim + i, dim + j);
        }

    // conditional: mean A x, covariance Jyy - A Jxy with A = Jyx Jxx^{-1}
    const SPDMatrix jxx_spd{Matrix(jxx)};
    const Matrix jxx_inv = spd_inverse(jxx_spd).matrix();
    const Matrix a = transposed(jxy) * jxx_inv;
    const SPDMatrix cond_cov = project_to_spd(jyy - a * jxy, 0.0);
    const Matrix cond_chol = cholesky(SPDMatrix(symmetrized(
        [&] {
            Matrix m = cond_cov.matrix();
            for (std::size_t i = 0; i < dim; ++i) m(i, i) += 1e-9;
            return m;
        }())));

    // heteroscedastic component: diag(softplus(W x)), W fixed per dataset
    Matrix noise_w(dim, dim);
    const double w_scale = 0.75 / std::sqrt(static_cast<double>(dim));
    for (double &v : noise_w.data()) v = w_scale * normal(rng);

    const Matrix x_chol = cholesky(jxx_spd);

    RegressionDataset ds;
    ds.inputs = Matrix(n, dim);
    ds.targets = Matrix(n, dim);
    ds.ground_truth = std::vector<Gaussian>();
    ds.ground_truth->reserve(n);

    Vector xi(dim), x(dim), noise_var(dim);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < dim; ++i) xi[i] = normal(rng);
        for (std::size_t i = 0; i < dim; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j <= i; ++j) v += x_chol(i, j) * xi[j];
            x[i] = v;
            ds.inputs(r, i) = v;
        }
        const Vector mu = a * x;
        const Vector wx = noise_w * x;
        for (std::size_t i = 0; i < dim; ++i)
            noise_var[i] = std::log1p(std::exp(-std::abs(wx[i]))) + std::max(wx[i], 0.0);

        for (std::size_t i = 0; i < dim; ++i) xi[i] = normal(rng);
        for (std::size_t i = 0; i < dim; ++i) {
            double v = mu[i];
            for (std::size_t j = 0; j <= i; ++j) v += cond_chol(i, j) * xi[j];
            v += std::sqrt(noise_var[i]) * normal(rng);
            ds.targets(r, i) = v;
        }

        Matrix total = cond_cov.matrix();
        for (std::size_t i = 0; i < dim; ++i) total(i, i) += noise_var[i];
        ds.ground_truth->emplace_back(mu, SPDMatrix(std::move(total)));
    }
    return ds;
}

StandardizeResult standardize(const RegressionDataset &ds) {
    ds.validate();
    if (ds.size() < 2) throw TooFewSamples("standardization needs at least two rows");

    auto column_stats = [](const Matrix &m, Vector &mean, Vector &std_dev) {
        const std::size_t rows = m.rows(), cols = m.cols();
        mean.assign(cols, 0.0);
        std_dev.assign(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) mean[c] += m(r, c);
        for (double &v : mean) v /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = m(r, c) - mean[c];
                std_dev[c] += d * d;
            }
        for (std::size_t c = 0; c < cols; ++c) {
            double &v = std_dev[c];
            v = std::sqrt(v / static_cast<double>(rows));
            if (v <= 1e-12 * (1.0 + std::abs(mean[c]))) {
                // constant column: leave the values untouched
                v = 1.0;
                mean[c] = 0.0;
            }
        }
    };

    StandardizeResult out;
    out.ds = ds;
    column_stats(ds.inputs, out.input_mean, out.input_std);
    column_stats(ds.targets, out.target_mean, out.target_std);

    auto apply = [](Matrix &m, const Vector &mean, const Vector &std_dev) {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                m(r, c) = (m(r, c) - mean[c]) / std_dev[c];
    };
    apply(out.ds.inputs, out.input_mean, out.input_std);
    apply(out.ds.targets, out.target_mean, out.target_std);

    if (out.ds.ground_truth) {
        const std::size_t n = ds.target_dim();
        Matrix d(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) d(i, i) = 1.0 / out.target_std[i];
        for (Gaussian &g : *out.ds.ground_truth) {
            Vector mu(n);
            for (std::size_t i = 0; i < n; ++i)
                mu[i] = (g.mean[i] - out.target_mean[i]) / out.target_std[i];
            g = Gaussian(std::move(mu), project_to_spd(d * g.cov.matrix() * d, 0.0));
        }
    }
    return out;
}

RegressionDataset feature_split(const Matrix &table, double fraction, std::uint64_t seed) {
    if (table.cols() < 2) throw TooFewColumns("feature split needs at least two columns");
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split fraction must be in (0,1)");

    std::vector<std::size_t> cols(table.cols());
    std::iota(cols.begin(), cols.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(cols.begin(), cols.end(), rng);

    std::size_t n_inputs = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(table.cols())));
    n_inputs = std::clamp<std::size_t>(n_inputs, 1, table.cols() - 1);

    RegressionDataset ds;
    ds.inputs = Matrix(table.rows(), n_inputs);
    ds.targets = Matrix(table.rows(), table.cols() - n_inputs);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < n_inputs; ++c) ds.inputs(r, c) = table(r, cols[c]);
        for (std::size_t c = n_inputs; c < table.cols(); ++c)
            ds.targets(r, c - n_inputs) = table(r, cols[c]);
    }
    return ds;
}

std::pair<RegressionDataset, RegressionDataset> train_test_split(const RegressionDataset &ds,
                                                                 double test_fraction,
                                                                 std::uint64_t seed) {
    ds.validate();
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(seed ^ 0x7e57f01dULL);
    std::shuffle(rows.begin(), rows.end(), rng);

    const std::size_t n_train = ds.size() - static_cast<std::size_t>(std::llround(
                                                test_fraction * static_cast<double>(ds.size())));
    std::vector<std::size_t> train_rows(rows.begin(),
                                        rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_rows(rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                                       rows.end());
    return {ds.rows_subset(train_rows), ds.rows_subset(test_rows)};
}

} // namespace hetreg
