#include "hetreg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hetreg/csv.hpp"
#include "hetreg/datasets.hpp"
#include "hetreg/harness.hpp"

namespace hetreg::verify {

Matrix random_spd_matrix(std::size_t dim, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(dim, dim);
    for (double &v : m.data()) v = normal(rng);
    Matrix a = transposed(m) * m;
    for (std::size_t i = 0; i < dim; ++i) a(i, i) += 1e-3;
    return symmetrized(a);
}

Gaussian random_gaussian(std::size_t dim, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector mu(dim);
    for (double &v : mu) v = normal(rng);
    return Gaussian(std::move(mu), SPDMatrix(random_spd_matrix(dim, rng)));
}

namespace {

PropertyResult make_result(const char *module, const char *name, std::uint64_t samples,
                           double worst_margin, std::string detail = "") {
    PropertyResult r;
    r.module = module;
    r.name = name;
    r.samples = samples;
    r.worst_margin = worst_margin;
    r.pass = worst_margin <= 0.0;
    r.detail = std::move(detail);
    return r;
}

RegressionDataset random_dataset(std::size_t rows, std::size_t m, std::size_t n,
                                 std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RegressionDataset ds;
    ds.inputs = Matrix(rows, m);
    ds.targets = Matrix(rows, n);
    for (double &v : ds.inputs.data()) v = normal(rng);
    for (double &v : ds.targets.data()) v = normal(rng);
    return ds;
}

// ---------------------------------------------------------------- linalg --

PropertyResult prop_spd_sqrt_roundtrip() {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim_pick(2, 16);
    double worst = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const SPDMatrix a{random_spd_matrix(dim_pick(rng), rng)};
        const SPDMatrix s = spd_sqrt(a);
        const double err =
            frobenius_distance(s.matrix() * s.matrix(), a.matrix()) / frobenius_norm(a.matrix());
        worst = std::max(worst, err);
    }
    return make_result("linalg", "spd-sqrt-roundtrip", 1000, worst - 1e-8,
                       "max rel Frobenius error " + std::to_string(worst));
}

PropertyResult prop_cholesky_roundtrip() {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<std::size_t> dim_pick(2, 16);
    double worst = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const SPDMatrix a{random_spd_matrix(dim_pick(rng), rng)};
        const Matrix l = cholesky(a);
        const double err =
            frobenius_distance(l * transposed(l), a.matrix()) / frobenius_norm(a.matrix());
        worst = std::max(worst, err);
    }
    return make_result("linalg", "cholesky-roundtrip", 1000, worst - 1e-10);
}

PropertyResult prop_mahalanobis_metric() {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> dim_pick(2, 8);
    double worst = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t dim = dim_pick(rng);
        const SPDMatrix precision = spd_inverse(SPDMatrix(random_spd_matrix(dim, rng)));
        Vector u(dim), v(dim), w(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            u[j] = normal(rng);
            v[j] = normal(rng);
            w[j] = normal(rng);
        }
        const double duv = mahalanobis(u, v, precision);
        const double dvu = mahalanobis(v, u, precision);
        worst = std::max(worst, std::abs(duv - dvu)); // symmetry, exact
        const double tri =
            mahalanobis(u, w, precision) - (duv + mahalanobis(v, w, precision)) - 1e-12;
        worst = std::max(worst, tri);
    }
    return make_result("linalg", "mahalanobis-metric", 1000, worst);
}

PropertyResult prop_weighted_covariance_population() {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> n_pick(2, 40), d_pick(1, 5);
    double worst = -1.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = n_pick(rng), d = d_pick(rng);
        Matrix pts(n, d);
        for (double &v : pts.data()) v = normal(rng);
        Vector w(n, 1.0 / static_cast<double>(n));
        const auto [mean, cov] = weighted_covariance(pts, w);

        // textbook unbiased estimator, independent double loop
        Vector mu(d, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) mu[c] += pts(r, c) / static_cast<double>(n);
        Matrix unbiased(d, d, 0.0);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                double s = 0.0;
                for (std::size_t r = 0; r < n; ++r)
                    s += (pts(r, a) - mu[a]) * (pts(r, b) - mu[b]);
                unbiased(a, b) = s / static_cast<double>(n - 1);
            }
        const Matrix expected =
            (static_cast<double>(n - 1) / static_cast<double>(n)) * unbiased;
        const double err =
            frobenius_distance(cov.matrix(), expected) / (1.0 + frobenius_norm(expected));
        worst = std::max(worst, err);
    }
    return make_result("linalg", "weighted-covariance-population", 200, worst - 1e-12);
}

PropertyResult prop_project_idempotent() {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> dim_pick(1, 8);
    const double floors[3] = {0.0, 1e-6, 0.1};
    double worst = -1.0;
    std::uint64_t samples = 0;
    for (int i = 0; i < 300; ++i) {
        const std::size_t dim = dim_pick(rng);
        Matrix a(dim, dim);
        for (double &v : a.data()) v = 3.0 * normal(rng);
        for (double floor : floors) {
            const SPDMatrix once = project_to_spd(a, floor);
            const SPDMatrix twice = project_to_spd(once.matrix(), floor);
            worst = std::max(worst, frobenius_distance(once.matrix(), twice.matrix()));
            ++samples;
        }
        // already-valid input stays untouched
        const Matrix spd = random_spd_matrix(dim, rng);
        worst = std::max(worst, frobenius_distance(project_to_spd(spd, 0.0).matrix(), spd));
    }
    return make_result("linalg", "project-idempotent", samples, worst,
                       "exact re-projection distance " + std::to_string(worst));
}

// ------------------------------------------------------- gaussian-metrics --

PropertyResult prop_w2_bound_dominance() {
    std::mt19937_64 rng(21);
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::size_t dim : {2, 4, 8, 16}) {
        for (int i = 0; i < 1000; ++i) {
            const Gaussian a = random_gaussian(dim, rng);
            const Gaussian b = random_gaussian(dim, rng);
            const double exact = w2_exact(a, b);
            const SqrtGaussian sa(a.mean, spd_sqrt(a.cov).matrix());
            const SqrtGaussian sb(b.mean, spd_sqrt(b.cov).matrix());
            const double bound = w2_bound(sa, sb);
            worst = std::max(worst, exact - bound - 1e-8 * (1.0 + exact));
            ++samples;
        }
    }
    return make_result("gaussian-metrics", "w2-bound-dominance", samples, worst,
                       "worst (exact - bound - tol) = " + std::to_string(worst));
}

PropertyResult prop_commutative_tightness() {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> lam(0.1, 4.0);
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::size_t dim : {2, 4, 8}) {
        for (int i = 0; i < 200; ++i) {
            // common eigenbasis, different spectra
            const EigenPair basis = sym_eig(SPDMatrix(random_spd_matrix(dim, rng)));
            const Matrix &q = basis.eigenvectors;
            Vector d1(dim), d2(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                d1[j] = lam(rng);
                d2[j] = lam(rng);
            }
            const Matrix s1 = q * Matrix::diagonal(d1) * transposed(q);
            const Matrix s2 = q * Matrix::diagonal(d2) * transposed(q);
            Vector mu1(dim), mu2(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                mu1[j] = normal(rng);
                mu2[j] = normal(rng);
            }
            Vector v1(dim), v2(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                v1[j] = d1[j] * d1[j];
                v2[j] = d2[j] * d2[j];
            }
            const Gaussian a(mu1, project_to_spd(q * Matrix::diagonal(v1) * transposed(q), 0.0));
            const Gaussian b(mu2, project_to_spd(q * Matrix::diagonal(v2) * transposed(q), 0.0));
            const double exact = w2_exact(a, b);
            const double bound =
                w2_bound(SqrtGaussian(mu1, symmetrized(s1)), SqrtGaussian(mu2, symmetrized(s2)));
            worst = std::max(worst, std::abs(exact - bound) - 1e-9);
            ++samples;
        }
    }
    return make_result("gaussian-metrics", "commutative-tightness", samples, worst);
}

PropertyResult prop_trace_root_gap_nonneg() {
    std::mt19937_64 rng(23);
    double min_gap = 1e300;
    std::uint64_t samples = 0;
    for (std::size_t dim : {2, 4, 8, 16}) {
        for (int i = 0; i < 1000; ++i) {
            const SPDMatrix a{random_spd_matrix(dim, rng)};
            const SPDMatrix b{random_spd_matrix(dim, rng)};
            min_gap = std::min(min_gap, trace_root_gap(a, b));
            ++samples;
        }
    }
    return make_result("gaussian-metrics", "trace-root-gap-nonneg", samples, -min_gap - 1e-9,
                       "min trace gap " + std::to_string(min_gap));
}

PropertyResult prop_kl_basics() {
    std::mt19937_64 rng(24);
    std::uniform_int_distribution<std::size_t> dim_pick(1, 8);
    double worst = -1e300;
    for (int i = 0; i < 300; ++i) {
        const std::size_t dim = dim_pick(rng);
        const Gaussian p = random_gaussian(dim, rng);
        const Gaussian q = random_gaussian(dim, rng);
        worst = std::max(worst, std::abs(kl_divergence(p, p)) - 1e-12); // identity
        worst = std::max(worst, -kl_divergence(p, q));                  // nonnegativity
    }
    return make_result("gaussian-metrics", "kl-identity-nonneg", 600, worst);
}

PropertyResult prop_w2_symmetry() {
    std::mt19937_64 rng(25);
    std::uniform_int_distribution<std::size_t> dim_pick(1, 8);
    double worst = -1e300;
    for (int i = 0; i < 500; ++i) {
        const std::size_t dim = dim_pick(rng);
        const Gaussian a = random_gaussian(dim, rng);
        const Gaussian b = random_gaussian(dim, rng);
        worst = std::max(worst, std::abs(w2_exact(a, b) - w2_exact(b, a)) - 1e-9);
    }
    return make_result("gaussian-metrics", "w2-symmetry", 500, worst);
}

PropertyResult prop_kl_calibration() {
    // dim 3, N = 50000 samples from N(mu, Sigma), prior = Sigma, mean fixed
    // at the sample mean: the uncalibrated stationary covariance approaches
    // 2 Sigma, the calibrated one Sigma, both within 5% Frobenius.
    std::mt19937_64 rng(26);
    const std::size_t dim = 3, n = 50000;
    const Gaussian truth = random_gaussian(dim, rng);
    const Matrix samples = sample_gaussian(truth, n, rng);

    Vector mean(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += samples(r, c);
    for (double &v : mean) v /= static_cast<double>(n);

    Matrix resid_cov(dim, dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b)
                resid_cov(a, b) += (samples(r, a) - mean[a]) * (samples(r, b) - mean[b]) /
                                   static_cast<double>(n);

    const Matrix &prior = truth.cov.matrix();
    const Matrix uncal = prior + resid_cov;                 // stationary point of plain KL
    const Matrix cal = 0.5 * (prior + resid_cov);           // stationary point, calibrated
    const Matrix twice_sigma = 2.0 * prior;

    const double err_uncal =
        frobenius_distance(uncal, twice_sigma) / frobenius_norm(twice_sigma);
    const double err_cal = frobenius_distance(cal, prior) / frobenius_norm(prior);

    // numeric minimization of the calibrated objective over the predicted
    // covariance, via its sufficient statistics
    const std::size_t packed = dim * (dim + 1) / 2;
    Vector raw(packed, 0.0);
    for (std::size_t i = 0; i < dim; ++i) raw[i * (i + 1) / 2 + i] = softplus_inverse(1.0);
    AdamW opt(AdamWConfig{.lr = 0.05, .weight_decay = 0.0});
    const std::size_t slot = opt.register_tensor(packed);
    for (int step = 0; step < 600; ++step) {
        ad::Tape t;
        ad::Ref p = t.param(1, packed, raw);
        ad::Ref l = t.lower_from_packed(t.softplus_diag_packed(p, dim, 1e-9), dim);
        ad::Ref obj = t.add(t.scale(t.add(t.trace_solve(l, prior), t.trace_solve(l, resid_cov)),
                                    0.25),
                            t.scale(t.logdet_from_chol(l), 0.5));
        t.backward(obj);
        opt.begin_step();
        opt.update(slot, raw, t.grad(p));
    }
    Matrix l_final(dim, dim, 0.0);
    {
        std::size_t flat = 0;
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = raw[flat++];
                l_final(i, j) = i == j ? softplus_value(v) + 1e-9 : v;
            }
    }
    const Matrix numeric_min = l_final * transposed(l_final);
    const double err_numeric =
        frobenius_distance(numeric_min, prior) / frobenius_norm(prior);

    const double worst = std::max({err_uncal, err_cal, err_numeric}) - 0.05;
    std::ostringstream detail;
    detail << "uncalibrated->2S err " << err_uncal << ", calibrated->S err " << err_cal
           << ", numeric minimizer err " << err_numeric;
    return make_result("gaussian-metrics", "kl-calibration", n, worst, detail.str());
}

// ------------------------------------------------------------ pseudolabel --

PropertyResult prop_pseudo_weights() {
    std::mt19937_64 rng(31);
    const RegressionDataset ds = random_dataset(200, 3, 2, rng);
    const SPDMatrix precision = spd_inverse(input_covariance(ds));
    const PseudoLabelSet labels = pseudo_labels(ds, 12);
    double worst = -1e300;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        auto [idx, dist] = knn_mahalanobis(ds, r, 12, precision);
        Vector w(idx.size());
        double sum = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            w[j] = std::exp(-dist[j]);
            sum += w[j];
        }
        double recomputed_sum = 0.0;
        Vector mean(ds.target_dim(), 0.0);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            w[j] /= sum;
            worst = std::max(worst, -w[j]); // nonnegative
            recomputed_sum += w[j];
            for (std::size_t c = 0; c < ds.target_dim(); ++c)
                mean[c] += w[j] * ds.targets(idx[j], c);
        }
        worst = std::max(worst, std::abs(recomputed_sum - 1.0) - 1e-12);
        for (std::size_t c = 0; c < ds.target_dim(); ++c)
            worst = std::max(worst, std::abs(mean[c] - labels.rows[r].mean[c]));
    }
    return make_result("pseudolabel", "weights-normalized", ds.size(), worst);
}

PropertyResult prop_pseudo_psd() {
    std::mt19937_64 rng(32);
    const RegressionDataset ds = random_dataset(300, 4, 3, rng);
    const PseudoLabelSet labels = pseudo_labels(ds, 9); // fewer neighbors than needed for full rank
    double min_eig = 1e300;
    for (const PseudoLabel &pl : labels.rows)
        min_eig = std::min(min_eig, sym_eig(pl.cov).eigenvalues.front());
    return make_result("pseudolabel", "labels-psd", labels.size(), -min_eig - 1e-10,
                       "min eigenvalue " + std::to_string(min_eig));
}

PropertyResult prop_pseudo_permutation() {
    std::mt19937_64 rng(33);
    const RegressionDataset ds = random_dataset(120, 3, 2, rng);
    const PseudoLabelSet base = pseudo_labels(ds, 8);

    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const RegressionDataset shuffled = ds.rows_subset(perm);
    const PseudoLabelSet permuted = pseudo_labels(shuffled, 8);

    double worst = -1e300;
    for (std::size_t r = 0; r < perm.size(); ++r) {
        const PseudoLabel &a = base.rows[perm[r]];
        const PseudoLabel &b = permuted.rows[r];
        for (std::size_t c = 0; c < a.mean.size(); ++c)
            worst = std::max(worst, std::abs(a.mean[c] - b.mean[c]));
        worst = std::max(worst, frobenius_distance(a.cov.matrix(), b.cov.matrix()));
    }
    return make_result("pseudolabel", "permutation-equivariance", perm.size(), worst - 1e-9);
}

PropertyResult prop_pseudo_scaling() {
    std::mt19937_64 rng(34);
    const RegressionDataset ds = random_dataset(50, 3, 2, rng);
    RegressionDataset scaled = ds;
    const double factors[3] = {0.5, 2.0, 4.0};
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t c = 0; c < 3; ++c) scaled.inputs(r, c) *= factors[c];

    const SPDMatrix prec_a = spd_inverse(input_covariance(ds, 0.0));
    const SPDMatrix prec_b = spd_inverse(input_covariance(scaled, 0.0));
    double mismatches = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        auto [ia, da] = knn_mahalanobis(ds, r, 7, prec_a);
        auto [ib, db] = knn_mahalanobis(scaled, r, 7, prec_b);
        std::sort(ia.begin(), ia.end());
        std::sort(ib.begin(), ib.end());
        if (ia != ib) mismatches += 1;
    }
    return make_result("pseudolabel", "scaling-equivariance", ds.size(), mismatches,
                       "neighbor set mismatches " + std::to_string(mismatches));
}

PropertyResult prop_pseudo_oracle() {
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed * 7919);
        const RegressionDataset ds = random_dataset(100, 2, 2, rng);
        const PseudoLabelSet fast = pseudo_labels(ds, 10);
        const PseudoLabelSet ref = pseudo_labels_reference(ds, 10);
        for (std::size_t r = 0; r < ds.size(); ++r) {
            const PseudoLabel &a = fast.rows[r];
            const PseudoLabel &b = ref.rows[r];
            if (a.neighbors != b.neighbors) worst = std::max(worst, 1.0);
            for (std::size_t c = 0; c < a.mean.size(); ++c)
                worst = std::max(worst, std::abs(a.mean[c] - b.mean[c]));
            worst = std::max(worst, frobenius_distance(a.cov.matrix(), b.cov.matrix()));
            worst = std::max(worst,
                             frobenius_distance(a.sqrt_cov.matrix(), b.sqrt_cov.matrix()));
            ++samples;
        }
    }
    return make_result("pseudolabel", "oracle-equality", samples, worst,
                       "exact match required; worst deviation " + std::to_string(worst));
}

// ------------------------------------------------------------ autodiff-mlp --

PropertyResult prop_ad_op_gradients() {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = -1e300;

    // stop_gradient: d(stop(x) * x)/dx = x, not 2x
    {
        ad::Tape t;
        const double xv[2] = {1.0, 2.0};
        ad::Ref x = t.param(1, 2, xv);
        ad::Ref loss = t.reduce_sum(t.mul(t.stop_gradient(x), x));
        t.backward(loss);
        worst = std::max(worst, std::abs(t.grad(x)[0] - 1.0));
        worst = std::max(worst, std::abs(t.grad(x)[1] - 2.0));
    }
    // frobenius_sq gradient is 2 * argument
    {
        ad::Tape t;
        const double xv[3] = {0.5, -1.5, 2.0};
        ad::Ref x = t.param(1, 3, xv);
        t.backward(t.frobenius_sq(x));
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst, std::abs(t.grad(x)[i] - 2.0 * xv[i]));
    }
    // matmul(I, A) = A
    {
        ad::Tape t;
        Matrix a(3, 3);
        std::mt19937_64 r2(5);
        for (double &v : a.data()) v = normal(r2);
        ad::Ref ra = t.constant(a);
        ad::Ref prod = t.matmul(t.constant(Matrix::identity(3)), ra);
        worst = std::max(worst, frobenius_distance(t.value_matrix(prod), a));
    }

    // composed tanh MLP scalar output against finite differences
    for (int trial = 0; trial < 10; ++trial) {
        MLPConfig cfg{.input_dim = 3, .output_dim = 2, .hidden_layers = 2, .hidden_width = 5,
                      .activation = Activation::tanh};
        MLPParams params = init_mlp(cfg, rng);
        Matrix x(4, 3);
        for (double &v : x.data()) v = normal(rng);
        const auto build = [&](ad::Tape &t, ad::Ref flat) {
            std::size_t off = 0;
            NetRefs net = bind_flat(t, cfg, flat, off);
            return t.frobenius_sq(mlp_forward(t, net, t.constant(x)));
        };
        const auto report = ad::grad_check(build, params.flatten());
        worst = std::max(worst, report.worst_margin);
    }
    return make_result("autodiff-mlp", "op-gradients", 13, worst);
}

PropertyResult prop_ad_determinism() {
    auto run_once = [](std::uint64_t seed) {
        const RegressionDataset ds = gen_sinusoid(1, 400, 99);
        const PseudoLabelSet pl = pseudo_labels(ds, 10, 1);
        const TrainLabels labels = labels_from_pseudo(pl);
        TrainSpec spec;
        spec.loss = LossKind::w2_bound();
        spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 1;
        spec.mean_arch.hidden_width = spec.cov_arch.hidden_width = 8;
        spec.epochs = 3;
        spec.batch = 64;
        spec.seed = seed;
        return train(ds, &labels, spec);
    };
    const TrainResult a = run_once(7);
    const TrainResult b = run_once(7);
    double worst = -1.0;
    const Vector fa = a.predictor.mean.flatten(), fb = b.predictor.mean.flatten();
    const Vector ca = a.predictor.cov.flatten(), cb = b.predictor.cov.flatten();
    for (std::size_t i = 0; i < fa.size(); ++i)
        worst = std::max(worst, fa[i] == fb[i] ? 0.0 : 1.0);
    for (std::size_t i = 0; i < ca.size(); ++i)
        worst = std::max(worst, ca[i] == cb[i] ? 0.0 : 1.0);
    for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
        worst = std::max(
            worst, a.log.epochs[e].record.mse == b.log.epochs[e].record.mse ? 0.0 : 1.0);
        worst = std::max(
            worst, a.log.epochs[e].record.w2 == b.log.epochs[e].record.w2 ? 0.0 : 1.0);
    }
    return make_result("autodiff-mlp", "train-determinism", fa.size() + ca.size(), worst,
                       "bit-identical parameters and metrics required");
}

PropertyResult prop_cholhead_pd() {
    // Strict positive definiteness holds by construction: every diagonal of
    // the factor is softplus + floor, so det(L L^T) = prod L_ii^2 > 0. The
    // assembled product can only be eigen-checked to assembly roundoff, since
    // sigma_min(L)^2 routinely sits far below eps * ||L L^T||.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> normal(0.0, 3.0);
    double worst = -1e300;
    double min_eig = 1e300;
    std::uint64_t samples = 0;
    for (std::size_t dim : {1, 2, 3, 4}) {
        const CovHead head{CovHeadKind::cholesky_full, dim, 1e-6};
        Vector raw(head.raw_dim());
        for (int i = 0; i < 2500; ++i) {
            for (double &v : raw) v = normal(rng);
            const Matrix l = head_chol_factor(head, raw);
            for (std::size_t d = 0; d < dim; ++d)
                worst = std::max(worst, head.floor - l(d, d)); // exact construction bound
            const SPDMatrix cov = head_covariance(head, raw);
            const double eig = sym_eig(cov).eigenvalues.front();
            min_eig = std::min(min_eig, eig);
            worst = std::max(worst, -eig - 1e-10 * (1.0 + cov.trace()));
            ++samples;
        }
    }
    return make_result("autodiff-mlp", "cholesky-head-pd", samples, worst,
                       "factor diagonal >= floor exactly; min measured eigenvalue " +
                           std::to_string(min_eig));
}

PropertyResult prop_symhead_psd() {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> normal(0.0, 3.0);
    double min_eig = 1e300;
    std::uint64_t samples = 0;
    for (std::size_t dim : {1, 2, 3, 4}) {
        const CovHead head{CovHeadKind::sym_sqrt, dim, 1e-6};
        Vector raw(head.raw_dim());
        for (int i = 0; i < 2500; ++i) {
            for (double &v : raw) v = normal(rng);
            const SPDMatrix cov = head_covariance(head, raw);
            min_eig = std::min(min_eig, sym_eig(cov).eigenvalues.front());
            ++samples;
        }
    }
    return make_result("autodiff-mlp", "sym-head-psd", samples, -min_eig - 1e-10,
                       "min implied eigenvalue " + std::to_string(min_eig));
}

// ----------------------------------------------------------------- losses --

struct LossFixture {
    MLPConfig mean_cfg, cov_cfg;
    CovHead head;
    MLPParams mean, cov;
    LossBatch batch;
    std::vector<Matrix> priors, prior_sqrts;
};

LossFixture make_fixture(const LossKind &loss, std::size_t n, std::mt19937_64 &rng,
                         std::size_t batch_rows = 3) {
    std::normal_distribution<double> normal(0.0, 1.0);
    LossFixture f;
    f.head = CovHead{head_for(loss), n, 1e-6};
    f.mean_cfg = MLPConfig{.input_dim = 2, .output_dim = n, .hidden_layers = 1,
                           .hidden_width = 4, .activation = Activation::tanh};
    f.cov_cfg = f.mean_cfg;
    f.cov_cfg.output_dim = f.head.raw_dim();
    f.mean = init_mlp(f.mean_cfg, rng);
    f.cov = init_mlp(f.cov_cfg, rng);
    set_head_bias_identity(f.head, f.cov);

    f.batch.x = Matrix(batch_rows, 2);
    f.batch.y = Matrix(batch_rows, n);
    for (double &v : f.batch.x.data()) v = normal(rng);
    for (double &v : f.batch.y.data()) v = normal(rng);
    for (std::size_t r = 0; r < batch_rows; ++r) {
        f.priors.push_back(random_spd_matrix(n, rng));
        f.prior_sqrts.push_back(spd_sqrt(SPDMatrix(f.priors.back())).matrix());
    }
    for (std::size_t r = 0; r < batch_rows; ++r) {
        f.batch.prior.push_back(&f.priors[r]);
        f.batch.prior_sqrt.push_back(&f.prior_sqrts[r]);
        Matrix l = cholesky(SPDMatrix(f.priors[r]));
        f.batch.prior_logdet.push_back(logdet_from_cholesky(l));
    }
    return f;
}

Vector fixture_point(const LossFixture &f) {
    Vector point = f.mean.flatten();
    const Vector cov_flat = f.cov.flatten();
    point.insert(point.end(), cov_flat.begin(), cov_flat.end());
    return point;
}

ad::LossBuilder fixture_builder(const LossFixture &f, const LossKind &loss) {
    return [&f, loss](ad::Tape &t, ad::Ref flat) {
        std::size_t off = 0;
        NetRefs mean_net = bind_flat(t, f.mean_cfg, flat, off);
        NetRefs cov_net = bind_flat(t, f.cov_cfg, flat, off);
        return build_loss(t, loss, f.batch, mean_net, cov_net, f.head);
    };
}

PropertyResult prop_betanll_zero_reduction() {
    std::mt19937_64 rng(51);
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::size_t n : {1, 2, 4}) {
        for (int trial = 0; trial < 5; ++trial) {
            LossFixture f = make_fixture(LossKind::beta_nll(0.0), n, rng);
            const Vector point = fixture_point(f);

            auto eval = [&](const LossKind &loss, Vector &grad_out) {
                ad::Tape t;
                ad::Ref p = t.param(1, point.size(), point);
                ad::Ref l = fixture_builder(f, loss)(t, p);
                t.backward(l);
                const auto g = t.grad(p);
                grad_out.assign(g.begin(), g.end());
                return t.value_scalar(l);
            };
            Vector g_beta, g_diag;
            const double v_beta = eval(LossKind::beta_nll(0.0), g_beta);
            const double v_diag = eval(LossKind::nll_diag(), g_diag);
            worst = std::max(worst, v_beta == v_diag ? 0.0 : std::abs(v_beta - v_diag) + 1.0);
            for (std::size_t i = 0; i < g_beta.size(); ++i)
                worst = std::max(worst, g_beta[i] == g_diag[i] ? 0.0 : 1.0);
            ++samples;
        }
    }
    return make_result("losses", "betanll-zero-reduction", samples, worst,
                       "exact value and gradient agreement required");
}

PropertyResult prop_faithful_purity() {
    std::mt19937_64 rng(52);
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::size_t n : {1, 2, 4}) {
        for (int trial = 0; trial < 5; ++trial) {
            LossFixture f = make_fixture(LossKind::faithful(), n, rng);

            ad::Tape t1;
            NetRefs mean1 = bind_params(t1, f.mean_cfg, f.mean);
            NetRefs cov1 = bind_params(t1, f.cov_cfg, f.cov);
            t1.backward(loss_faithful(t1, f.batch, mean1, cov1, f.head));
            std::vector<Vector> g_faithful;
            collect_grads(t1, mean1, g_faithful);

            ad::Tape t2;
            NetRefs mean2 = bind_params(t2, f.mean_cfg, f.mean);
            t2.backward(loss_mse(t2, f.batch, mean2));
            std::vector<Vector> g_mse;
            collect_grads(t2, mean2, g_mse);

            for (std::size_t tensor = 0; tensor < g_faithful.size(); ++tensor)
                for (std::size_t i = 0; i < g_faithful[tensor].size(); ++i)
                    worst = std::max(worst,
                                     g_faithful[tensor][i] == g_mse[tensor][i] ? 0.0 : 1.0);
            ++samples;
        }
    }
    return make_result("losses", "faithful-mean-purity", samples, worst,
                       "mean-network gradients must equal the pure MSE gradients");
}

PropertyResult prop_w2_residual_independence() {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (std::size_t n : {1, 2, 4}) {
        for (int trial = 0; trial < 5; ++trial) {
            LossFixture f = make_fixture(LossKind::w2_bound(), n, rng);

            auto cov_grads = [&](const LossBatch &batch) {
                ad::Tape t;
                NetRefs mean_net = bind_params(t, f.mean_cfg, f.mean);
                NetRefs cov_net = bind_params(t, f.cov_cfg, f.cov);
                t.backward(loss_w2_bound(t, batch, mean_net, cov_net, f.head));
                std::vector<Vector> g;
                collect_grads(t, cov_net, g);
                return g;
            };

            const std::vector<Vector> base = cov_grads(f.batch);
            LossBatch perturbed = f.batch;
            for (double &v : perturbed.y.data()) v += normal(rng);
            const std::vector<Vector> shifted = cov_grads(perturbed);
            for (std::size_t tensor = 0; tensor < base.size(); ++tensor)
                for (std::size_t i = 0; i < base[tensor].size(); ++i)
                    worst = std::max(worst,
                                     base[tensor][i] == shifted[tensor][i] ? 0.0 : 1.0);
            ++samples;
        }
    }
    return make_result("losses", "w2-residual-independence", samples, worst,
                       "covariance gradients must ignore target perturbations");
}

PropertyResult prop_no_eig_in_training() {
    std::mt19937_64 rng(54);
    const LossKind all[6] = {LossKind::nll_full(),      LossKind::nll_diag(),
                             LossKind::beta_nll(0.5),   LossKind::faithful(),
                             LossKind::kl_calibrated(), LossKind::w2_bound()};
    std::uint64_t total_calls = 0;
    std::uint64_t samples = 0;
    for (const LossKind &loss : all) {
        for (std::size_t n : {1, 2, 4}) {
            LossFixture f = make_fixture(loss, n, rng, 4);
            instrument::reset_eig_calls();
            ad::Tape t;
            NetRefs mean_net = bind_params(t, f.mean_cfg, f.mean);
            NetRefs cov_net = bind_params(t, f.cov_cfg, f.cov);
            t.backward(build_loss(t, loss, f.batch, mean_net, cov_net, f.head));
            total_calls += instrument::eig_calls();
            ++samples;
        }
    }
    return make_result("losses", "no-eig-in-training", samples,
                       static_cast<double>(total_calls),
                       "eig/root calls during loss graphs " + std::to_string(total_calls));
}

PropertyResult prop_losses_grad_check() {
    std::mt19937_64 rng(55);
    const LossKind all[6] = {LossKind::nll_full(),      LossKind::nll_diag(),
                             LossKind::beta_nll(0.5),   LossKind::faithful(),
                             LossKind::kl_calibrated(), LossKind::w2_bound()};
    double worst = -1e300;
    std::uint64_t samples = 0;
    for (const LossKind &loss : all) {
        for (std::size_t n : {1, 2, 4, 8}) {
            for (int point = 0; point < 20; ++point) {
                LossFixture f = make_fixture(loss, n, rng);
                const auto report = ad::grad_check(fixture_builder(f, loss), fixture_point(f));
                worst = std::max(worst, report.worst_margin);
                ++samples;
            }
        }
    }
    return make_result("losses", "grad-check-all", samples, worst,
                       "central differences, tol max(1e-4 rel, 1e-7 abs)");
}

// --------------------------------------------------------------- datasets --

PropertyResult prop_dataset_determinism() {
    double worst = -1.0;
    auto cmp = [&](const RegressionDataset &a, const RegressionDataset &b) {
        worst = std::max(worst, frobenius_distance(a.inputs, b.inputs));
        worst = std::max(worst, frobenius_distance(a.targets, b.targets));
    };
    cmp(gen_sinusoid(2, 500, 17), gen_sinusoid(2, 500, 17));
    cmp(gen_multivariate(4, 300, 17), gen_multivariate(4, 300, 17));
    const BivariateProblem p1 = gen_bivariate_problem(17), p2 = gen_bivariate_problem(17);
    worst = std::max(worst, frobenius_distance(p1.target.cov.matrix(), p2.target.cov.matrix()));
    worst = std::max(worst, squared_distance(p1.target.mean, p2.target.mean));
    return make_result("datasets", "generator-determinism", 4, worst,
                       "identical seeds must reproduce identical data");
}

PropertyResult prop_multivariate_gt_pd() {
    const RegressionDataset ds = gen_multivariate(4, 500, 23);
    double min_eig = 1e300;
    for (const Gaussian &g : *ds.ground_truth)
        min_eig = std::min(min_eig, sym_eig(g.cov).eigenvalues.front());
    return make_result("datasets", "multivariate-gt-pd", ds.size(),
                       min_eig > 0.0 ? -min_eig : 1.0,
                       "min ground-truth eigenvalue " + std::to_string(min_eig));
}

PropertyResult prop_standardize_idempotent() {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> normal(3.0, 7.0);
    RegressionDataset ds = random_dataset(400, 3, 2, rng);
    for (double &v : ds.inputs.data()) v = normal(rng);
    for (std::size_t r = 0; r < ds.size(); ++r) ds.inputs(r, 2) = 5.0; // constant column

    const StandardizeResult once = standardize(ds);
    const StandardizeResult twice = standardize(once.ds);
    double worst = frobenius_distance(once.ds.inputs, twice.ds.inputs);
    worst = std::max(worst, frobenius_distance(once.ds.targets, twice.ds.targets));

    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < once.ds.size(); ++r) mean += once.ds.inputs(r, c);
        worst = std::max(worst, std::abs(mean / static_cast<double>(once.ds.size())));
    }
    return make_result("datasets", "standardize-idempotent", ds.size(), worst - 1e-10);
}

// --------------------------------------------------------------- bench-cli --

PropertyResult prop_csv_roundtrip() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hetreg_verify_csv";
    fs::create_directories(dir);
    double worst = -1.0;
    std::uint64_t cells = 0;

    auto check_file = [&](const std::string &path, bool has_header) {
        const Matrix reloaded = load_csv(path, has_header);
        const std::string copy = path + ".copy";
        write_csv(copy, reloaded, "");
        const Matrix again = load_csv(copy, false);
        for (std::size_t i = 0; i < reloaded.size(); ++i) {
            const double a = reloaded.data()[i], b = again.data()[i];
            const bool same = (a == b) || (std::isnan(a) && std::isnan(b));
            worst = std::max(worst, same ? 0.0 : 1.0);
            ++cells;
        }
    };

    MetricsLog log;
    log.loss = LossKind::w2_bound();
    for (std::size_t e = 0; e < 5; ++e) {
        EpochMetrics em;
        em.epoch = e;
        em.record.mse = 0.1 * static_cast<double>(e) + 1.0 / 3.0;
        em.record.nll = -1.234567890123456789e-3;
        em.record.kl = std::numeric_limits<double>::quiet_NaN();
        em.record.w2 = 9.87654321e+12;
        log.epochs.push_back(em);
    }
    const std::string metrics_path = (dir / "metrics.csv").string();
    write_metrics_csv(metrics_path, log);
    check_file(metrics_path, true);

    std::mt19937_64 rng(71);
    const RegressionDataset ds = random_dataset(40, 2, 2, rng);
    const PseudoLabelSet labels = pseudo_labels(ds, 6);
    const std::string labels_path = (dir / "labels.csv").string();
    export_labels(labels, labels_path);
    check_file(labels_path, true);

    std::vector<BenchRecord> records(2);
    records[0].loss = LossKind::nll_full();
    records[0].dim = 4;
    records[0].step_ms_mean = 1.25;
    records[1].loss = LossKind::w2_bound();
    records[1].dim = 4;
    records[1].step_ms_median = 2.0 / 7.0;
    const std::string bench_path = (dir / "bench.csv").string();
    write_bench_csv(bench_path, records);
    check_file(bench_path, true);

    return make_result("bench-cli", "csv-roundtrip", cells, worst,
                       "17-significant-digit round trip through load_csv");
}

PropertyResult prop_registry_complete();

// Expected property count per module. Registering a new property without
// updating this table fails the meta-check below.
constexpr std::pair<const char *, std::size_t> kExpectedCounts[] = {
    {"linalg", 5},   {"gaussian-metrics", 6}, {"pseudolabel", 5}, {"autodiff-mlp", 4},
    {"losses", 5},   {"datasets", 3},         {"bench-cli", 2},
};

PropertyResult prop_registry_complete() {
    std::map<std::string, std::size_t> counts;
    for (const Property &p : property_suite()) ++counts[p.module];
    double worst = -1.0;
    std::size_t expected_total = 0;
    std::ostringstream detail;
    for (const auto &[module, expected] : kExpectedCounts) {
        expected_total += expected;
        const std::size_t actual = counts.count(module) ? counts.at(module) : 0;
        if (actual != expected) {
            worst = 1.0;
            detail << module << " has " << actual << ", expected " << expected << "; ";
        }
    }
    if (property_suite().size() != expected_total) worst = std::max(worst, 1.0);
    if (detail.str().empty()) detail << "all " << expected_total << " properties registered";
    return make_result("bench-cli", "registry-complete", property_suite().size(), worst,
                       detail.str());
}

} // namespace

const std::vector<Property> &property_suite() {
    static const std::vector<Property> suite = {
        {"linalg", "spd-sqrt-roundtrip", prop_spd_sqrt_roundtrip},
        {"linalg", "cholesky-roundtrip", prop_cholesky_roundtrip},
        {"linalg", "mahalanobis-metric", prop_mahalanobis_metric},
        {"linalg", "weighted-covariance-population", prop_weighted_covariance_population},
        {"linalg", "project-idempotent", prop_project_idempotent},
        {"gaussian-metrics", "w2-bound-dominance", prop_w2_bound_dominance},
        {"gaussian-metrics", "commutative-tightness", prop_commutative_tightness},
        {"gaussian-metrics", "trace-root-gap-nonneg", prop_trace_root_gap_nonneg},
        {"gaussian-metrics", "kl-identity-nonneg", prop_kl_basics},
        {"gaussian-metrics", "w2-symmetry", prop_w2_symmetry},
        {"gaussian-metrics", "kl-calibration", prop_kl_calibration},
        {"pseudolabel", "weights-normalized", prop_pseudo_weights},
        {"pseudolabel", "labels-psd", prop_pseudo_psd},
        {"pseudolabel", "permutation-equivariance", prop_pseudo_permutation},
        {"pseudolabel", "scaling-equivariance", prop_pseudo_scaling},
        {"pseudolabel", "oracle-equality", prop_pseudo_oracle},
        {"autodiff-mlp", "op-gradients", prop_ad_op_gradients},
        {"autodiff-mlp", "train-determinism", prop_ad_determinism},
        {"autodiff-mlp", "cholesky-head-pd", prop_cholhead_pd},
        {"autodiff-mlp", "sym-head-psd", prop_symhead_psd},
        {"losses", "betanll-zero-reduction", prop_betanll_zero_reduction},
        {"losses", "faithful-mean-purity", prop_faithful_purity},
        {"losses", "w2-residual-independence", prop_w2_residual_independence},
        {"losses", "no-eig-in-training", prop_no_eig_in_training},
        {"losses", "grad-check-all", prop_losses_grad_check},
        {"datasets", "generator-determinism", prop_dataset_determinism},
        {"datasets", "multivariate-gt-pd", prop_multivariate_gt_pd},
        {"datasets", "standardize-idempotent", prop_standardize_idempotent},
        {"bench-cli", "csv-roundtrip", prop_csv_roundtrip},
        {"bench-cli", "registry-complete", prop_registry_complete},
    };
    return suite;
}

std::vector<PropertyResult> run_properties(const std::string &filter) {
    std::vector<PropertyResult> results;
    for (const Property &p : property_suite()) {
        const std::string full = p.module + "/" + p.name;
        if (!filter.empty() && full.find(filter) == std::string::npos) continue;
        try {
            results.push_back(p.fn());
        } catch (const std::exception &e) {
            PropertyResult r;
            r.module = p.module;
            r.name = p.name;
            r.pass = false;
            r.worst_margin = std::numeric_limits<double>::infinity();
            r.detail = std::string("exception: ") + e.what();
            results.push_back(std::move(r));
        }
    }
    return results;
}

bool report(std::ostream &out, const std::vector<PropertyResult> &results) {
    bool all_pass = true;
    for (const PropertyResult &r : results) {
        all_pass = all_pass && r.pass;
        char margin[40];
        std::snprintf(margin, sizeof margin, "%.3g", r.worst_margin);
        out << (r.pass ? "PASS" : "FAIL") << "  " << r.module << "/" << r.name << "  samples="
            << r.samples << "  worst_margin=" << margin;
        if (!r.detail.empty()) out << "  (" << r.detail << ")";
        out << "\n";
    }
    out << (all_pass ? "all properties passed" : "PROPERTY FAILURES PRESENT") << " ("
        << results.size() << " run)\n";
    return all_pass;
}

} // namespace hetreg::verify
