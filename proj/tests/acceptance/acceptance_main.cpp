// Acceptance suite: one criterion per check, each printed as a PASS/FAIL
// line with its measured margin. Exit status is nonzero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "hetreg/csv.hpp"
#include "hetreg/harness.hpp"
#include "hetreg/verify.hpp"

using namespace hetreg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. The square-root-factor bound dominates the exact squared 2-Wasserstein
//    distance: w2_exact <= w2_bound + 1e-8 (1 + w2_exact) over 1000 random
//    SPD pairs per dim in {2,4,8,16}; commuting pairs agree to 1e-9.
Outcome criterion_w2_bound_dominance() {
    std::mt19937_64 rng(1001);
    double worst_violation = -1e300;
    std::size_t samples = 0;
    for (std::size_t dim : {2, 4, 8, 16}) {
        for (int i = 0; i < 1000; ++i) {
            const Gaussian a = verify::random_gaussian(dim, rng);
            const Gaussian b = verify::random_gaussian(dim, rng);
            const double exact = w2_exact(a, b);
            const double bound = w2_bound(SqrtGaussian(a.mean, spd_sqrt(a.cov).matrix()),
                                          SqrtGaussian(b.mean, spd_sqrt(b.cov).matrix()));
            worst_violation = std::max(worst_violation, exact - bound - 1e-8 * (1.0 + exact));
            ++samples;
        }
    }

    std::uniform_real_distribution<double> lam(0.1, 4.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst_gap = -1e300;
    for (std::size_t dim : {2, 4, 8}) {
        for (int i = 0; i < 200; ++i) {
            const EigenPair basis = sym_eig(SPDMatrix(verify::random_spd_matrix(dim, rng)));
            const Matrix &q = basis.eigenvectors;
            Vector d1(dim), d2(dim), v1(dim), v2(dim), mu1(dim), mu2(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                d1[j] = lam(rng);
                d2[j] = lam(rng);
                v1[j] = d1[j] * d1[j];
                v2[j] = d2[j] * d2[j];
                mu1[j] = normal(rng);
                mu2[j] = normal(rng);
            }
            const Gaussian a(mu1, project_to_spd(q * Matrix::diagonal(v1) * transposed(q), 0.0));
            const Gaussian b(mu2, project_to_spd(q * Matrix::diagonal(v2) * transposed(q), 0.0));
            const double exact = w2_exact(a, b);
            const double bound = w2_bound(
                SqrtGaussian(mu1, symmetrized(q * Matrix::diagonal(d1) * transposed(q))),
                SqrtGaussian(mu2, symmetrized(q * Matrix::diagonal(d2) * transposed(q))));
            worst_gap = std::max(worst_gap, std::abs(exact - bound) - 1e-9);
            ++samples;
        }
    }

    std::ostringstream d;
    d << samples << " pairs; worst bound violation " << worst_violation
      << ", worst commuting gap slack " << worst_gap;
    return {worst_violation <= 0.0 && worst_gap <= 0.0, d.str()};
}

// ---------------------------------------------------------------------------
// 2. Tr[(A^{1/2} B A^{1/2})^{1/2}] >= Tr(A^{1/2} B^{1/2}) over the same
//    sampling plan.
Outcome criterion_trace_inequality() {
    std::mt19937_64 rng(1002);
    double min_gap = 1e300;
    std::size_t samples = 0;
    for (std::size_t dim : {2, 4, 8, 16}) {
        for (int i = 0; i < 1000; ++i) {
            min_gap = std::min(min_gap,
                               trace_root_gap(SPDMatrix(verify::random_spd_matrix(dim, rng)),
                                              SPDMatrix(verify::random_spd_matrix(dim, rng))));
            ++samples;
        }
    }
    std::ostringstream d;
    d << samples << " pairs; min trace gap " << min_gap << " (tolerance -1e-9)";
    return {min_gap >= -1e-9, d.str()};
}

// ---------------------------------------------------------------------------
// 3. KL calibration at dim 3 with 50000 samples and the true covariance as
//    prior: the plain-KL covariance minimizer lands within 5% of 2 Sigma,
//    the calibrated one within 5% of Sigma.
Outcome criterion_kl_calibration() {
    std::mt19937_64 rng(1003);
    const std::size_t dim = 3, n = 50000;
    const Gaussian truth = verify::random_gaussian(dim, rng);
    const Matrix samples = sample_gaussian(truth, n, rng);

    Vector mean(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += samples(r, c);
    for (double &v : mean) v /= static_cast<double>(n);
    Matrix resid(dim, dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b)
                resid(a, b) +=
                    (samples(r, a) - mean[a]) * (samples(r, b) - mean[b]) / static_cast<double>(n);

    const Matrix &prior = truth.cov.matrix();
    const double err_uncal = frobenius_distance(prior + resid, 2.0 * prior) /
                             frobenius_norm(2.0 * prior);
    const double err_cal =
        frobenius_distance(0.5 * (prior + resid), prior) / frobenius_norm(prior);

    std::ostringstream d;
    d << "uncalibrated minimizer vs 2*Sigma: " << err_uncal
      << ", calibrated vs Sigma: " << err_cal << " (tolerance 0.05)";
    return {err_uncal <= 0.05 && err_cal <= 0.05, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Gradient suite: all six objectives pass central-difference checks at 20
//    random points each, target dims {1,2,4,8}, within max(1e-4 rel, 1e-7).
struct GradFixture {
    MLPConfig mean_cfg, cov_cfg;
    CovHead head;
    LossBatch batch;
    std::vector<Matrix> priors, roots;
    Vector point;
};

GradFixture make_grad_fixture(const LossKind &loss, std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    GradFixture f;
    f.head = CovHead{head_for(loss), n, 1e-6};
    f.mean_cfg = MLPConfig{.input_dim = 2, .output_dim = n, .hidden_layers = 1,
                           .hidden_width = 4, .activation = Activation::tanh};
    f.cov_cfg = f.mean_cfg;
    f.cov_cfg.output_dim = f.head.raw_dim();

    MLPParams mean = init_mlp(f.mean_cfg, rng);
    MLPParams cov = init_mlp(f.cov_cfg, rng);
    set_head_bias_identity(f.head, cov);
    f.point = mean.flatten();
    const Vector cov_flat = cov.flatten();
    f.point.insert(f.point.end(), cov_flat.begin(), cov_flat.end());

    const std::size_t rows = 3;
    f.batch.x = Matrix(rows, 2);
    f.batch.y = Matrix(rows, n);
    for (double &v : f.batch.x.data()) v = normal(rng);
    for (double &v : f.batch.y.data()) v = normal(rng);
    for (std::size_t r = 0; r < rows; ++r) {
        f.priors.push_back(verify::random_spd_matrix(n, rng));
        f.roots.push_back(spd_sqrt(SPDMatrix(f.priors.back())).matrix());
    }
    for (std::size_t r = 0; r < rows; ++r) {
        f.batch.prior.push_back(&f.priors[r]);
        f.batch.prior_sqrt.push_back(&f.roots[r]);
        f.batch.prior_logdet.push_back(
            logdet_from_cholesky(cholesky(SPDMatrix(f.priors[r]))));
    }
    return f;
}

Outcome criterion_gradients() {
    std::mt19937_64 rng(1004);
    const LossKind losses[6] = {LossKind::nll_full(),      LossKind::nll_diag(),
                                LossKind::beta_nll(0.5),   LossKind::faithful(),
                                LossKind::kl_calibrated(), LossKind::w2_bound()};
    double worst = -1e300;
    std::size_t checks = 0;
    for (const LossKind &loss : losses) {
        for (std::size_t n : {1, 2, 4, 8}) {
            for (int point = 0; point < 20; ++point) {
                GradFixture f = make_grad_fixture(loss, n, rng);
                const auto build = [&](ad::Tape &t, ad::Ref flat) {
                    std::size_t off = 0;
                    const NetRefs mean_net = bind_flat(t, f.mean_cfg, flat, off);
                    const NetRefs cov_net = bind_flat(t, f.cov_cfg, flat, off);
                    return build_loss(t, loss, f.batch, mean_net, cov_net, f.head);
                };
                const auto report = ad::grad_check(build, f.point, 1e-5);
                worst = std::max(worst, report.worst_margin);
                ++checks;
            }
        }
    }
    std::ostringstream d;
    d << checks << " checks (6 losses x dims {1,2,4,8} x 20 points); worst margin over "
      << "max(1e-4 rel, 1e-7 abs): " << worst;
    return {worst <= 0.0, d.str()};
}

// ---------------------------------------------------------------------------
// 5. Pseudo-label oracle: exact agreement with the naive reference on 100-row
//    datasets over 20 seeds, plus homoscedastic recovery within 10%.
Outcome criterion_pseudolabels() {
    bool exact = true;
    for (std::uint64_t seed = 1; seed <= 20 && exact; ++seed) {
        std::mt19937_64 rng(seed * 7919);
        std::normal_distribution<double> normal(0.0, 1.0);
        RegressionDataset ds;
        ds.inputs = Matrix(100, 2);
        ds.targets = Matrix(100, 2);
        for (double &v : ds.inputs.data()) v = normal(rng);
        for (double &v : ds.targets.data()) v = normal(rng);
        const PseudoLabelSet fast = pseudo_labels(ds, 10);
        const PseudoLabelSet ref = pseudo_labels_reference(ds, 10);
        for (std::size_t r = 0; r < 100; ++r) {
            if (fast.rows[r].neighbors != ref.rows[r].neighbors ||
                fast.rows[r].mean != ref.rows[r].mean ||
                fast.rows[r].cov.matrix().data() != ref.rows[r].cov.matrix().data() ||
                fast.rows[r].sqrt_cov.matrix().data() != ref.rows[r].sqrt_cov.matrix().data())
                exact = false;
        }
    }

    std::mt19937_64 rng(1005);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = 20000;
    const Matrix sigma0 = Matrix::from_rows({{1.4, 0.5}, {0.5, 0.8}});
    RegressionDataset homo;
    homo.inputs = Matrix(n, 2);
    for (double &v : homo.inputs.data()) v = normal(rng);
    homo.targets = sample_gaussian(Gaussian(Vector{0.0, 0.0}, SPDMatrix(Matrix(sigma0))), n, rng);
    const PseudoLabelSet labels = pseudo_labels(homo, default_pseudo_k(2));
    Matrix avg(2, 2, 0.0);
    for (const PseudoLabel &pl : labels.rows)
        for (std::size_t e = 0; e < 4; ++e)
            avg.data()[e] += pl.cov.matrix().data()[e] / static_cast<double>(n);
    const double rec_err = frobenius_distance(avg, sigma0) / frobenius_norm(sigma0);

    std::ostringstream d;
    d << "oracle " << (exact ? "bit-exact over 20 seeds" : "MISMATCH")
      << "; homoscedastic recovery error " << rec_err << " (tolerance 0.10)";
    return {exact && rec_err <= 0.10, d.str()};
}

// ---------------------------------------------------------------------------
// 6. Bivariate distribution fitting: the Wasserstein bound at lr 1e-2 reaches
//    exact W2 <= 0.05 within 5000 full-batch steps on 20/20 seeds; NLL and
//    calibrated-KL runs at lr 1e-1 execute and their oscillation is reported.
Outcome criterion_bivariate() {
    std::size_t converged = 0;
    double worst_final = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const BivariateProblem problem = gen_bivariate_problem(seed);
        const RegressionDataset ds = sample_bivariate_dataset(problem, 1024, seed + 500);
        const TrainLabels labels = labels_from_ground_truth(ds);

        TrainSpec spec;
        spec.loss = LossKind::w2_bound();
        spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 0;
        spec.lr = 1e-2;
        spec.batch = 0; // full batch
        spec.seed = seed;

        TrainOptions options;
        options.eval_metrics = kMetricMse;
        options.eval_every = 1000000; // epoch metrics not needed here
        options.initial = make_predictor(ds, spec);
        options.initial->mean.biases.back() = problem.init.mean;

        double w2 = 1e300;
        std::size_t steps = 0;
        Predictor current = *options.initial;
        while (steps < 5000) {
            spec.epochs = 250; // full batch: one step per epoch
            options.initial = current;
            const TrainResult result = train(ds, &labels, spec, options);
            current = result.predictor;
            steps += 250;
            w2 = w2_exact(current.predict(Vector{0.0}), problem.target);
            if (w2 <= 0.03) break;
        }
        worst_final = std::max(worst_final, w2);
        if (w2 <= 0.05) ++converged;
    }

    // likelihood-family runs at the high learning rate, logged not asserted
    std::ostringstream extra;
    for (const LossKind &loss : {LossKind::nll_full(), LossKind::kl_calibrated()}) {
        const BivariateProblem problem = gen_bivariate_problem(3);
        const RegressionDataset ds = sample_bivariate_dataset(problem, 1024, 777);
        const TrainLabels labels = labels_from_ground_truth(ds);
        TrainSpec spec;
        spec.loss = loss;
        spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 0;
        spec.lr = 1e-1;
        spec.batch = 0;
        spec.epochs = 800;
        spec.seed = 3;
        TrainOptions options;
        options.eval_metrics = kMetricMse;
        options.eval_every = 1000000;
        options.initial = make_predictor(ds, spec);
        options.initial->mean.biases.back() = problem.init.mean;
        double min_w2 = 1e300, max_w2 = 0.0, final_w2 =
            std::numeric_limits<double>::quiet_NaN();
        options.on_step = [&](std::size_t, const Predictor &p) {
            const double w = w2_exact(p.predict(Vector{0.0}), problem.target);
            min_w2 = std::min(min_w2, w);
            max_w2 = std::max(max_w2, w);
            final_w2 = w;
        };
        const TrainResult result = train(ds, &labels, spec, options);
        extra << "; " << to_string(loss.kind) << "@lr1e-1 w2 min/max/final " << min_w2 << "/"
              << max_w2 << "/" << final_w2 << (result.log.diverged ? " (diverged)" : "");
    }

    std::ostringstream d;
    d << converged << "/20 seeds reached exact W2 <= 0.05 (worst " << worst_final << ")"
      << extra.str();
    return {converged == 20, d.str()};
}

// ---------------------------------------------------------------------------
// 7. Sinusoid variance recovery: variant 1 with pseudo-labels and 4x50 tanh
//    networks for 100 epochs; predicted sigma correlates with |x| at >= 0.9
//    on a 200-point grid and test MSE stays within 1.2x the Bayes floor.
Outcome criterion_sinusoid() {
    const RegressionDataset full = gen_sinusoid(1, 50000, 2024);
    const auto [train_ds, test_ds] = train_test_split(full, 0.2, 2024);
    const PseudoLabelSet pl = pseudo_labels(train_ds, default_pseudo_k(1));
    const TrainLabels labels = labels_from_pseudo(pl);

    TrainSpec spec;
    spec.loss = LossKind::w2_bound();
    spec.mean_arch = MLPConfig{.input_dim = 1, .output_dim = 1, .hidden_layers = 4,
                               .hidden_width = 50, .activation = Activation::tanh};
    spec.cov_arch = spec.mean_arch;
    spec.epochs = 100;
    spec.batch = 64;
    spec.lr = 1e-3;
    spec.seed = 7;

    TrainOptions options;
    options.eval_ds = &test_ds;
    options.eval_every = 20;
    const TrainResult result = train(train_ds, &labels, spec, options);

    // Pearson correlation between predicted sigma and |x| on a uniform grid
    const std::size_t grid = 200;
    Vector sig(grid), absx(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        const double x = -5.0 + 10.0 * static_cast<double>(i) / (grid - 1);
        const SqrtGaussian pred = result.predictor.predict_sqrt(Vector{x});
        sig[i] = std::abs(pred.sqrt_cov(0, 0));
        absx[i] = std::abs(x);
    }
    auto mean_of = [&](const Vector &v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const double ms = mean_of(sig), mx = mean_of(absx);
    double num = 0.0, ds2 = 0.0, dx2 = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        num += (sig[i] - ms) * (absx[i] - mx);
        ds2 += (sig[i] - ms) * (sig[i] - ms);
        dx2 += (absx[i] - mx) * (absx[i] - mx);
    }
    const double pearson = num / std::sqrt(ds2 * dx2);

    const MetricsRecord metrics = evaluate(result.predictor, test_ds, kMetricMse);
    double bayes = 0.0;
    for (const Gaussian &g : *test_ds.ground_truth) bayes += g.cov(0, 0);
    bayes /= static_cast<double>(test_ds.size());

    std::ostringstream d;
    d << "sigma/|x| Pearson " << pearson << " (>= 0.9), test MSE " << metrics.mse
      << " vs Bayes floor " << bayes << " (<= 1.2x)" << (result.log.diverged ? " DIVERGED" : "");
    return {pearson >= 0.9 && metrics.mse <= 1.2 * bayes && !result.log.diverged, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Multivariate comparison at dim 8: with equal epochs and identical batch
//    ordering, the bound beats vanilla NLL on final evaluation KL in >= 4/5
//    seeded trials.
Outcome criterion_multivariate() {
    std::size_t wins = 0;
    std::ostringstream per_trial;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        const RegressionDataset full = gen_multivariate(8, 0, 3000 + trial);
        const auto [train_ds, test_ds] = train_test_split(full, 0.2, 3000 + trial);
        const PseudoLabelSet pl = pseudo_labels(train_ds, default_pseudo_k(8));
        const TrainLabels labels = labels_from_pseudo(pl);

        auto run = [&](const LossKind &loss, const TrainLabels *lab) {
            TrainSpec spec;
            spec.loss = loss;
            spec.mean_arch = MLPConfig{.input_dim = 8, .output_dim = 8, .hidden_layers = 3,
                                       .hidden_width = 64, .activation = Activation::elu};
            spec.cov_arch = spec.mean_arch;
            spec.epochs = 25;
            spec.batch = 64;
            spec.lr = 1e-3;
            spec.seed = 42 + trial; // same seed, same batches for both losses
            TrainOptions options;
            options.eval_ds = &test_ds;
            options.eval_every = 25;
            const TrainResult result = train(train_ds, lab, spec, options);
            if (result.log.epochs.empty() || result.log.diverged)
                return std::numeric_limits<double>::infinity();
            return result.log.epochs.back().record.kl;
        };
        const double kl_bound = run(LossKind::w2_bound(), &labels);
        const double kl_nll = run(LossKind::nll_full(), nullptr);
        if (kl_bound < kl_nll) ++wins;
        per_trial << " [" << kl_bound << " vs " << kl_nll << "]";
    }
    std::ostringstream d;
    d << wins << "/5 trials with lower final KL for the bound (w2 vs nll):" << per_trial.str();
    return {wins >= 4, d.str()};
}

// ---------------------------------------------------------------------------
// 9. Compute-cost ordering at dim 32: median step time of the bound at most
//    twice vanilla NLL, and zero eig/root calls inside every training path.
Outcome criterion_compute_cost() {
    const std::vector<LossKind> losses = {LossKind::nll_full(),      LossKind::nll_diag(),
                                          LossKind::beta_nll(0.5),   LossKind::faithful(),
                                          LossKind::kl_calibrated(), LossKind::w2_bound()};
    BenchOptions options;
    options.warmup_steps = 50;
    options.measured_steps = 200;
    options.batch = 64;
    options.rows = 512;
    const auto records = run_bench({32}, losses, options);

    double nll_median = 0.0, w2_median = 0.0;
    std::uint64_t total_eig = 0;
    for (const BenchRecord &r : records) {
        total_eig += r.eig_calls;
        if (r.loss.kind == LossKind::Kind::nll_full) nll_median = r.step_ms_median;
        if (r.loss.kind == LossKind::Kind::w2_bound) w2_median = r.step_ms_median;
    }
    std::ostringstream d;
    d << "dim 32 median step ms: w2_bound " << w2_median << ", nll_full " << nll_median
      << " (ratio " << w2_median / nll_median << " <= 2), eig calls across all six paths "
      << total_eig;
    return {w2_median <= 2.0 * nll_median && total_eig == 0, d.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism: the train subcommand with a fixed seed writes byte-identical
//     metrics CSVs across two runs on one thread.
Outcome criterion_determinism() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "hetreg_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);

    const std::string config_path = (base / "run.ini").string();
    {
        std::ofstream cfg(config_path);
        cfg << "[run]\nrepetitions = 2\nseed = 5\noutput_dir = " << (base / "outA").string()
            << "\n[scenario]\nkind = bivariate\nn_samples = 256\n"
            << "[loss.w2_bound]\nepochs = 300\n[loss.nll_full]\nepochs = 300\nlr = 1e-2\n";
    }

    auto run_cli = [&](const std::string &outdir) {
        // rewrite output_dir per run
        std::ifstream in(config_path);
        std::stringstream text;
        text << in.rdbuf();
        std::string body = text.str();
        const std::string key = "output_dir = ";
        const std::size_t at = body.find(key);
        const std::size_t eol = body.find('\n', at);
        body = body.substr(0, at + key.size()) + outdir + body.substr(eol);
        const std::string cfg2 = (base / "run2.ini").string();
        std::ofstream(cfg2) << body;
        const std::string cmd = std::string("HETREG_THREADS=1 ") + HETREG_CLI_BIN +
                                " train --config " + cfg2 + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };

    const int rc1 = run_cli((base / "out1").string());
    const int rc2 = run_cli((base / "out2").string());
    if (rc1 != 0 || rc2 != 0) return {false, "train subcommand failed"};

    std::size_t compared = 0;
    for (const auto &entry : fs::directory_iterator(base / "out1")) {
        const std::string name = entry.path().filename().string();
        if (name.find(".csv") == std::string::npos) continue;
        std::ifstream a(entry.path(), std::ios::binary);
        std::ifstream b(base / "out2" / name, std::ios::binary);
        if (!b) return {false, "missing " + name + " in the second run"};
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        if (sa.str() != sb.str()) return {false, name + " differs between runs"};
        ++compared;
    }
    std::ostringstream d;
    d << compared << " CSVs byte-identical across two single-threaded runs";
    return {compared > 0, d.str()};
}

struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> fn;
};

} // namespace

int main(int argc, char **argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    const Criterion criteria[] = {
        {1, "w2-bound-dominance", criterion_w2_bound_dominance},
        {2, "trace-root-inequality", criterion_trace_inequality},
        {3, "kl-calibration", criterion_kl_calibration},
        {4, "gradient-suite", criterion_gradients},
        {5, "pseudolabel-oracle", criterion_pseudolabels},
        {6, "bivariate-convergence", criterion_bivariate},
        {7, "sinusoid-variance-recovery", criterion_sinusoid},
        {8, "multivariate-kl-comparison", criterion_multivariate},
        {9, "compute-cost-ordering", criterion_compute_cost},
        {10, "train-determinism", criterion_determinism},
    };

    bool all_pass = true;
    for (const Criterion &c : criteria) {
        if (!filter.empty() && std::string(c.name).find(filter) == std::string::npos) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception &e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  criterion-%02d %s  [%.1fs]  %s\n", outcome.pass ? "PASS" : "FAIL",
                    c.id, c.name, secs, outcome.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && outcome.pass;
    }
    std::printf("%s\n", all_pass ? "ACCEPTANCE: all criteria passed"
                                 : "ACCEPTANCE: FAILURES PRESENT");
    return all_pass ? 0 : 1;
}
