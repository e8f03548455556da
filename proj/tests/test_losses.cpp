#include <doctest.h>

#include <random>

#include "hetreg/losses.hpp"
#include "hetreg/train.hpp"
#include "hetreg/verify.hpp"

using namespace hetreg;

namespace {

// constant-input fixture: predictions are pure head parameters, so loss
// minimizers have closed forms
struct ConstantFixture {
    RegressionDataset ds;
    TrainLabels labels;

    ConstantFixture(std::size_t n_rows, std::size_t n, std::uint64_t seed,
                    const Matrix *prior = nullptr) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.5, 1.3);
        ds.inputs = Matrix(n_rows, 1, 0.0); // repeated observation
        ds.targets = Matrix(n_rows, n);
        for (double &v : ds.targets.data()) v = normal(rng);
        if (prior) {
            labels.prior.assign(n_rows, *prior);
            const Matrix root = spd_sqrt(SPDMatrix{Matrix(*prior)}).matrix();
            labels.prior_sqrt.assign(n_rows, root);
            const double ld = logdet_from_cholesky(cholesky(SPDMatrix{Matrix(*prior)}));
            labels.prior_logdet.assign(n_rows, ld);
        }
    }

    Matrix residual_covariance() const {
        const std::size_t n_rows = ds.size(), n = ds.target_dim();
        Vector mean(n, 0.0);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t c = 0; c < n; ++c) mean[c] += ds.targets(r, c) / n_rows;
        Matrix cov(n, n, 0.0);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    cov(a, b) +=
                        (ds.targets(r, a) - mean[a]) * (ds.targets(r, b) - mean[b]) / n_rows;
        return cov;
    }
};

TrainSpec constant_spec(LossKind loss, std::size_t epochs, double lr, std::uint64_t seed) {
    TrainSpec spec;
    spec.loss = loss;
    spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 0;
    spec.epochs = epochs;
    spec.batch = 0; // full batch
    spec.lr = lr;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("nll_full is zero at a perfect identity prediction") {
    const std::size_t n = 2;
    LossBatch batch;
    batch.x = Matrix(3, 1, 0.0);
    batch.y = Matrix(3, n, 0.25);

    const CovHead head{CovHeadKind::cholesky_full, n, 1e-6};
    MLPConfig mean_cfg{.input_dim = 1, .output_dim = n, .hidden_layers = 0, .hidden_width = 1,
                       .activation = Activation::tanh};
    MLPConfig cov_cfg = mean_cfg;
    cov_cfg.output_dim = head.raw_dim();
    MLPParams mean_params, cov_params;
    mean_params.weights.push_back(Matrix(1, n, 0.0));
    mean_params.biases.push_back(Vector(n, 0.25)); // predicts y exactly
    cov_params.weights.push_back(Matrix(1, head.raw_dim(), 0.0));
    cov_params.biases.push_back(Vector(head.raw_dim(), 0.0));
    set_head_bias_identity(head, cov_params);

    ad::Tape t;
    const NetRefs mean_net = bind_params(t, mean_cfg, mean_params);
    const NetRefs cov_net = bind_params(t, cov_cfg, cov_params);
    const double v = t.value_scalar(loss_nll_full(t, batch, mean_net, cov_net, head));
    // log|I| = 0 and zero residual, up to the 1e-6 diagonal floor
    CHECK(v == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("graph losses match the evaluation-path formulas on detached values") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = 3, rows = 5;

    TrainSpec spec;
    spec.loss = LossKind::nll_full();
    spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 1;
    spec.mean_arch.hidden_width = spec.cov_arch.hidden_width = 6;

    RegressionDataset ds;
    ds.inputs = Matrix(rows, 2);
    ds.targets = Matrix(rows, n);
    for (double &v : ds.inputs.data()) v = normal(rng);
    for (double &v : ds.targets.data()) v = normal(rng);
    const Predictor p = make_predictor(ds, spec);

    std::vector<std::size_t> all(rows);
    std::iota(all.begin(), all.end(), 0);
    const LossBatch batch = make_batch(ds, nullptr, all);

    ad::Tape t;
    const NetRefs mean_net = bind_params(t, p.mean_cfg, p.mean);
    const NetRefs cov_net = bind_params(t, p.cov_cfg, p.cov);
    const double graph_value =
        t.value_scalar(loss_nll_full(t, batch, mean_net, cov_net, p.head));

    double eval_value = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        eval_value += gaussian_nll(ds.targets.row_span(r), p.predict(ds.inputs.row_span(r)));
    eval_value /= static_cast<double>(rows);
    CHECK(graph_value == doctest::Approx(eval_value).epsilon(1e-10));
}

TEST_CASE("beta_nll boundary cases") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = 2, rows = 4;

    TrainSpec spec;
    spec.loss = LossKind::nll_diag();
    spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 1;
    spec.mean_arch.hidden_width = spec.cov_arch.hidden_width = 4;

    RegressionDataset ds;
    ds.inputs = Matrix(rows, 2);
    ds.targets = Matrix(rows, n);
    for (double &v : ds.inputs.data()) v = normal(rng);
    for (double &v : ds.targets.data()) v = normal(rng);
    const Predictor p = make_predictor(ds, spec);

    std::vector<std::size_t> all(rows);
    std::iota(all.begin(), all.end(), 0);
    const LossBatch batch = make_batch(ds, nullptr, all);

    auto value_of = [&](const LossKind &loss) {
        ad::Tape t;
        const NetRefs mean_net = bind_params(t, p.mean_cfg, p.mean);
        const NetRefs cov_net = bind_params(t, p.cov_cfg, p.cov);
        return t.value_scalar(build_loss(t, loss, batch, mean_net, cov_net, p.head));
    };
    // beta = 0 reduces exactly to the diagonal NLL
    CHECK(value_of(LossKind::beta_nll(0.0)) == value_of(LossKind::nll_diag()));

    // beta = 0.5: matches a hand-assembled expression on detached values
    const Matrix raw = mlp_value_forward(p.cov_cfg, p.cov, batch.x);
    const Matrix mu = mlp_value_forward(p.mean_cfg, p.mean, batch.x);
    double manual = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double var = softplus_value(raw(r, c)) + 1e-6;
            const double resid = batch.y(r, c) - mu(r, c);
            manual += std::pow(var, 0.5) * (std::log(var) + resid * resid / var);
        }
    manual /= static_cast<double>(rows);
    CHECK(value_of(LossKind::beta_nll(0.5)) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("beta_nll with unit variance equals nll_diag in value and gradient") {
    // sigma = 1 makes the stop-gradient factor exactly 1 at beta = 1
    const std::size_t n = 2, rows = 3;
    LossBatch batch;
    batch.x = Matrix(rows, 1, 0.0);
    batch.y = Matrix(rows, n, 0.6);

    const CovHead head{CovHeadKind::diagonal, n, 1e-6};
    MLPConfig mean_cfg{.input_dim = 1, .output_dim = n, .hidden_layers = 0, .hidden_width = 1,
                       .activation = Activation::tanh};
    MLPConfig cov_cfg = mean_cfg;
    cov_cfg.output_dim = head.raw_dim();
    MLPParams mean_params, cov_params;
    mean_params.weights.push_back(Matrix(1, n, 0.0));
    mean_params.biases.push_back(Vector(n, -0.1));
    cov_params.weights.push_back(Matrix(1, head.raw_dim(), 0.0));
    cov_params.biases.push_back(Vector(head.raw_dim(), softplus_inverse(1.0 - 1e-6)));

    auto eval = [&](const LossKind &loss, std::vector<Vector> &mean_grads) {
        ad::Tape t;
        const NetRefs mean_net = bind_params(t, mean_cfg, mean_params);
        const NetRefs cov_net = bind_params(t, cov_cfg, cov_params);
        const ad::Ref l = build_loss(t, loss, batch, mean_net, cov_net, head);
        t.backward(l);
        collect_grads(t, mean_net, mean_grads);
        return t.value_scalar(l);
    };
    std::vector<Vector> g1, g2;
    const double v1 = eval(LossKind::beta_nll(1.0), g1);
    const double v2 = eval(LossKind::nll_diag(), g2);
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
    for (std::size_t tensor = 0; tensor < g1.size(); ++tensor)
        for (std::size_t i = 0; i < g1[tensor].size(); ++i)
            CHECK(g1[tensor][i] == doctest::Approx(g2[tensor][i]).epsilon(1e-12));
}

TEST_CASE("faithful covariance converges to the residual covariance") {
    const ConstantFixture fx(48, 2, 101);
    TrainSpec spec = constant_spec(LossKind::faithful(), 1200, 0.03, 7);
    const TrainResult result = train(fx.ds, nullptr, spec);

    const Gaussian pred = result.predictor.predict(Vector{0.0});
    const Matrix expected = fx.residual_covariance();
    CHECK(frobenius_distance(pred.cov.matrix(), expected) <=
          0.02 * (1.0 + frobenius_norm(expected)));
}

TEST_CASE("calibrated KL covariance converges to the prior/residual average") {
    std::mt19937_64 rng(31);
    const Matrix prior = verify::random_spd_matrix(2, rng);
    const ConstantFixture fx(48, 2, 102, &prior);
    TrainSpec spec = constant_spec(LossKind::kl_calibrated(), 1500, 0.03, 7);
    const TrainResult result = train(fx.ds, &fx.labels, spec);

    const Gaussian pred = result.predictor.predict(Vector{0.0});
    const Matrix expected = 0.5 * (prior + fx.residual_covariance());
    CHECK(frobenius_distance(pred.cov.matrix(), expected) <=
          0.02 * (1.0 + frobenius_norm(expected)));
}

TEST_CASE("kl_calibrated identity case reproduces -k/4") {
    const std::size_t n = 3;
    LossBatch batch;
    batch.x = Matrix(2, 1, 0.0);
    batch.y = Matrix(2, n, 0.5);
    const Matrix prior = Matrix::identity(n);
    batch.prior = {&prior, &prior};
    batch.prior_logdet = {0.0, 0.0};

    const CovHead head{CovHeadKind::cholesky_full, n, 1e-6};
    MLPConfig mean_cfg{.input_dim = 1, .output_dim = n, .hidden_layers = 0, .hidden_width = 1,
                       .activation = Activation::tanh};
    MLPConfig cov_cfg = mean_cfg;
    cov_cfg.output_dim = head.raw_dim();
    MLPParams mean_params, cov_params;
    mean_params.weights.push_back(Matrix(1, n, 0.0));
    mean_params.biases.push_back(Vector(n, 0.5)); // y = mu
    cov_params.weights.push_back(Matrix(1, head.raw_dim(), 0.0));
    cov_params.biases.push_back(Vector(head.raw_dim(), 0.0));
    set_head_bias_identity(head, cov_params);

    ad::Tape t;
    const NetRefs mean_net = bind_params(t, mean_cfg, mean_params);
    const NetRefs cov_net = bind_params(t, cov_cfg, cov_params);
    const double v = t.value_scalar(loss_kl_calibrated(t, batch, mean_net, cov_net, head));
    CHECK(v == doctest::Approx(-0.75).epsilon(1e-5)); // -k/4 with k = 3
}

TEST_CASE("w2_bound loss is zero at the labels and keeps the mean term separable") {
    const std::size_t n = 2, rows = 3;
    LossBatch batch;
    batch.x = Matrix(rows, 1, 0.0);
    batch.y = Matrix(rows, n, 1.5);
    const Matrix root = Matrix::from_rows({{1.2, 0.3}, {0.3, 0.8}});
    batch.prior_sqrt = {&root, &root, &root};

    const CovHead head{CovHeadKind::sym_sqrt, n, 1e-6};
    MLPConfig mean_cfg{.input_dim = 1, .output_dim = n, .hidden_layers = 0, .hidden_width = 1,
                       .activation = Activation::tanh};
    MLPConfig cov_cfg = mean_cfg;
    cov_cfg.output_dim = head.raw_dim();
    MLPParams mean_params, cov_params;
    mean_params.weights.push_back(Matrix(1, n, 0.0));
    mean_params.biases.push_back(Vector(n, 1.5)); // mu = y
    cov_params.weights.push_back(Matrix(1, head.raw_dim(), 0.0));
    cov_params.biases.push_back(root.data()); // S = label root

    ad::Tape t;
    const NetRefs mean_net = bind_params(t, mean_cfg, mean_params);
    const NetRefs cov_net = bind_params(t, cov_cfg, cov_params);
    CHECK(t.value_scalar(loss_w2_bound(t, batch, mean_net, cov_net, head)) ==
          doctest::Approx(0.0));
}

TEST_CASE("losses require matching heads and labels") {
    const std::size_t n = 2;
    LossBatch batch;
    batch.x = Matrix(2, 1, 0.0);
    batch.y = Matrix(2, n, 0.0);
    const CovHead wrong{CovHeadKind::diagonal, n, 1e-6};
    MLPConfig cfg{.input_dim = 1, .output_dim = n, .hidden_layers = 0, .hidden_width = 1,
                  .activation = Activation::tanh};
    MLPParams params;
    params.weights.push_back(Matrix(1, n, 0.0));
    params.biases.push_back(Vector(n, 0.0));

    ad::Tape t;
    const NetRefs net = bind_params(t, cfg, params);
    CHECK_THROWS_AS((void)loss_nll_full(t, batch, net, net, wrong), Error);
    const CovHead sym{CovHeadKind::sym_sqrt, n, 1e-6};
    CHECK_THROWS_AS((void)loss_w2_bound(t, batch, net, net, sym), Error); // no labels
}
