#include "hetreg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "hetreg/alloc_counter.hpp"

namespace hetreg {

namespace {

SPDMatrix ensure_strict_pd(const SPDMatrix &cov) {
    try {
        cholesky(cov);
        return cov;
    } catch (const NotPositiveDefinite &) {
        double floor = ridge_floor(cov.trace(), cov.dim());
        if (!(floor > 0.0)) floor = 1e-12;
        Matrix m = cov.matrix();
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += floor;
        return SPDMatrix(std::move(m));
    }
}

} // namespace

Gaussian Predictor::predict(std::span<const double> x) const {
    const Matrix xr = Matrix::from_row(x);
    const Matrix mu = mlp_value_forward(mean_cfg, mean, xr);
    const Matrix raw = mlp_value_forward(cov_cfg, cov, xr);
    return Gaussian(mu.row_vec(0), head_covariance(head, raw.row_span(0)));
}

SqrtGaussian Predictor::predict_sqrt(std::span<const double> x) const {
    const Matrix xr = Matrix::from_row(x);
    const Matrix mu = mlp_value_forward(mean_cfg, mean, xr);
    const Matrix raw = mlp_value_forward(cov_cfg, cov, xr);
    return SqrtGaussian(mu.row_vec(0), head_sqrt_factor(head, raw.row_span(0)));
}

MetricsRecord evaluate(const Predictor &p, const RegressionDataset &ds, unsigned metrics) {
    ds.validate();
    const bool needs_gt = (metrics & (kMetricKl | kMetricW2)) != 0;
    if (needs_gt && !ds.ground_truth)
        throw MissingGroundTruth("KL/W2 metrics need per-row target distributions");

    const Matrix mu = mlp_value_forward(p.mean_cfg, p.mean, ds.inputs);
    const Matrix raw = mlp_value_forward(p.cov_cfg, p.cov, ds.inputs);
    const std::size_t n_rows = ds.size();

    double mse = 0.0, nll = 0.0, kl = 0.0, w2 = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (metrics & kMetricMse)
            mse += squared_distance(ds.targets.row_span(r), mu.row_span(r));
        if (metrics & (kMetricNll | kMetricKl | kMetricW2)) {
            Gaussian pred(mu.row_vec(r), head_covariance(p.head, raw.row_span(r)));
            if (metrics & (kMetricNll | kMetricKl)) {
                const Gaussian pred_pd(pred.mean, ensure_strict_pd(pred.cov));
                if (metrics & kMetricNll) nll += gaussian_nll(ds.targets.row_span(r), pred_pd);
                if (metrics & kMetricKl) kl += kl_divergence((*ds.ground_truth)[r], pred_pd);
            }
            if (metrics & kMetricW2) w2 += w2_exact((*ds.ground_truth)[r], pred);
        }
    }

    const double inv = 1.0 / static_cast<double>(n_rows);
    MetricsRecord out;
    if (metrics & kMetricMse) out.mse = mse * inv;
    if (metrics & kMetricNll) out.nll = nll * inv;
    if (metrics & kMetricKl) out.kl = kl * inv;
    if (metrics & kMetricW2) out.w2 = w2 * inv;
    return out;
}

void write_metrics_csv(const std::string &path, const MetricsLog &log) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "epoch,loss_kind,schedule,mse,nll,kl,w2,step_time_ms,peak_bytes\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << ',' << buf;
    };
    for (const EpochMetrics &em : log.epochs) {
        f << em.epoch << ',' << log.loss.code() << ',' << log.schedule.code();
        put(em.record.mse);
        put(em.record.nll);
        put(em.record.kl);
        put(em.record.w2);
        put(em.step_time_ms);
        f << ',' << em.peak_bytes << "\n";
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

Predictor make_predictor(const RegressionDataset &ds, const TrainSpec &spec) {
    Predictor p;
    p.mean_cfg = spec.mean_arch;
    p.mean_cfg.input_dim = ds.input_dim();
    p.mean_cfg.output_dim = ds.target_dim();
    p.head = CovHead{head_for(spec.loss), ds.target_dim(), 1e-6};
    p.cov_cfg = spec.cov_arch;
    p.cov_cfg.input_dim = ds.input_dim();
    p.cov_cfg.output_dim = p.head.raw_dim();

    std::mt19937_64 rng(spec.seed);
    p.mean = init_mlp(p.mean_cfg, rng);
    p.cov = init_mlp(p.cov_cfg, rng);
    set_head_bias_identity(p.head, p.cov);
    return p;
}

namespace {

struct BoundOptimizer {
    AdamW opt;
    std::vector<std::size_t> mean_slots;
    std::vector<std::size_t> cov_slots;
};

void register_net(AdamW &opt, const MLPParams &params, std::vector<std::size_t> &slots) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        slots.push_back(opt.register_tensor(params.weights[l].size()));
        slots.push_back(opt.register_tensor(params.biases[l].size()));
    }
}

void apply_updates(AdamW &opt, const ad::Tape &tape, const NetRefs &net, MLPParams &params,
                   const std::vector<std::size_t> &slots) {
    std::size_t s = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        opt.update(slots[s++], params.weights[l].data(), tape.grad(net.weights[l]));
        opt.update(slots[s++], params.biases[l], tape.grad(net.biases[l]));
    }
}

// Warm transfer at the hybrid switch: square the average sym_sqrt prediction
// over a calibration batch into a Cholesky factor and start the NLL-phase
// head there (zeroed final weights, bias carrying the factor).
void convert_sym_head_to_cholesky(Predictor &p, const RegressionDataset &ds,
                                  const TrainSpec &spec, const LossKind &then_loss,
                                  BoundOptimizer &bound) {
    if (p.head.kind != CovHeadKind::sym_sqrt)
        throw Error("hybrid conversion expects a sym_sqrt first phase");
    const std::size_t n = p.head.dim;
    const std::size_t cal = std::min<std::size_t>(ds.size(), 256);
    std::vector<std::size_t> rows(cal);
    std::iota(rows.begin(), rows.end(), 0);
    const RegressionDataset cal_ds = ds.rows_subset(rows);
    const Matrix raw = mlp_value_forward(p.cov_cfg, p.cov, cal_ds.inputs);

    Matrix avg_sqrt(n, n, 0.0);
    for (std::size_t r = 0; r < cal; ++r) {
        const Matrix s = head_sqrt_factor(p.head, raw.row_span(r));
        for (std::size_t e = 0; e < n * n; ++e) avg_sqrt.data()[e] += s.data()[e];
    }
    for (double &v : avg_sqrt.data()) v /= static_cast<double>(cal);

    Matrix sigma0 = avg_sqrt * avg_sqrt;
    double delta = std::max(ridge_floor(trace(sigma0), n), 1e-12);
    for (std::size_t i = 0; i < n; ++i) sigma0(i, i) += delta;
    const Matrix l0 = cholesky(SPDMatrix(symmetrized(sigma0)));

    const CovHead new_head{head_for(then_loss), n, 1e-6};
    if (new_head.kind != CovHeadKind::cholesky_full)
        throw Error("hybrid switch targets a cholesky-headed objective");
    p.head = new_head;
    p.cov_cfg.output_dim = new_head.raw_dim();

    std::mt19937_64 rng(spec.seed ^ 0x5ca1ab1e5eedULL);
    p.cov = init_mlp(p.cov_cfg, rng);
    for (double &v : p.cov.weights.back().data()) v = 0.0;
    Vector &bias = p.cov.biases.back();
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            bias[flat++] = i == j ? softplus_inverse(std::max(l0(i, i) - new_head.floor, 1e-9))
                                  : l0(i, j);
        }

    std::size_t s = 0;
    for (std::size_t l = 0; l < p.cov.weights.size(); ++l) {
        bound.opt.replace_tensor(bound.cov_slots[s++], p.cov.weights[l].size());
        bound.opt.replace_tensor(bound.cov_slots[s++], p.cov.biases[l].size());
    }
}

} // namespace

TrainResult train(const RegressionDataset &ds, const TrainLabels *labels, const TrainSpec &spec,
                  const TrainOptions &options) {
    ds.validate();
    const std::size_t n_rows = ds.size();

    TrainResult result;
    result.predictor = options.initial ? *options.initial : make_predictor(ds, spec);
    Predictor &p = result.predictor;
    MetricsLog &log = result.log;
    log.loss = spec.loss;
    log.schedule = spec.schedule;

    auto check_labels = [&](const LossKind &loss) {
        if ((loss.needs_prior() || loss.needs_prior_sqrt()) && !labels)
            throw Error(std::string(to_string(loss.kind)) + " requires covariance labels");
    };
    check_labels(spec.loss);
    if (spec.schedule.kind == Schedule::Kind::hybrid) check_labels(spec.schedule.then);

    BoundOptimizer bound{AdamW(AdamWConfig{.lr = spec.lr}), {}, {}};
    register_net(bound.opt, p.mean, bound.mean_slots);
    register_net(bound.opt, p.cov, bound.cov_slots);

    const RegressionDataset &eval_ds = options.eval_ds ? *options.eval_ds : ds;
    unsigned eval_metrics = options.eval_metrics;
    if (!eval_ds.ground_truth) eval_metrics &= ~(kMetricKl | kMetricW2);

    const std::size_t batch_size =
        spec.batch == 0 ? n_rows : std::min<std::size_t>(spec.batch, n_rows);
    const std::size_t warm_epochs =
        spec.schedule.kind == Schedule::Kind::warmup
            ? static_cast<std::size_t>(std::ceil(spec.schedule.mean_only_fraction *
                                                 static_cast<double>(spec.epochs)))
            : 0;

    LossKind active = spec.loss;
    bool converted = false;
    std::size_t global_step = 0;

    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> batch_rows;

    for (std::size_t e = 0; e < spec.epochs && !log.diverged; ++e) {
        const bool mean_only = spec.schedule.kind == Schedule::Kind::warmup && e < warm_epochs;
        if (spec.schedule.kind == Schedule::Kind::hybrid && !converted &&
            e >= spec.schedule.switch_epoch) {
            convert_sym_head_to_cholesky(p, ds, spec, spec.schedule.then, bound);
            active = spec.schedule.then;
            converted = true;
        }

        std::mt19937_64 perm_rng(spec.seed ^ (0x9E3779B97F4A7C15ULL * (e + 1)));
        std::shuffle(perm.begin(), perm.end(), perm_rng);

        double step_ms_sum = 0.0;
        std::uint64_t peak = 0;
        std::size_t steps = 0;

        for (std::size_t offset = 0; offset < n_rows; offset += batch_size) {
            const std::size_t take = std::min(batch_size, n_rows - offset);
            batch_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                              perm.begin() + static_cast<std::ptrdiff_t>(offset + take));
            LossBatch batch = make_batch(ds, labels, batch_rows);

            alloctrack::PeakScope peak_scope;
            const auto t0 = std::chrono::steady_clock::now();

            ad::Tape tape;
            NetRefs mean_net = bind_params(tape, p.mean_cfg, p.mean);
            NetRefs cov_net = bind_params(tape, p.cov_cfg, p.cov);
            ad::Ref loss = mean_only ? loss_mse(tape, batch, mean_net)
                                     : build_loss(tape, active, batch, mean_net, cov_net, p.head);
            const double loss_value = tape.value_scalar(loss);
            if (!std::isfinite(loss_value)) {
                log.diverged = true;
                log.diverged_epoch = e;
                break;
            }
            tape.backward(loss);
            bound.opt.begin_step();
            apply_updates(bound.opt, tape, mean_net, p.mean, bound.mean_slots);
            if (!mean_only) apply_updates(bound.opt, tape, cov_net, p.cov, bound.cov_slots);

            if (options.timing) {
                const auto t1 = std::chrono::steady_clock::now();
                step_ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            peak = std::max<std::uint64_t>(
                peak, static_cast<std::uint64_t>(peak_scope.delta()));
            ++steps;
            ++global_step;
            if (options.on_step) options.on_step(global_step, p);
        }

        const bool last = e + 1 == spec.epochs;
        if (!log.diverged &&
            (e % std::max<std::size_t>(options.eval_every, 1) == 0 || last)) {
            EpochMetrics em;
            em.epoch = e;
            try {
                em.record = evaluate(p, eval_ds, eval_metrics);
            } catch (const Error &) {
                // overflowing estimator: treat like a divergence, keep the log
                log.diverged = true;
                log.diverged_epoch = e;
                break;
            }
            em.step_time_ms = steps > 0 ? step_ms_sum / static_cast<double>(steps) : 0.0;
            em.peak_bytes = peak;
            log.epochs.push_back(em);
        }
    }
    return result;
}

} // namespace hetreg
