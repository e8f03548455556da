#pragma once

#include "hetreg/losses.hpp"

namespace hetreg {

/// Mean and covariance estimators plus the head that interprets the raw
/// covariance outputs.
struct Predictor {
    MLPConfig mean_cfg;
    MLPConfig cov_cfg;
    CovHead head;
    MLPParams mean;
    MLPParams cov;

    Gaussian predict(std::span<const double> x) const;
    /// sym_sqrt head only; the factor consumed by the Wasserstein bound.
    SqrtGaussian predict_sqrt(std::span<const double> x) const;
};

enum MetricFlag : unsigned {
    kMetricMse = 1u,
    kMetricNll = 2u,
    kMetricKl = 4u,
    kMetricW2 = 8u,
    kMetricAll = 15u,
};

struct MetricsRecord {
    double mse = std::numeric_limits<double>::quiet_NaN();
    double nll = std::numeric_limits<double>::quiet_NaN();
    double kl = std::numeric_limits<double>::quiet_NaN();
    double w2 = std::numeric_limits<double>::quiet_NaN();
};

/// Dataset averages of the requested metrics. KL and W2 compare against the
/// per-row ground truth and throw MissingGroundTruth without it. Evaluation
/// may (and does) use eigendecompositions; they stay out of training.
MetricsRecord evaluate(const Predictor &p, const RegressionDataset &ds,
                       unsigned metrics = kMetricAll);

struct EpochMetrics {
    std::size_t epoch = 0;
    MetricsRecord record;
    double step_time_ms = 0.0;
    std::uint64_t peak_bytes = 0;
};

struct MetricsLog {
    LossKind loss;
    Schedule schedule;
    std::vector<EpochMetrics> epochs;
    bool diverged = false;
    std::size_t diverged_epoch = 0;
};

/// CSV schema: epoch,loss_kind,schedule,mse,nll,kl,w2,step_time_ms,peak_bytes
/// with loss_kind/schedule as integer codes so the file stays numeric.
void write_metrics_csv(const std::string &path, const MetricsLog &log);

struct TrainSpec {
    LossKind loss;
    Schedule schedule;
    MLPConfig mean_arch; // input/output dims are derived from the data
    MLPConfig cov_arch;
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch = 64; // 0 = full batch
    std::uint64_t seed = 1;
    std::size_t pseudo_k = 0; // 0 = ten times the target dimensionality
};

struct TrainOptions {
    bool timing = false;
    const RegressionDataset *eval_ds = nullptr; // metrics dataset; nullptr = training data
    unsigned eval_metrics = kMetricAll;
    std::size_t eval_every = 1; // epochs between metric rows
    std::optional<Predictor> initial;
    /// Called after every optimizer step with the live estimators.
    std::function<void(std::size_t step, const Predictor &)> on_step;
};

struct TrainResult {
    Predictor predictor;
    MetricsLog log;
};

/// Builds the estimators per the spec seed (or options.initial), then runs
/// AdamW over shuffled minibatches with the requested schedule. A non-finite
/// loss aborts the run, keeping the partial log. The batch permutation
/// depends only on (seed, epoch), so runs with different objectives but one
/// seed consume identical batches.
TrainResult train(const RegressionDataset &ds, const TrainLabels *labels, const TrainSpec &spec,
                  const TrainOptions &options = {});

/// Fresh estimators for a dataset/objective pair: Glorot weights from the
/// seed, covariance head biased to start at the identity.
Predictor make_predictor(const RegressionDataset &ds, const TrainSpec &spec);

} // namespace hetreg
