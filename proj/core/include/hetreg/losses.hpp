#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "hetreg/adamw.hpp"
#include "hetreg/dataset.hpp"
#include "hetreg/mlp.hpp"
#include "hetreg/pseudolabel.hpp"

namespace hetreg {

struct LossKind {
    enum class Kind : int {
        nll_full = 0,
        nll_diag = 1,
        beta_nll = 2,
        faithful = 3,
        kl_calibrated = 4,
        w2_bound = 5,
    };

    Kind kind = Kind::nll_full;
    double beta = 0.5; // beta_nll only, in [0, 1]

    static LossKind nll_full() { return {Kind::nll_full, 0.0}; }
    static LossKind nll_diag() { return {Kind::nll_diag, 0.0}; }
    static LossKind beta_nll(double beta) { return {Kind::beta_nll, beta}; }
    static LossKind faithful() { return {Kind::faithful, 0.0}; }
    static LossKind kl_calibrated() { return {Kind::kl_calibrated, 0.0}; }
    static LossKind w2_bound() { return {Kind::w2_bound, 0.0}; }

    int code() const { return static_cast<int>(kind); }
    bool needs_prior() const { return kind == Kind::kl_calibrated; }
    bool needs_prior_sqrt() const { return kind == Kind::w2_bound; }
};

const char *to_string(LossKind::Kind kind);
std::optional<LossKind::Kind> loss_kind_from_string(const std::string &name);

/// Covariance head implied by the objective.
CovHeadKind head_for(const LossKind &loss);

struct Schedule {
    enum class Kind : int { standard = 0, warmup = 1, hybrid = 2 };

    Kind kind = Kind::standard;
    double mean_only_fraction = 0.5;          // warmup
    std::size_t switch_epoch = 0;             // hybrid
    LossKind then = LossKind::nll_full();     // hybrid target objective

    int code() const { return static_cast<int>(kind); }
    static Schedule standard() { return {}; }
    static Schedule warmup(double fraction = 0.5);
    static Schedule hybrid(std::size_t switch_epoch, LossKind then);
};

const char *to_string(Schedule::Kind kind);

/// Per-row covariance priors consumed by the supervised objectives. Built
/// once, ahead of training, so no matrix roots are taken inside the loop.
struct TrainLabels {
    std::vector<Matrix> prior;        // target covariance per row
    std::vector<Matrix> prior_sqrt;   // its PSD square root
    std::vector<double> prior_logdet; // NaN when the prior is singular
};

TrainLabels labels_from_pseudo(const PseudoLabelSet &labels);
TrainLabels labels_from_ground_truth(const RegressionDataset &ds);

/// One minibatch view handed to the loss builders.
struct LossBatch {
    Matrix x; // B x m
    Matrix y; // B x n
    std::vector<const Matrix *> prior;
    std::vector<const Matrix *> prior_sqrt;
    std::vector<double> prior_logdet;

    std::size_t size() const noexcept { return x.rows(); }
};

LossBatch make_batch(const RegressionDataset &ds, const TrainLabels *labels,
                     std::span<const std::size_t> rows);

// Objective builders. Each returns the scalar batch-mean loss node.
ad::Ref loss_nll_full(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head);
ad::Ref loss_nll_diag(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head);
ad::Ref loss_beta_nll(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head, double beta);
ad::Ref loss_faithful(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head);
ad::Ref loss_kl_calibrated(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                           const NetRefs &cov_net, const CovHead &head);
ad::Ref loss_w2_bound(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head);
/// Mean-only phase of the warm-up schedule.
ad::Ref loss_mse(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net);

ad::Ref build_loss(ad::Tape &t, const LossKind &loss, const LossBatch &b,
                   const NetRefs &mean_net, const NetRefs &cov_net, const CovHead &head);

} // namespace hetreg
