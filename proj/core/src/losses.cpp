#include "hetreg/losses.hpp"

#include <cmath>
#include <limits>

namespace hetreg {

const char *to_string(LossKind::Kind kind) {
    switch (kind) {
    case LossKind::Kind::nll_full: return "nll_full";
    case LossKind::Kind::nll_diag: return "nll_diag";
    case LossKind::Kind::beta_nll: return "beta_nll";
    case LossKind::Kind::faithful: return "faithful";
    case LossKind::Kind::kl_calibrated: return "kl_calibrated";
    case LossKind::Kind::w2_bound: return "w2_bound";
    }
    return "?";
}

std::optional<LossKind::Kind> loss_kind_from_string(const std::string &name) {
    for (int k = 0; k <= 5; ++k) {
        const auto kind = static_cast<LossKind::Kind>(k);
        if (name == to_string(kind)) return kind;
    }
    return std::nullopt;
}

CovHeadKind head_for(const LossKind &loss) {
    switch (loss.kind) {
    case LossKind::Kind::w2_bound: return CovHeadKind::sym_sqrt;
    case LossKind::Kind::nll_diag:
    case LossKind::Kind::beta_nll: return CovHeadKind::diagonal;
    default: return CovHeadKind::cholesky_full;
    }
}

Schedule Schedule::warmup(double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("warmup fraction must be in (0,1)");
    Schedule s;
    s.kind = Kind::warmup;
    s.mean_only_fraction = fraction;
    return s;
}

Schedule Schedule::hybrid(std::size_t switch_epoch, LossKind then) {
    Schedule s;
    s.kind = Kind::hybrid;
    s.switch_epoch = switch_epoch;
    s.then = then;
    return s;
}

const char *to_string(Schedule::Kind kind) {
    switch (kind) {
    case Schedule::Kind::standard: return "standard";
    case Schedule::Kind::warmup: return "warmup";
    case Schedule::Kind::hybrid: return "hybrid";
    }
    return "?";
}

namespace {

double logdet_or_nan(const Matrix &cov) {
    // plain lower-triangular factorization; NaN flags a singular prior
    const std::size_t n = cov.rows();
    Matrix l(n, n, 0.0);
    double logdet = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = cov(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        l(j, j) = std::sqrt(d);
        logdet += std::log(l(j, j));
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = cov(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return 2.0 * logdet;
}

} // namespace

TrainLabels labels_from_pseudo(const PseudoLabelSet &labels) {
    TrainLabels out;
    out.prior.reserve(labels.size());
    out.prior_sqrt.reserve(labels.size());
    out.prior_logdet.reserve(labels.size());
    for (const PseudoLabel &pl : labels.rows) {
        out.prior.push_back(pl.cov.matrix());
        out.prior_sqrt.push_back(pl.sqrt_cov.matrix());
        out.prior_logdet.push_back(logdet_or_nan(pl.cov.matrix()));
    }
    return out;
}

TrainLabels labels_from_ground_truth(const RegressionDataset &ds) {
    if (!ds.ground_truth) throw MissingGroundTruth("dataset carries no target distributions");
    TrainLabels out;
    out.prior.reserve(ds.size());
    out.prior_sqrt.reserve(ds.size());
    out.prior_logdet.reserve(ds.size());
    for (const Gaussian &g : *ds.ground_truth) {
        out.prior.push_back(g.cov.matrix());
        out.prior_sqrt.push_back(spd_sqrt(g.cov).matrix());
        out.prior_logdet.push_back(logdet_or_nan(g.cov.matrix()));
    }
    return out;
}

LossBatch make_batch(const RegressionDataset &ds, const TrainLabels *labels,
                     std::span<const std::size_t> rows) {
    LossBatch b;
    b.x = Matrix(rows.size(), ds.input_dim());
    b.y = Matrix(rows.size(), ds.target_dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < ds.input_dim(); ++c) b.x(r, c) = ds.inputs(rows[r], c);
        for (std::size_t c = 0; c < ds.target_dim(); ++c) b.y(r, c) = ds.targets(rows[r], c);
    }
    if (labels) {
        b.prior.reserve(rows.size());
        b.prior_sqrt.reserve(rows.size());
        b.prior_logdet.reserve(rows.size());
        for (std::size_t row : rows) {
            b.prior.push_back(&labels->prior[row]);
            b.prior_sqrt.push_back(&labels->prior_sqrt[row]);
            b.prior_logdet.push_back(labels->prior_logdet[row]);
        }
    }
    return b;
}

namespace {

struct Forwarded {
    ad::Ref y;        // constant targets
    ad::Ref mu;       // B x n mean predictions
    ad::Ref cov_raw;  // B x raw_dim covariance head inputs
};

Forwarded forward_nets(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                       const NetRefs &cov_net) {
    ad::Ref x = t.constant(b.x);
    Forwarded f;
    f.y = t.constant(b.y);
    f.mu = mlp_forward(t, mean_net, x);
    f.cov_raw = mlp_forward(t, cov_net, x);
    return f;
}

ad::Ref batch_mean_of(ad::Tape &t, const std::vector<ad::Ref> &terms, std::size_t batch) {
    ad::Ref total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = t.add(total, terms[i]);
    return t.scale(total, 1.0 / static_cast<double>(batch));
}

ad::Ref chol_factor_of_row(ad::Tape &t, ad::Ref cov_raw, std::size_t i, const CovHead &head) {
    ad::Ref packed = t.softplus_diag_packed(t.row(cov_raw, i), head.dim, head.floor);
    return t.lower_from_packed(packed, head.dim);
}

ad::Ref diag_variances(ad::Tape &t, ad::Ref cov_raw, const CovHead &head) {
    return t.add_scalar(t.softplus_op(cov_raw), head.floor);
}

// sum_i [log sigma_i^2 + r_i^2 / sigma_i^2] per element, batched
ad::Ref diag_nll_elements(ad::Tape &t, ad::Ref residual, ad::Ref variances) {
    return t.add(t.log_op(variances), t.divide(t.square_op(residual), variances));
}

} // namespace

ad::Ref loss_nll_full(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head) {
    if (head.kind != CovHeadKind::cholesky_full) throw Error("nll_full needs the cholesky head");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    ad::Ref residual = t.sub(f.y, f.mu);
    std::vector<ad::Ref> terms;
    terms.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        ad::Ref l = chol_factor_of_row(t, f.cov_raw, i, head);
        terms.push_back(
            t.add(t.logdet_from_chol(l), t.quadratic_form(t.row(residual, i), l)));
    }
    return batch_mean_of(t, terms, b.size());
}

ad::Ref loss_nll_diag(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head) {
    if (head.kind != CovHeadKind::diagonal) throw Error("nll_diag needs the diagonal head");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    ad::Ref residual = t.sub(f.y, f.mu);
    ad::Ref var = diag_variances(t, f.cov_raw, head);
    ad::Ref elems = diag_nll_elements(t, residual, var);
    return t.scale(t.reduce_sum(elems), 1.0 / static_cast<double>(b.size()));
}

ad::Ref loss_beta_nll(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head, double beta) {
    if (head.kind != CovHeadKind::diagonal) throw Error("beta_nll needs the diagonal head");
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must be in [0,1]");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    ad::Ref residual = t.sub(f.y, f.mu);
    ad::Ref var = diag_variances(t, f.cov_raw, head);
    ad::Ref elems = diag_nll_elements(t, residual, var);
    // sigma^{2*beta}, detached, per dimension
    ad::Ref factor = t.stop_gradient(t.exp_op(t.scale(t.log_op(var), beta)));
    return t.scale(t.reduce_sum(t.mul(factor, elems)), 1.0 / static_cast<double>(b.size()));
}

ad::Ref loss_faithful(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head) {
    if (head.kind != CovHeadKind::cholesky_full) throw Error("faithful needs the cholesky head");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    ad::Ref mse = t.scale(t.frobenius_sq(t.sub(f.y, f.mu)), 1.0 / static_cast<double>(b.size()));
    // covariance fits residuals of the detached mean, so the mean network
    // sees exactly the MSE gradient
    ad::Ref detached_residual = t.sub(f.y, t.stop_gradient(f.mu));
    std::vector<ad::Ref> terms;
    terms.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        ad::Ref l = chol_factor_of_row(t, f.cov_raw, i, head);
        terms.push_back(
            t.add(t.logdet_from_chol(l), t.quadratic_form(t.row(detached_residual, i), l)));
    }
    return t.add(mse, batch_mean_of(t, terms, b.size()));
}

ad::Ref loss_kl_calibrated(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                           const NetRefs &cov_net, const CovHead &head) {
    if (head.kind != CovHeadKind::cholesky_full)
        throw Error("kl_calibrated needs the cholesky head");
    if (b.prior.size() != b.size()) throw Error("kl_calibrated needs per-sample priors");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    ad::Ref residual = t.sub(f.mu, f.y);
    const double k = static_cast<double>(head.dim);
    std::vector<ad::Ref> terms;
    terms.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (std::isnan(b.prior_logdet[i]))
            throw DegenerateDistribution("calibrated KL prior is singular");
        ad::Ref l = chol_factor_of_row(t, f.cov_raw, i, head);
        ad::Ref tr = t.trace_solve(l, *b.prior[i]);
        ad::Ref quad = t.quadratic_form(t.row(residual, i), l);
        ad::Ref ld = t.logdet_from_chol(l);
        // 0.5 * [ (tr + quad)/2 - k + logdet(pred) - logdet(prior) ]
        ad::Ref term = t.add(t.scale(t.add(tr, quad), 0.25), t.scale(ld, 0.5));
        terms.push_back(t.add_scalar(term, -0.5 * (k + b.prior_logdet[i])));
    }
    return batch_mean_of(t, terms, b.size());
}

ad::Ref loss_w2_bound(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net,
                      const NetRefs &cov_net, const CovHead &head) {
    if (head.kind != CovHeadKind::sym_sqrt) throw Error("w2_bound needs the sym_sqrt head");
    if (b.prior_sqrt.size() != b.size()) throw Error("w2_bound needs per-sample sqrt labels");
    const Forwarded f = forward_nets(t, b, mean_net, cov_net);
    const std::size_t n = head.dim;

    ad::Ref mean_term =
        t.scale(t.frobenius_sq(t.sub(f.y, f.mu)), 1.0 / static_cast<double>(b.size()));

    Matrix target_sqrt(b.size(), n * n);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t e = 0; e < n * n; ++e) target_sqrt(i, e) = b.prior_sqrt[i]->data()[e];
    ad::Ref pred_sqrt = t.symmetrize_rows(f.cov_raw, n);
    ad::Ref cov_term = t.scale(t.frobenius_sq(t.sub(pred_sqrt, t.constant(target_sqrt))),
                               1.0 / static_cast<double>(b.size()));
    return t.add(mean_term, cov_term);
}

ad::Ref loss_mse(ad::Tape &t, const LossBatch &b, const NetRefs &mean_net) {
    ad::Ref x = t.constant(b.x);
    ad::Ref y = t.constant(b.y);
    ad::Ref mu = mlp_forward(t, mean_net, x);
    return t.scale(t.frobenius_sq(t.sub(y, mu)), 1.0 / static_cast<double>(b.size()));
}

ad::Ref build_loss(ad::Tape &t, const LossKind &loss, const LossBatch &b,
                   const NetRefs &mean_net, const NetRefs &cov_net, const CovHead &head) {
    switch (loss.kind) {
    case LossKind::Kind::nll_full: return loss_nll_full(t, b, mean_net, cov_net, head);
    case LossKind::Kind::nll_diag: return loss_nll_diag(t, b, mean_net, cov_net, head);
    case LossKind::Kind::beta_nll: return loss_beta_nll(t, b, mean_net, cov_net, head, loss.beta);
    case LossKind::Kind::faithful: return loss_faithful(t, b, mean_net, cov_net, head);
    case LossKind::Kind::kl_calibrated: return loss_kl_calibrated(t, b, mean_net, cov_net, head);
    case LossKind::Kind::w2_bound: return loss_w2_bound(t, b, mean_net, cov_net, head);
    }
    throw Error("unknown loss kind");
}

} // namespace hetreg
