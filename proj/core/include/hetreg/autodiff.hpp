#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hetreg/matrix.hpp"

namespace hetreg::ad {

/// Handle into a Tape. Only meaningful for the tape that produced it.
struct Ref {
    std::uint32_t id = 0;
};

/// Recorded computation graph for reverse-mode differentiation. A tape is
/// confined to one training step on one thread; nodes are appended in
/// topological order and backward() replays their pullbacks in reverse.
class Tape {
public:
    Tape() = default;
    ~Tape();
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    // Leaves. Parameters participate in gradients, constants do not.
    Ref param(std::size_t rows, std::size_t cols, std::span<const double> values);
    Ref constant(std::size_t rows, std::size_t cols, std::span<const double> values);
    Ref constant(const Matrix &m);
    Ref scalar_constant(double v);

    Ref matmul(Ref a, Ref b);
    Ref add(Ref a, Ref b);
    Ref sub(Ref a, Ref b);
    Ref mul(Ref a, Ref b);       // elementwise
    Ref divide(Ref a, Ref b);    // elementwise
    Ref scale(Ref a, double c);
    Ref add_scalar(Ref a, double c);
    Ref add_rowvec(Ref m, Ref v); // broadcast a 1 x c row over every row of m

    Ref tanh_op(Ref a);
    Ref elu_op(Ref a);
    Ref exp_op(Ref a);
    Ref log_op(Ref a);
    Ref softplus_op(Ref a);
    Ref square_op(Ref a);

    Ref reduce_sum(Ref a);   // 1x1
    Ref frobenius_sq(Ref a); // 1x1, gradient 2*a

    Ref row(Ref a, std::size_t r);
    Ref segment(Ref a, std::size_t offset, std::size_t count); // flat slice, 1 x count
    Ref reshape(Ref a, std::size_t rows, std::size_t cols);
    /// Treat each row as an n x n matrix and replace it with (A + A^T)/2.
    Ref symmetrize_rows(Ref a, std::size_t n);
    /// Packed lower-triangle row (row-major, diagonal included): softplus +
    /// floor applied to the diagonal slots, identity elsewhere.
    Ref softplus_diag_packed(Ref a, std::size_t n, double floor);
    /// Scatter a packed lower-triangle row into an n x n lower-triangular matrix.
    Ref lower_from_packed(Ref a, std::size_t n);

    /// v^T (L L^T)^{-1} v for a lower-triangular factor L.
    Ref quadratic_form(Ref v, Ref chol_lower);
    /// Tr((L L^T)^{-1} P) for a constant symmetric P.
    Ref trace_solve(Ref chol_lower, const Matrix &p);
    /// 2 * sum(log L_ii).
    Ref logdet_from_chol(Ref l);

    /// Forwards values, contributes nothing to backpropagated gradients.
    Ref stop_gradient(Ref a);

    void backward(Ref loss);

    std::size_t node_rows(Ref r) const;
    std::size_t node_cols(Ref r) const;
    std::span<const double> value(Ref r) const;
    std::span<const double> grad(Ref r) const;
    double value_scalar(Ref r) const;
    Matrix value_matrix(Ref r) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Values produced by stop_gradient nodes, in creation order. Feeding
    /// them back through replay_detached() on a rebuilt graph makes numeric
    /// differencing match the exact function backward() differentiates.
    std::vector<std::vector<double>> detached_values() const;
    void replay_detached(std::vector<std::vector<double>> values);

private:
    struct Node {
        std::uint32_t rows = 0;
        std::uint32_t cols = 0;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        std::function<void(Tape &)> pull;
    };

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> detached_;
    std::vector<std::vector<double>> replay_;
    std::size_t replay_cursor_ = 0;
    bool replaying_ = false;

    Node &at(Ref r) { return nodes_[r.id]; }
    const Node &at(Ref r) const { return nodes_[r.id]; }
    Ref push(std::size_t rows, std::size_t cols, bool needs_grad);
    void check_parent(Ref r) const;
};

/// Builds a scalar loss from a flat parameter leaf.
using LossBuilder = std::function<Ref(Tape &, Ref flat_params)>;

struct GradCheckReport {
    bool pass = true;
    double max_abs_diff = 0.0;
    double max_rel_err = 0.0;
    /// Worst |analytic - numeric| - max(1e-4 * magnitude, 1e-7); <= 0 passes.
    double worst_margin = 0.0;
};

/// Central finite differences against backward(), h default 1e-5. Detached
/// branches are replayed from the base point so both sides differentiate the
/// same function.
GradCheckReport grad_check(const LossBuilder &build, const std::vector<double> &point,
                           double h = 1e-5);

} // namespace hetreg::ad
