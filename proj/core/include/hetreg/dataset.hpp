#pragma once

#include <optional>
#include <vector>

#include "hetreg/gaussian.hpp"

namespace hetreg {

/// Paired observations and targets, optionally carrying the per-row target
/// distribution when it is known (synthetic generators provide it).
struct RegressionDataset {
    Matrix inputs;  // N x m
    Matrix targets; // N x n
    std::optional<std::vector<Gaussian>> ground_truth;

    std::size_t size() const noexcept { return inputs.rows(); }
    std::size_t input_dim() const noexcept { return inputs.cols(); }
    std::size_t target_dim() const noexcept { return targets.cols(); }

    void validate() const {
        if (inputs.rows() != targets.rows() || inputs.rows() == 0)
            throw DimensionMismatch("dataset needs matching, nonempty input/target rows");
        if (!all_finite(inputs) || !all_finite(targets))
            throw Error("dataset entries must be finite");
        if (ground_truth && ground_truth->size() != size())
            throw DimensionMismatch("one ground-truth distribution per row required");
    }

    RegressionDataset rows_subset(const std::vector<std::size_t> &idx) const {
        RegressionDataset out;
        out.inputs = Matrix(idx.size(), input_dim());
        out.targets = Matrix(idx.size(), target_dim());
        if (ground_truth) out.ground_truth.emplace();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t c = 0; c < input_dim(); ++c) out.inputs(r, c) = inputs(idx[r], c);
            for (std::size_t c = 0; c < target_dim(); ++c) out.targets(r, c) = targets(idx[r], c);
            if (ground_truth) out.ground_truth->push_back((*ground_truth)[idx[r]]);
        }
        return out;
    }
};

} // namespace hetreg
