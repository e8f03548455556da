#pragma once

#include <string>

#include "hetreg/dataset.hpp"

namespace hetreg {

/// Neighborhood covariance pseudo-label for one dataset row.
struct PseudoLabel {
    Vector mean;                        // softmax-weighted neighbor target mean
    SPDMatrix cov;                      // weighted neighbor target covariance
    SPDMatrix sqrt_cov;                 // its PSD square root, precomputed
    std::vector<std::size_t> neighbors; // ascending (distance, index); includes the row itself
};

struct PseudoLabelSet {
    std::vector<PseudoLabel> rows;
    std::size_t k = 0;

    std::size_t size() const noexcept { return rows.size(); }
};

/// Neighborhood size used throughout: ten times the target dimensionality.
std::size_t default_pseudo_k(std::size_t target_dim);

/// Population covariance of the inputs, ridge-regularized to strict positive
/// definiteness with floor ridge_scale * trace/dim.
SPDMatrix input_covariance(const RegressionDataset &ds, double ridge_scale = 1e-6);

/// Indices and Mahalanobis distances of the k rows closest to query_row,
/// ascending, ties broken by ascending row index. The query itself is always
/// first (distance zero).
std::pair<std::vector<std::size_t>, Vector> knn_mahalanobis(const RegressionDataset &ds,
                                                            std::size_t query_row, std::size_t k,
                                                            const SPDMatrix &precision);

/// Algorithm: per row, softmax(-distance) weights over the k Mahalanobis
/// neighbors, then the weighted mean and covariance of their targets.
/// `threads` 0 means one worker per hardware thread (capped by HETREG_THREADS).
PseudoLabelSet pseudo_labels(const RegressionDataset &ds, std::size_t k, std::size_t threads = 0);

/// Naive full-sort, double-loop reference; must agree with pseudo_labels
/// bit for bit. Kept independent of the optimized code path.
PseudoLabelSet pseudo_labels_reference(const RegressionDataset &ds, std::size_t k);

/// CSV: row_index, mean components, upper triangles of cov and sqrt(cov),
/// 17 significant digits.
void export_labels(const PseudoLabelSet &labels, const std::string &path);

} // namespace hetreg
