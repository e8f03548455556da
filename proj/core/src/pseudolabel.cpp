#include "hetreg/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hetreg/threading.hpp"

namespace hetreg {

namespace {

// Sort key for neighbor selection: distance first, then row index, with the
// query pinned ahead of any other zero-distance duplicate row.
struct NeighborKey {
    double dist;
    std::ptrdiff_t rank;

    bool operator<(const NeighborKey &o) const {
        if (dist != o.dist) return dist < o.dist;
        return rank < o.rank;
    }
};

std::vector<std::pair<NeighborKey, std::size_t>> all_distances(const RegressionDataset &ds,
                                                               std::size_t query,
                                                               const SPDMatrix &precision) {
    const std::size_t n = ds.size();
    std::vector<std::pair<NeighborKey, std::size_t>> keyed(n);
    const auto q_row = ds.inputs.row_span(query);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = mahalanobis(ds.inputs.row_span(i), q_row, precision);
        const std::ptrdiff_t rank =
            i == query ? -1 : static_cast<std::ptrdiff_t>(i);
        keyed[i] = {NeighborKey{d, rank}, i};
    }
    return keyed;
}

void softmax_neg_distance(std::span<const double> dist, std::span<double> weights) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
        weights[j] = std::exp(-dist[j]);
        sum += weights[j];
    }
    for (std::size_t j = 0; j < dist.size(); ++j) weights[j] /= sum;
}

PseudoLabel label_from_neighbors(const RegressionDataset &ds,
                                 const std::vector<std::size_t> &idx, const Vector &dist) {
    const std::size_t k = idx.size();
    const std::size_t n = ds.target_dim();
    Vector weights(k);
    softmax_neg_distance(dist, weights);

    Matrix neighbor_targets(k, n);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < n; ++c) neighbor_targets(j, c) = ds.targets(idx[j], c);

    auto [mean, cov] = weighted_covariance(neighbor_targets, weights);
    SPDMatrix root = spd_sqrt(cov);
    return PseudoLabel{std::move(mean), std::move(cov), std::move(root), idx};
}

} // namespace

std::size_t default_pseudo_k(std::size_t target_dim) { return 10 * target_dim; }

SPDMatrix input_covariance(const RegressionDataset &ds, double ridge_scale) {
    if (ds.size() < 2) throw TooFewSamples("input covariance needs at least two rows");
    const std::size_t n = ds.size();
    Vector uniform(n, 1.0 / static_cast<double>(n));
    auto [mean, cov] = weighted_covariance(ds.inputs, uniform);
    (void)mean;
    const double floor = ridge_scale * cov.trace() / static_cast<double>(cov.dim());
    if (floor == 0.0) return cov;
    Matrix ridged = cov.matrix();
    for (std::size_t i = 0; i < ridged.rows(); ++i) ridged(i, i) += floor;
    return SPDMatrix(std::move(ridged));
}

std::pair<std::vector<std::size_t>, Vector> knn_mahalanobis(const RegressionDataset &ds,
                                                            std::size_t query_row, std::size_t k,
                                                            const SPDMatrix &precision) {
    const std::size_t n = ds.size();
    if (query_row >= n) throw DimensionMismatch("query row out of range");
    if (k < 1 || k > n) throw KOutOfRange("k must be in [1, N]");

    auto keyed = all_distances(ds, query_row, precision);
    std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     keyed.end(),
                     [](const auto &a, const auto &b) { return a.first < b.first; });
    std::sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k),
              [](const auto &a, const auto &b) { return a.first < b.first; });

    std::vector<std::size_t> idx(k);
    Vector dist(k);
    for (std::size_t j = 0; j < k; ++j) {
        idx[j] = keyed[j].second;
        dist[j] = keyed[j].first.dist;
    }
    return {std::move(idx), std::move(dist)};
}

PseudoLabelSet pseudo_labels(const RegressionDataset &ds, std::size_t k, std::size_t threads) {
    ds.validate();
    if (k < 1 || k > ds.size()) throw KOutOfRange("k must be in [1, N]");
    const SPDMatrix precision = spd_inverse(input_covariance(ds));

    PseudoLabelSet out;
    out.k = k;
    out.rows.resize(ds.size());
    parallel_chunks(ds.size(), worker_count(threads), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            auto [idx, dist] = knn_mahalanobis(ds, r, k, precision);
            out.rows[r] = label_from_neighbors(ds, idx, dist);
        }
    });
    return out;
}

PseudoLabelSet pseudo_labels_reference(const RegressionDataset &ds, std::size_t k) {
    ds.validate();
    if (k < 1 || k > ds.size()) throw KOutOfRange("k must be in [1, N]");
    const SPDMatrix precision = spd_inverse(input_covariance(ds));
    const std::size_t n_rows = ds.size();
    const std::size_t n = ds.target_dim();

    PseudoLabelSet out;
    out.k = k;
    out.rows.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        auto keyed = all_distances(ds, r, precision);
        std::sort(keyed.begin(), keyed.end(),
                  [](const auto &a, const auto &b) { return a.first < b.first; });

        std::vector<std::size_t> idx(k);
        Vector dist(k), w(k);
        for (std::size_t j = 0; j < k; ++j) {
            idx[j] = keyed[j].second;
            dist[j] = keyed[j].first.dist;
        }
        softmax_neg_distance(dist, w);

        Vector mu(n, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < n; ++c) mu[c] += w[j] * ds.targets(idx[j], c);

        Matrix cov(n, n, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t a = 0; a < n; ++a) {
                const double da = ds.targets(idx[j], a) - mu[a];
                for (std::size_t b = 0; b < n; ++b)
                    cov(a, b) += w[j] * da * (ds.targets(idx[j], b) - mu[b]);
            }

        SPDMatrix spd(symmetrized(cov));
        SPDMatrix root = spd_sqrt(spd);
        out.rows[r] = PseudoLabel{std::move(mu), std::move(spd), std::move(root), std::move(idx)};
    }
    return out;
}

void export_labels(const PseudoLabelSet &labels, const std::string &path) {
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path + " for writing");
    if (labels.rows.empty()) throw Error("no labels to export");
    const std::size_t n = labels.rows.front().mean.size();

    file << "row_index";
    for (std::size_t i = 0; i < n; ++i) file << ",mu_" << i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) file << ",cov_" << i << "_" << j;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) file << ",sqrt_" << i << "_" << j;
    file << "\n";

    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        file << ',' << buf;
    };
    for (std::size_t r = 0; r < labels.rows.size(); ++r) {
        const PseudoLabel &pl = labels.rows[r];
        file << r;
        for (double v : pl.mean) put(v);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) put(pl.cov(i, j));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) put(pl.sqrt_cov(i, j));
        file << "\n";
    }
    if (!file.good()) throw IoError("failed writing " + path);
}

} // namespace hetreg
