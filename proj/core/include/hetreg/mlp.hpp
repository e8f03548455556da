#pragma once

#include <random>
#include <string>

#include "hetreg/autodiff.hpp"
#include "hetreg/linalg.hpp"

namespace hetreg {

enum class Activation { tanh, elu };

struct MLPConfig {
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t hidden_layers = 0;
    std::size_t hidden_width = 1;
    Activation activation = Activation::tanh;

    std::size_t layer_count() const noexcept { return hidden_layers + 1; }
};

/// Master copies of the network parameters; tapes bind them per step.
struct MLPParams {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    std::size_t scalar_count() const;
    Vector flatten() const;
};

/// Covariance head on top of the raw network outputs.
///  - cholesky_full: n(n+1)/2 raw values -> lower factor L, softplus + floor
///    on the diagonal, implied covariance L L^T (strictly PD)
///  - diagonal: n raw values -> variances via softplus + floor
///  - sym_sqrt: n^2 raw values -> symmetrized square-root factor S,
///    implied covariance S*S (always PSD)
enum class CovHeadKind { cholesky_full, diagonal, sym_sqrt };

struct CovHead {
    CovHeadKind kind = CovHeadKind::cholesky_full;
    std::size_t dim = 1;
    double floor = 1e-6;

    std::size_t raw_dim() const;
};

const char *to_string(CovHeadKind kind);
const char *to_string(Activation a);

/// Glorot-uniform weights, zero biases.
MLPParams init_mlp(const MLPConfig &cfg, std::mt19937_64 &rng);

/// Overwrites the final-layer bias so the head's implied covariance starts
/// at (approximately) the identity; zero-hidden-layer nets on constant input
/// start at exactly the identity.
void set_head_bias_identity(const CovHead &head, MLPParams &params);

/// Tape bindings for one forward/backward pass.
struct NetRefs {
    const MLPConfig *cfg = nullptr;
    std::vector<ad::Ref> weights;
    std::vector<ad::Ref> biases;
};

NetRefs bind_params(ad::Tape &tape, const MLPConfig &cfg, const MLPParams &params);
/// Binds from a flat parameter leaf (finite-difference checks); advances offset.
NetRefs bind_flat(ad::Tape &tape, const MLPConfig &cfg, ad::Ref flat, std::size_t &offset);

ad::Ref mlp_forward(ad::Tape &tape, const NetRefs &net, ad::Ref x_batch);

/// Reads accumulated gradients back in the bind order.
void collect_grads(const ad::Tape &tape, const NetRefs &net, std::vector<Vector> &out);

/// Tape-free forward pass for evaluation.
Matrix mlp_value_forward(const MLPConfig &cfg, const MLPParams &params, const Matrix &x);

// Value-side head application (evaluation only).
SPDMatrix head_covariance(const CovHead &head, std::span<const double> raw);
Matrix head_sqrt_factor(const CovHead &head, std::span<const double> raw);
/// Lower-triangular factor for the cholesky_full head.
Matrix head_chol_factor(const CovHead &head, std::span<const double> raw);

double softplus_value(double x);
double softplus_inverse(double y);

// Versioned text checkpoint of named parameter tensors.
void save_checkpoint(const std::string &path, const MLPConfig &mean_cfg, const MLPParams &mean,
                     const MLPConfig &cov_cfg, const MLPParams &cov);
void load_checkpoint(const std::string &path, MLPConfig &mean_cfg, MLPParams &mean,
                     MLPConfig &cov_cfg, MLPParams &cov);

} // namespace hetreg
