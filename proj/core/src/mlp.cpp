#include "hetreg/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hetreg {

namespace {

std::size_t layer_in(const MLPConfig &cfg, std::size_t layer) {
    return layer == 0 ? cfg.input_dim : cfg.hidden_width;
}

std::size_t layer_out(const MLPConfig &cfg, std::size_t layer) {
    return layer == cfg.hidden_layers ? cfg.output_dim : cfg.hidden_width;
}

} // namespace

std::size_t MLPParams::scalar_count() const {
    std::size_t n = 0;
    for (const Matrix &w : weights) n += w.size();
    for (const Vector &b : biases) n += b.size();
    return n;
}

Vector MLPParams::flatten() const {
    Vector out;
    out.reserve(scalar_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.insert(out.end(), weights[l].data().begin(), weights[l].data().end());
        out.insert(out.end(), biases[l].begin(), biases[l].end());
    }
    return out;
}

std::size_t CovHead::raw_dim() const {
    switch (kind) {
    case CovHeadKind::cholesky_full: return dim * (dim + 1) / 2;
    case CovHeadKind::diagonal: return dim;
    case CovHeadKind::sym_sqrt: return dim * dim;
    }
    return 0;
}

const char *to_string(CovHeadKind kind) {
    switch (kind) {
    case CovHeadKind::cholesky_full: return "cholesky_full";
    case CovHeadKind::diagonal: return "diagonal";
    case CovHeadKind::sym_sqrt: return "sym_sqrt";
    }
    return "?";
}

const char *to_string(Activation a) { return a == Activation::tanh ? "tanh" : "elu"; }

MLPParams init_mlp(const MLPConfig &cfg, std::mt19937_64 &rng) {
    if (cfg.hidden_layers > 0 && cfg.hidden_width < 1) throw Error("hidden width must be >= 1");
    MLPParams p;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const std::size_t fan_in = layer_in(cfg, l);
        const std::size_t fan_out = layer_out(cfg, l);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        Matrix w(fan_in, fan_out);
        for (double &v : w.data()) v = uniform(rng);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double softplus_inverse(double y) {
    // solves softplus(x) = y for y > 0
    return y + std::log(-std::expm1(-y));
}

void set_head_bias_identity(const CovHead &head, MLPParams &params) {
    Vector &bias = params.biases.back();
    if (bias.size() != head.raw_dim())
        throw DimensionMismatch("head raw dimension does not match the final layer");
    const std::size_t n = head.dim;
    switch (head.kind) {
    case CovHeadKind::cholesky_full: {
        std::fill(bias.begin(), bias.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            bias[i * (i + 1) / 2 + i] = softplus_inverse(1.0 - head.floor);
        break;
    }
    case CovHeadKind::diagonal:
        std::fill(bias.begin(), bias.end(), softplus_inverse(1.0 - head.floor));
        break;
    case CovHeadKind::sym_sqrt:
        std::fill(bias.begin(), bias.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) bias[i * n + i] = 1.0;
        break;
    }
}

NetRefs bind_params(ad::Tape &tape, const MLPConfig &cfg, const MLPParams &params) {
    NetRefs net;
    net.cfg = &cfg;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const Matrix &w = params.weights[l];
        net.weights.push_back(tape.param(w.rows(), w.cols(), w.data()));
        net.biases.push_back(tape.param(1, params.biases[l].size(), params.biases[l]));
    }
    return net;
}

NetRefs bind_flat(ad::Tape &tape, const MLPConfig &cfg, ad::Ref flat, std::size_t &offset) {
    NetRefs net;
    net.cfg = &cfg;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const std::size_t in = layer_in(cfg, l);
        const std::size_t out = layer_out(cfg, l);
        ad::Ref w = tape.reshape(tape.segment(flat, offset, in * out), in, out);
        offset += in * out;
        ad::Ref b = tape.segment(flat, offset, out);
        offset += out;
        net.weights.push_back(w);
        net.biases.push_back(b);
    }
    return net;
}

ad::Ref mlp_forward(ad::Tape &tape, const NetRefs &net, ad::Ref x_batch) {
    const MLPConfig &cfg = *net.cfg;
    ad::Ref h = x_batch;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, net.weights[l]), net.biases[l]);
        if (l + 1 < cfg.layer_count())
            h = cfg.activation == Activation::tanh ? tape.tanh_op(h) : tape.elu_op(h);
    }
    return h;
}

void collect_grads(const ad::Tape &tape, const NetRefs &net, std::vector<Vector> &out) {
    out.clear();
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto gw = tape.grad(net.weights[l]);
        out.emplace_back(gw.begin(), gw.end());
        const auto gb = tape.grad(net.biases[l]);
        out.emplace_back(gb.begin(), gb.end());
    }
}

Matrix mlp_value_forward(const MLPConfig &cfg, const MLPParams &params, const Matrix &x) {
    if (x.cols() != cfg.input_dim) throw ShapeMismatch("input dimension mismatch");
    Matrix h = x;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        Matrix z = h * params.weights[l];
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += params.biases[l][j];
        if (l + 1 < cfg.layer_count()) {
            for (double &v : z.data())
                v = cfg.activation == Activation::tanh ? std::tanh(v)
                                                       : (v > 0.0 ? v : std::expm1(v));
        }
        h = std::move(z);
    }
    return h;
}

Matrix head_chol_factor(const CovHead &head, std::span<const double> raw) {
    if (head.kind != CovHeadKind::cholesky_full)
        throw Error("cholesky factor requested from a non-cholesky head");
    if (raw.size() != head.raw_dim()) throw ShapeMismatch("head raw width");
    const std::size_t n = head.dim;
    Matrix l(n, n, 0.0);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = raw[flat++];
            l(i, j) = i == j ? softplus_value(v) + head.floor : v;
        }
    return l;
}

Matrix head_sqrt_factor(const CovHead &head, std::span<const double> raw) {
    if (head.kind != CovHeadKind::sym_sqrt)
        throw Error("sqrt factor requested from a non-sym_sqrt head");
    if (raw.size() != head.raw_dim()) throw ShapeMismatch("head raw width");
    const std::size_t n = head.dim;
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (raw[i * n + j] + raw[j * n + i]);
    return s;
}

SPDMatrix head_covariance(const CovHead &head, std::span<const double> raw) {
    switch (head.kind) {
    case CovHeadKind::cholesky_full: {
        const Matrix l = head_chol_factor(head, raw);
        return SPDMatrix(symmetrized(l * transposed(l)));
    }
    case CovHeadKind::diagonal: {
        if (raw.size() != head.dim) throw ShapeMismatch("head raw width");
        Vector var(head.dim);
        for (std::size_t i = 0; i < head.dim; ++i)
            var[i] = softplus_value(raw[i]) + head.floor;
        return SPDMatrix::diagonal(var);
    }
    case CovHeadKind::sym_sqrt: {
        const Matrix s = head_sqrt_factor(head, raw);
        return SPDMatrix(s * s);
    }
    }
    throw Error("unknown head kind");
}

namespace {

void write_tensor(std::ofstream &f, const std::string &name, std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
    f << name << ' ' << rows << ' ' << cols;
    char buf[40];
    for (double v : values) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << ' ' << buf;
    }
    f << '\n';
}

void write_net(std::ofstream &f, const std::string &prefix, const MLPConfig &cfg,
               const MLPParams &p) {
    f << prefix << ".config " << cfg.input_dim << ' ' << cfg.output_dim << ' ' << cfg.hidden_layers
      << ' ' << cfg.hidden_width << ' ' << to_string(cfg.activation) << '\n';
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        write_tensor(f, prefix + ".w" + std::to_string(l), p.weights[l].rows(),
                     p.weights[l].cols(), p.weights[l].data());
        write_tensor(f, prefix + ".b" + std::to_string(l), 1, p.biases[l].size(), p.biases[l]);
    }
}

void read_net(std::ifstream &f, const std::string &prefix, MLPConfig &cfg, MLPParams &p) {
    std::string tag, act;
    f >> tag;
    if (tag != prefix + ".config") throw ParseError(0, 0, "expected " + prefix + ".config");
    f >> cfg.input_dim >> cfg.output_dim >> cfg.hidden_layers >> cfg.hidden_width >> act;
    cfg.activation = act == "elu" ? Activation::elu : Activation::tanh;
    p.weights.clear();
    p.biases.clear();
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        std::string name;
        std::size_t rows, cols;
        f >> name >> rows >> cols;
        Matrix w(rows, cols);
        for (double &v : w.data()) f >> v;
        f >> name >> rows >> cols;
        Vector b(cols);
        for (double &v : b) f >> v;
        if (!f) throw ParseError(0, 0, "truncated checkpoint");
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
}

} // namespace

void save_checkpoint(const std::string &path, const MLPConfig &mean_cfg, const MLPParams &mean,
                     const MLPConfig &cov_cfg, const MLPParams &cov) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "hetreg-checkpoint v1\n";
    write_net(f, "mean", mean_cfg, mean);
    write_net(f, "cov", cov_cfg, cov);
    if (!f.good()) throw IoError("failed writing " + path);
}

void load_checkpoint(const std::string &path, MLPConfig &mean_cfg, MLPParams &mean,
                     MLPConfig &cov_cfg, MLPParams &cov) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string magic, version;
    f >> magic >> version;
    if (magic != "hetreg-checkpoint" || version != "v1")
        throw ParseError(1, 1, "unrecognized checkpoint header");
    read_net(f, "mean", mean_cfg, mean);
    read_net(f, "cov", cov_cfg, cov);
}

} // namespace hetreg
