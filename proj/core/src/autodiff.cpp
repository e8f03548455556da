#include "hetreg/autodiff.hpp"

#include <cmath>

#include "hetreg/errors.hpp"
#include "hetreg/linalg.hpp"

namespace hetreg::ad {

namespace {

double softplus(double x) {
    // log(1 + exp(x)) without overflow on either tail
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t packed_size(std::size_t n) { return n * (n + 1) / 2; }

// out (r x c) += a (r x k) * b (k x c), tiled over output columns so the
// active slice of b stays cache-resident even for the widest head layers.
void gemm_acc(const double *a, const double *b, double *out, std::size_t r, std::size_t k,
              std::size_t c) {
    constexpr std::size_t tile = 256;
    for (std::size_t j0 = 0; j0 < c; j0 += tile) {
        const std::size_t j1 = std::min(c, j0 + tile);
        for (std::size_t i = 0; i < r; ++i) {
            const double *arow = a + i * k;
            double *orow = out + i * c;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                if (av == 0.0) continue;
                const double *brow = b + p * c;
                for (std::size_t j = j0; j < j1; ++j) orow[j] += av * brow[j];
            }
        }
    }
}

std::vector<double> transposed_values(const double *m, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = m[i * cols + j];
    return out;
}

// Node buffers are recycled through a per-thread pool bucketed by
// power-of-two capacity; a training step builds and drops one tape per
// minibatch, and handing large pages back to the allocator every step
// dominates the step time otherwise.
constexpr std::size_t kPoolClasses = 28;
constexpr std::size_t kPoolPerClass = 512;
thread_local std::vector<std::vector<double>> t_buffer_pool[kPoolClasses];

std::size_t size_class(std::size_t n) {
    std::size_t c = 0;
    while ((std::size_t{1} << c) < n) ++c;
    return c < kPoolClasses ? c : kPoolClasses - 1;
}

std::vector<double> take_buffer(std::size_t n) {
    if (n == 0) return {};
    auto &bucket = t_buffer_pool[size_class(n)];
    if (bucket.empty()) {
        std::vector<double> fresh;
        fresh.reserve(std::size_t{1} << size_class(n));
        fresh.assign(n, 0.0);
        return fresh;
    }
    std::vector<double> buf = std::move(bucket.back());
    bucket.pop_back();
    buf.assign(n, 0.0);
    return buf;
}

void give_buffer(std::vector<double> &&buf) {
    if (buf.capacity() == 0) return;
    std::size_t c = 0;
    while (c + 1 < kPoolClasses && (std::size_t{2} << c) <= buf.capacity()) ++c;
    // stored class guarantees capacity >= 2^c, matching take_buffer's lookup
    auto &bucket = t_buffer_pool[c];
    if (bucket.size() < kPoolPerClass) bucket.push_back(std::move(buf));
}

bool is_diag_slot(std::size_t flat, std::size_t n) {
    // packed row-major lower triangle: row i starts at i(i+1)/2, diagonal at +i
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t d = i * (i + 1) / 2 + i;
        if (d == flat) return true;
        if (d > flat) return false;
    }
    return false;
}

} // namespace

Tape::~Tape() {
    for (Node &n : nodes_) {
        give_buffer(std::move(n.value));
        give_buffer(std::move(n.grad));
    }
}

Ref Tape::push(std::size_t rows, std::size_t cols, bool needs_grad) {
    Node n;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.value = take_buffer(rows * cols);
    n.grad = take_buffer(rows * cols);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Ref{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check_parent(Ref r) const {
    if (r.id >= nodes_.size()) throw CycleDetected("op references a node not yet on the tape");
}

Ref Tape::param(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols) throw ShapeMismatch("param value count");
    Ref r = push(rows, cols, true);
    std::copy(values.begin(), values.end(), at(r).value.begin());
    return r;
}

Ref Tape::constant(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols) throw ShapeMismatch("constant value count");
    Ref r = push(rows, cols, false);
    std::copy(values.begin(), values.end(), at(r).value.begin());
    return r;
}

Ref Tape::constant(const Matrix &m) { return constant(m.rows(), m.cols(), m.data()); }

Ref Tape::scalar_constant(double v) { return constant(1, 1, std::span<const double>(&v, 1)); }

Ref Tape::matmul(Ref a, Ref b) {
    check_parent(a);
    check_parent(b);
    const Node &na = at(a), &nb = at(b);
    if (na.cols != nb.rows) throw ShapeMismatch("matmul inner dimensions");
    const std::size_t r = na.rows, k = na.cols, c = nb.cols;
    Ref out = push(r, c, na.needs_grad || nb.needs_grad);
    gemm_acc(at(a).value.data(), at(b).value.data(), at(out).value.data(), r, k, c);
    if (at(out).needs_grad) {
        at(out).pull = [a, b, out, r, k, c](Tape &t) {
            const double *g = t.at(out).grad.data();
            if (t.at(a).needs_grad) {
                // dA += G * B^T
                const auto bt = transposed_values(t.at(b).value.data(), k, c);
                gemm_acc(g, bt.data(), t.at(a).grad.data(), r, c, k);
            }
            if (t.at(b).needs_grad) {
                // dB += A^T * G
                const auto atv = transposed_values(t.at(a).value.data(), r, k);
                gemm_acc(atv.data(), g, t.at(b).grad.data(), k, r, c);
            }
        };
    }
    return out;
}

Ref Tape::add(Ref a, Ref b) {
    check_parent(a);
    check_parent(b);
    const Node &na = at(a), &nb = at(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw ShapeMismatch("add shapes");
    Ref out = push(na.rows, na.cols, na.needs_grad || nb.needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = at(a).value[i] + at(b).value[i];
    if (at(out).needs_grad) {
        at(out).pull = [a, b, out](Tape &t) {
            const auto &g = t.at(out).grad;
            if (t.at(a).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) t.at(a).grad[i] += g[i];
            if (t.at(b).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) t.at(b).grad[i] += g[i];
        };
    }
    return out;
}

Ref Tape::sub(Ref a, Ref b) {
    check_parent(a);
    check_parent(b);
    const Node &na = at(a), &nb = at(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw ShapeMismatch("sub shapes");
    Ref out = push(na.rows, na.cols, na.needs_grad || nb.needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = at(a).value[i] - at(b).value[i];
    if (at(out).needs_grad) {
        at(out).pull = [a, b, out](Tape &t) {
            const auto &g = t.at(out).grad;
            if (t.at(a).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) t.at(a).grad[i] += g[i];
            if (t.at(b).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) t.at(b).grad[i] -= g[i];
        };
    }
    return out;
}

Ref Tape::mul(Ref a, Ref b) {
    check_parent(a);
    check_parent(b);
    const Node &na = at(a), &nb = at(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw ShapeMismatch("mul shapes");
    Ref out = push(na.rows, na.cols, na.needs_grad || nb.needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = at(a).value[i] * at(b).value[i];
    if (at(out).needs_grad) {
        at(out).pull = [a, b, out](Tape &t) {
            const auto &g = t.at(out).grad;
            if (t.at(a).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    t.at(a).grad[i] += g[i] * t.at(b).value[i];
            if (t.at(b).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    t.at(b).grad[i] += g[i] * t.at(a).value[i];
        };
    }
    return out;
}

Ref Tape::divide(Ref a, Ref b) {
    check_parent(a);
    check_parent(b);
    const Node &na = at(a), &nb = at(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw ShapeMismatch("divide shapes");
    Ref out = push(na.rows, na.cols, na.needs_grad || nb.needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = at(a).value[i] / at(b).value[i];
    if (at(out).needs_grad) {
        at(out).pull = [a, b, out](Tape &t) {
            const auto &g = t.at(out).grad;
            if (t.at(a).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    t.at(a).grad[i] += g[i] / t.at(b).value[i];
            if (t.at(b).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    t.at(b).grad[i] -= g[i] * t.at(out).value[i] / t.at(b).value[i];
        };
    }
    return out;
}

Ref Tape::scale(Ref a, double c) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i) at(out).value[i] = c * at(a).value[i];
    if (at(out).needs_grad) {
        at(out).pull = [a, out, c](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += c * t.at(out).grad[i];
        };
    }
    return out;
}

Ref Tape::add_scalar(Ref a, double c) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i) at(out).value[i] = at(a).value[i] + c;
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i];
        };
    }
    return out;
}

Ref Tape::add_rowvec(Ref m, Ref v) {
    check_parent(m);
    check_parent(v);
    const Node &nm = at(m), &nv = at(v);
    if (nv.rows != 1 || nv.cols != nm.cols) throw ShapeMismatch("row vector broadcast shape");
    const std::size_t r = nm.rows, c = nm.cols;
    Ref out = push(r, c, nm.needs_grad || nv.needs_grad);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            at(out).value[i * c + j] = at(m).value[i * c + j] + at(v).value[j];
    if (at(out).needs_grad) {
        at(out).pull = [m, v, out, r, c](Tape &t) {
            const auto &g = t.at(out).grad;
            if (t.at(m).needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) t.at(m).grad[i] += g[i];
            if (t.at(v).needs_grad)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) t.at(v).grad[j] += g[i * c + j];
        };
    }
    return out;
}

Ref Tape::tanh_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = std::tanh(at(a).value[i]);
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i) {
                const double y = t.at(out).value[i];
                t.at(a).grad[i] += t.at(out).grad[i] * (1.0 - y * y);
            }
        };
    }
    return out;
}

Ref Tape::elu_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i) {
        const double x = at(a).value[i];
        at(out).value[i] = x > 0.0 ? x : std::expm1(x);
    }
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i) {
                const double x = t.at(a).value[i];
                const double d = x > 0.0 ? 1.0 : std::exp(x);
                t.at(a).grad[i] += t.at(out).grad[i] * d;
            }
        };
    }
    return out;
}

Ref Tape::exp_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = std::exp(at(a).value[i]);
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i] * t.at(out).value[i];
        };
    }
    return out;
}

Ref Tape::log_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = std::log(at(a).value[i]);
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i] / t.at(a).value[i];
        };
    }
    return out;
}

Ref Tape::softplus_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i)
        at(out).value[i] = softplus(at(a).value[i]);
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i] * sigmoid(t.at(a).value[i]);
        };
    }
    return out;
}

Ref Tape::square_op(Ref a) {
    check_parent(a);
    Ref out = push(at(a).rows, at(a).cols, at(a).needs_grad);
    for (std::size_t i = 0; i < at(out).value.size(); ++i) {
        const double x = at(a).value[i];
        at(out).value[i] = x * x;
    }
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i] * 2.0 * t.at(a).value[i];
        };
    }
    return out;
}

Ref Tape::reduce_sum(Ref a) {
    check_parent(a);
    Ref out = push(1, 1, at(a).needs_grad);
    double s = 0.0;
    for (double v : at(a).value) s += v;
    at(out).value[0] = s;
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            const double g = t.at(out).grad[0];
            for (double &gv : t.at(a).grad) gv += g;
        };
    }
    return out;
}

Ref Tape::frobenius_sq(Ref a) {
    check_parent(a);
    Ref out = push(1, 1, at(a).needs_grad);
    double s = 0.0;
    for (double v : at(a).value) s += v * v;
    at(out).value[0] = s;
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            const double g = t.at(out).grad[0];
            for (std::size_t i = 0; i < t.at(a).grad.size(); ++i)
                t.at(a).grad[i] += g * 2.0 * t.at(a).value[i];
        };
    }
    return out;
}

Ref Tape::row(Ref a, std::size_t r) {
    check_parent(a);
    const Node &na = at(a);
    if (r >= na.rows) throw ShapeMismatch("row index out of range");
    const std::size_t c = na.cols;
    Ref out = push(1, c, na.needs_grad);
    std::copy_n(at(a).value.begin() + static_cast<std::ptrdiff_t>(r * c), c,
                at(out).value.begin());
    if (at(out).needs_grad) {
        at(out).pull = [a, out, r, c](Tape &t) {
            for (std::size_t j = 0; j < c; ++j) t.at(a).grad[r * c + j] += t.at(out).grad[j];
        };
    }
    return out;
}

Ref Tape::segment(Ref a, std::size_t offset, std::size_t count) {
    check_parent(a);
    if (offset + count > at(a).value.size()) throw ShapeMismatch("segment out of range");
    Ref out = push(1, count, at(a).needs_grad);
    std::copy_n(at(a).value.begin() + static_cast<std::ptrdiff_t>(offset), count,
                at(out).value.begin());
    if (at(out).needs_grad) {
        at(out).pull = [a, out, offset, count](Tape &t) {
            for (std::size_t j = 0; j < count; ++j)
                t.at(a).grad[offset + j] += t.at(out).grad[j];
        };
    }
    return out;
}

Ref Tape::reshape(Ref a, std::size_t rows, std::size_t cols) {
    check_parent(a);
    if (rows * cols != at(a).value.size()) throw ShapeMismatch("reshape element count");
    Ref out = push(rows, cols, at(a).needs_grad);
    at(out).value = at(a).value;
    if (at(out).needs_grad) {
        at(out).pull = [a, out](Tape &t) {
            for (std::size_t i = 0; i < t.at(out).grad.size(); ++i)
                t.at(a).grad[i] += t.at(out).grad[i];
        };
    }
    return out;
}

Ref Tape::symmetrize_rows(Ref a, std::size_t n) {
    check_parent(a);
    const Node &na = at(a);
    if (na.cols != n * n) throw ShapeMismatch("symmetrize_rows needs n*n columns");
    const std::size_t b = na.rows;
    Ref out = push(b, n * n, na.needs_grad);
    for (std::size_t r = 0; r < b; ++r) {
        const double *src = at(a).value.data() + r * n * n;
        double *dst = at(out).value.data() + r * n * n;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dst[i * n + j] = 0.5 * (src[i * n + j] + src[j * n + i]);
    }
    if (at(out).needs_grad) {
        at(out).pull = [a, out, b, n](Tape &t) {
            for (std::size_t r = 0; r < b; ++r) {
                const double *g = t.at(out).grad.data() + r * n * n;
                double *ga = t.at(a).grad.data() + r * n * n;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        ga[i * n + j] += 0.5 * (g[i * n + j] + g[j * n + i]);
            }
        };
    }
    return out;
}

Ref Tape::softplus_diag_packed(Ref a, std::size_t n, double floor) {
    check_parent(a);
    const Node &na = at(a);
    if (na.cols != packed_size(n)) throw ShapeMismatch("packed triangle width");
    const std::size_t b = na.rows, p = na.cols;
    Ref out = push(b, p, na.needs_grad);
    std::vector<bool> diag(p);
    for (std::size_t j = 0; j < p; ++j) diag[j] = is_diag_slot(j, n);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < p; ++j) {
            const double x = at(a).value[r * p + j];
            at(out).value[r * p + j] = diag[j] ? softplus(x) + floor : x;
        }
    if (at(out).needs_grad) {
        at(out).pull = [a, out, b, p, diag](Tape &t) {
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t j = 0; j < p; ++j) {
                    const double g = t.at(out).grad[r * p + j];
                    t.at(a).grad[r * p + j] +=
                        diag[j] ? g * sigmoid(t.at(a).value[r * p + j]) : g;
                }
        };
    }
    return out;
}

Ref Tape::lower_from_packed(Ref a, std::size_t n) {
    check_parent(a);
    const Node &na = at(a);
    if (na.rows != 1 || na.cols != packed_size(n))
        throw ShapeMismatch("lower_from_packed needs a packed row");
    Ref out = push(n, n, na.needs_grad);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) at(out).value[i * n + j] = at(a).value[flat++];
    if (at(out).needs_grad) {
        at(out).pull = [a, out, n](Tape &t) {
            std::size_t f = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j <= i; ++j)
                    t.at(a).grad[f++] += t.at(out).grad[i * n + j];
        };
    }
    return out;
}

Ref Tape::quadratic_form(Ref v, Ref chol_lower) {
    check_parent(v);
    check_parent(chol_lower);
    const Node &nv = at(v), &nl = at(chol_lower);
    if (nl.rows != nl.cols) throw ShapeMismatch("cholesky factor must be square");
    const std::size_t n = nl.rows;
    if (nv.value.size() != n) throw ShapeMismatch("quadratic form vector length");

    const Matrix lower(n, n, at(chol_lower).value);
    std::vector<double> z(n);
    forward_substitute(lower, at(v).value, z);
    double q = 0.0;
    for (double zi : z) q += zi * zi;

    Ref out = push(1, 1, nv.needs_grad || nl.needs_grad);
    at(out).value[0] = q;
    if (at(out).needs_grad) {
        at(out).pull = [v, chol_lower, out, n, z](Tape &t) {
            const double g = t.at(out).grad[0];
            const Matrix lower(n, n, t.at(chol_lower).value);
            std::vector<double> w(n);
            backward_substitute_t(lower, z, w);
            if (t.at(v).needs_grad)
                for (std::size_t i = 0; i < n; ++i) t.at(v).grad[i] += g * 2.0 * w[i];
            if (t.at(chol_lower).needs_grad)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j <= i; ++j)
                        t.at(chol_lower).grad[i * n + j] -= g * 2.0 * w[i] * z[j];
        };
    }
    return out;
}

Ref Tape::trace_solve(Ref chol_lower, const Matrix &p) {
    check_parent(chol_lower);
    const Node &nl = at(chol_lower);
    if (nl.rows != nl.cols) throw ShapeMismatch("cholesky factor must be square");
    const std::size_t n = nl.rows;
    if (p.rows() != n || p.cols() != n) throw ShapeMismatch("trace_solve matrix shape");

    const Matrix lower(n, n, at(chol_lower).value);
    Vector col(n), y(n), x(n);
    // M = (L L^T)^{-1} P, column by column; the trace needs only M_jj but the
    // pullback reuses the whole matrix.
    Matrix m(n, n);
    double t_val = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = p(i, j);
        forward_substitute(lower, col, y);
        backward_substitute_t(lower, y, x);
        for (std::size_t i = 0; i < n; ++i) m(i, j) = x[i];
        t_val += x[j];
    }

    Ref out = push(1, 1, nl.needs_grad);
    at(out).value[0] = t_val;
    if (at(out).needs_grad) {
        at(out).pull = [chol_lower, out, n, m](Tape &t) {
            const double g = t.at(out).grad[0];
            const Matrix lower(n, n, t.at(chol_lower).value);
            // d/dL Tr(Sigma^{-1} P) = -2 Sigma^{-1} P Sigma^{-1} L (lower part)
            Vector col(n), y(n), x(n);
            Matrix ms(n, n); // Sigma^{-1} M^T = (M Sigma^{-1})^T
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) col[i] = m(j, i);
                forward_substitute(lower, col, y);
                backward_substitute_t(lower, y, x);
                for (std::size_t i = 0; i < n; ++i) ms(i, j) = x[i];
            }
            const Matrix gmat = transposed(ms) * lower;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j <= i; ++j)
                    t.at(chol_lower).grad[i * n + j] -= g * 2.0 * gmat(i, j);
        };
    }
    return out;
}

Ref Tape::logdet_from_chol(Ref l) {
    check_parent(l);
    const Node &nl = at(l);
    if (nl.rows != nl.cols) throw ShapeMismatch("cholesky factor must be square");
    const std::size_t n = nl.rows;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::log(at(l).value[i * n + i]);
    Ref out = push(1, 1, nl.needs_grad);
    at(out).value[0] = 2.0 * s;
    if (at(out).needs_grad) {
        at(out).pull = [l, out, n](Tape &t) {
            const double g = t.at(out).grad[0];
            for (std::size_t i = 0; i < n; ++i)
                t.at(l).grad[i * n + i] += g * 2.0 / t.at(l).value[i * n + i];
        };
    }
    return out;
}

Ref Tape::stop_gradient(Ref a) {
    check_parent(a);
    const Node &na = at(a);
    Ref out = push(na.rows, na.cols, false);
    if (replaying_) {
        if (replay_cursor_ >= replay_.size())
            throw Error("detached replay exhausted; graph structure changed");
        const auto &pinned = replay_[replay_cursor_++];
        if (pinned.size() != at(out).value.size())
            throw ShapeMismatch("detached replay shape changed");
        at(out).value = pinned;
    } else {
        at(out).value = at(a).value;
    }
    detached_.push_back(out.id);
    return out;
}

void Tape::backward(Ref loss) {
    check_parent(loss);
    if (at(loss).value.size() != 1) throw Error("backward requires a scalar loss");
    at(loss).grad[0] = 1.0;
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
        if (nodes_[i].pull) nodes_[i].pull(*this);
    }
}

std::size_t Tape::node_rows(Ref r) const { return at(r).rows; }
std::size_t Tape::node_cols(Ref r) const { return at(r).cols; }

std::span<const double> Tape::value(Ref r) const { return at(r).value; }
std::span<const double> Tape::grad(Ref r) const { return at(r).grad; }

double Tape::value_scalar(Ref r) const {
    if (at(r).value.size() != 1) throw ShapeMismatch("scalar read of non-scalar node");
    return at(r).value[0];
}

Matrix Tape::value_matrix(Ref r) const { return Matrix(at(r).rows, at(r).cols, at(r).value); }

std::vector<std::vector<double>> Tape::detached_values() const {
    std::vector<std::vector<double>> out;
    out.reserve(detached_.size());
    for (std::uint32_t id : detached_) out.push_back(nodes_[id].value);
    return out;
}

void Tape::replay_detached(std::vector<std::vector<double>> values) {
    replay_ = std::move(values);
    replay_cursor_ = 0;
    replaying_ = true;
}

GradCheckReport grad_check(const LossBuilder &build, const std::vector<double> &point, double h) {
    std::vector<double> analytic;
    std::vector<std::vector<double>> detached;
    {
        Tape tape;
        Ref p = tape.param(1, point.size(), point);
        Ref loss = build(tape, p);
        tape.backward(loss);
        const auto g = tape.grad(p);
        analytic.assign(g.begin(), g.end());
        detached = tape.detached_values();
    }

    auto eval_at = [&](const std::vector<double> &x) {
        Tape tape;
        tape.replay_detached(detached);
        Ref p = tape.param(1, x.size(), x);
        Ref loss = build(tape, p);
        return tape.value_scalar(loss);
    };

    GradCheckReport report;
    report.worst_margin = -1e300;
    std::vector<double> x = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        x[i] = point[i] + h;
        const double fp = eval_at(x);
        x[i] = point[i] - h;
        const double fm = eval_at(x);
        x[i] = point[i];

        const double numeric = (fp - fm) / (2.0 * h);
        const double diff = std::abs(analytic[i] - numeric);
        const double mag = std::max(std::abs(analytic[i]), std::abs(numeric));
        const double margin = diff - std::max(1e-4 * mag, 1e-7);

        report.max_abs_diff = std::max(report.max_abs_diff, diff);
        report.max_rel_err = std::max(report.max_rel_err, diff / std::max(mag, 1e-7));
        report.worst_margin = std::max(report.worst_margin, margin);
        if (margin > 0.0) report.pass = false;
    }
    return report;
}

} // namespace hetreg::ad
