#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hetreg/errors.hpp"

namespace hetreg {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam. Tensors register once; begin_step() advances
/// the shared bias-correction step count.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    std::size_t register_tensor(std::size_t size) {
        m_.emplace_back(size, 0.0);
        v_.emplace_back(size, 0.0);
        return m_.size() - 1;
    }

    /// Re-slots a tensor after a head swap; moments restart at zero.
    void replace_tensor(std::size_t slot, std::size_t size) {
        if (slot >= m_.size()) throw Error("unregistered optimizer slot");
        m_[slot].assign(size, 0.0);
        v_[slot].assign(size, 0.0);
    }

    void begin_step() { ++t_; }
    std::size_t step_count() const noexcept { return t_; }
    const AdamWConfig &config() const noexcept { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    void update(std::size_t slot, std::span<double> param, std::span<const double> grad);

private:
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

} // namespace hetreg
