#include "hetreg/adamw.hpp"

#include <cmath>

namespace hetreg {

void AdamW::update(std::size_t slot, std::span<double> param, std::span<const double> grad) {
    if (slot >= m_.size()) throw Error("unregistered optimizer slot");
    if (param.size() != m_[slot].size() || grad.size() != param.size())
        throw ShapeMismatch("optimizer tensor size mismatch");
    if (t_ == 0) throw Error("begin_step() must run before update()");

    auto &m = m_[slot];
    auto &v = v_[slot];
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * param[i]);
    }
}

} // namespace hetreg
