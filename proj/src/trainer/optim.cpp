#include "tnf/trainer/optim.hpp"

#include <cmath>
#include <string>

#include "tnf/common.hpp"

namespace tnf::trainer {

double lr_schedule(std::int64_t step, double peak, std::int64_t warmup, std::int64_t total) {
    if (step < 0 || step >= total) return 0.0;
    if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

void Adam::step(std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("non-finite gradient at parameter index " + std::to_string(i) + "; step rejected");
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double decay = 1.0 - lr * cfg_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        params[i] = params[i] * decay - lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

void Adam::restore(std::int64_t t, std::vector<double> m, std::vector<double> v) {
    if (m.size() != v.size()) throw DataError("Adam state: moment sizes differ");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace tnf::trainer
