#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tnf::trainer {

/// Linear warmup 0 -> peak over `warmup` steps, then linear decay to 0 at
/// `total`. Steps at or beyond `total` give 0.
double lr_schedule(std::int64_t step, double peak, std::int64_t warmup, std::int64_t total);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 0.0;  // decoupled
};

/// Adam with bias correction and decoupled weight decay:
///   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

    /// Throws NumericError (and changes nothing) if any gradient is non-finite.
    void step(std::span<double> params, std::span<const double> grads, double lr);

    const AdamConfig& config() const { return cfg_; }
    std::int64_t steps() const { return t_; }
    const std::vector<double>& m() const { return m_; }
    const std::vector<double>& v() const { return v_; }
    void restore(std::int64_t t, std::vector<double> m, std::vector<double> v);

    friend bool operator==(const Adam&, const Adam&) = default;

private:
    AdamConfig cfg_{};
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

inline bool operator==(const AdamConfig& a, const AdamConfig& b) {
    return a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps && a.weight_decay == b.weight_decay;
}

}  // namespace tnf::trainer
