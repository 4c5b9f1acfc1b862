#include "tnf/trainer/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace tnf::trainer {

std::vector<double> cross_entropy_rows(const nn::Matrix& logits, std::span<const int> targets, nn::Matrix* d_logits,
                                       double scale) {
    if (targets.size() != logits.rows()) throw std::invalid_argument("cross_entropy_rows: row/target count mismatch");
    if (d_logits) *d_logits = nn::Matrix(logits.rows(), logits.cols());
    std::vector<double> out(logits.rows(), 0.0);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (targets[r] < 0) continue;
        auto z = logits.row(r);
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        out[r] = lse - z[static_cast<std::size_t>(targets[r])];
        if (d_logits) {
            auto g = d_logits->row(r);
            for (std::size_t c = 0; c < z.size(); ++c) g[c] = scale * std::exp(z[c] - lse);
            g[static_cast<std::size_t>(targets[r])] -= scale;
        }
    }
    return out;
}

MlmLoss mlm_loss(const nn::Matrix& logits, std::span<const int> targets) {
    const auto rows = cross_entropy_rows(logits, targets, nullptr, 1.0);
    MlmLoss l;
    double sum = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (targets[r] < 0) continue;
        sum += rows[r];
        ++l.count;
    }
    l.empty = l.count == 0;
    l.loss = l.empty ? 0.0 : sum / static_cast<double>(l.count);
    return l;
}

std::vector<double> bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels,
                                    std::span<double> d_logits, double scale) {
    if (labels.size() != logits.size()) throw std::invalid_argument("bce_with_logits: size mismatch");
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = labels[i] ? 1.0 : 0.0;
        // log(1 + e^z) - y z, stable for both signs.
        out[i] = std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
        if (!d_logits.empty()) {
            const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            d_logits[i] = scale * (s - y);
        }
    }
    return out;
}

}  // namespace tnf::trainer
