#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnf/nn/matrix.hpp"

namespace tnf::trainer {

/// Per-row cross entropy of softmax(logits[r]) against targets[r]. When
/// d_logits is non-null it receives scale * (softmax - onehot).
std::vector<double> cross_entropy_rows(const nn::Matrix& logits, std::span<const int> targets, nn::Matrix* d_logits,
                                       double scale);

struct MlmLoss {
    double loss = 0.0;   // mean over rows with target >= 0
    std::size_t count = 0;
    bool empty = true;   // no target: loss reported as 0
};

/// Mean cross entropy over rows whose target is >= 0.
MlmLoss mlm_loss(const nn::Matrix& logits, std::span<const int> targets);

/// Per-position binary cross entropy with logits; labels are 0/1. Writes
/// scale * (sigmoid(z) - y) into d_logits when non-empty.
std::vector<double> bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels,
                                    std::span<double> d_logits, double scale);

}  // namespace tnf::trainer
