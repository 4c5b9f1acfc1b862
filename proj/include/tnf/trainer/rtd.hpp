#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnf/masking.hpp"
#include "tnf/nn/encoder.hpp"
#include "tnf/trainer/pretrain.hpp"

namespace tnf::trainer {

struct RtdSeeds {
    std::uint64_t mask = 0;
    std::uint64_t gen_dropout = 0;
    std::uint64_t sample = 0;
    std::uint64_t disc_dropout = 0;

    /// Seeds of batch slot `slot` at `step`; also used by the MLM step.
    static RtdSeeds for_slot(std::uint64_t seed, std::int64_t step, int slot);
};

/// Generator half of an RTD example: all-[MASK] whole-word masking, the
/// generator's (never blended) input and forward, and the corrupted sequence
/// built from tokens sampled at the masked positions.
struct RtdConstruction {
    masking::MaskedSequence masked;
    nn::Matrix gen_input;
    nn::ForwardTape gen_tape;
    std::vector<int> positions;
    nn::Matrix gen_logits;
    std::vector<int> corrupted;
    std::vector<std::uint8_t> replaced;  // corrupted[i] != original[i]
};

RtdConstruction construct_rtd(const PretrainState& state, const Sample& sample, const RtdSeeds& seeds, double dropout);

/// Draw from softmax(logits).
int sample_from_logits(std::span<const double> logits, Rng& rng);

}  // namespace tnf::trainer
