#pragma once

#include <cstdint>
#include <vector>

#include "tnf/common.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/corpus/vocab.hpp"

namespace tnf::masking {

inline constexpr int kNoTarget = -1;

enum class MaskCategory : std::uint8_t { none = 0, mask = 1, random = 2, keep = 3 };

struct MaskingPolicy {
    double rate = 0.15;
    double mask_prob = 0.8;
    double random_prob = 0.1;  // remainder is kept unchanged
    bool all_mask = false;     // generator-style: every selected position -> [MASK]
};

struct MaskedSequence {
    std::vector<int> original_ids;
    std::vector<int> input_ids;
    std::vector<int> target_ids;  // original id where masked, kNoTarget elsewhere
    std::vector<std::uint8_t> mask_flags;
    std::vector<MaskCategory> categories;
    std::vector<corpus::WordSpan> spans;
    bool nothing_masked = true;

    int size() const { return static_cast<int>(input_ids.size()); }
    std::vector<int> masked_positions() const;
};

/// Uniform over learned (non-special) tokens.
int sample_replacement_token(Rng& rng, const corpus::SubwordVocab& vocab);
int sample_replacement_token(Rng& rng, int vocab_size);

/// Whole-word masking. Words are visited in a random order and selected
/// until the selected token count reaches rate*n (n = maskable tokens); the
/// word that would cross the budget is taken with probability
/// (budget - count) / length, so the expected count is exactly rate*n. One
/// 80/10/10 category is drawn per selected word; random replacement draws an
/// independent token for each position of the word.
MaskedSequence apply_whole_word_masking(const corpus::TokenizedSequence& seq, Rng& rng, const MaskingPolicy& policy,
                                        int vocab_size);

}  // namespace tnf::masking
