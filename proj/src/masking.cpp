#include "tnf/masking.hpp"

#include <numeric>

namespace tnf::masking {

using corpus::SpecialIds;

std::vector<int> MaskedSequence::masked_positions() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
        if (mask_flags[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
}

int sample_replacement_token(Rng& rng, int vocab_size) {
    const int learned = vocab_size - SpecialIds::count;
    if (learned <= 0) throw ConfigError("vocabulary has no learned tokens");
    return SpecialIds::count + static_cast<int>(rng.below(static_cast<std::uint64_t>(learned)));
}

int sample_replacement_token(Rng& rng, const corpus::SubwordVocab& vocab) {
    return sample_replacement_token(rng, vocab.size());
}

MaskedSequence apply_whole_word_masking(const corpus::TokenizedSequence& seq, Rng& rng, const MaskingPolicy& policy,
                                        int vocab_size) {
    if (!(policy.rate > 0.0 && policy.rate < 1.0)) throw ConfigError("mask_rate must be in (0,1)");
    MaskedSequence m;
    const auto n_pos = seq.ids.size();
    m.original_ids = seq.ids;
    m.input_ids = seq.ids;
    m.target_ids.assign(n_pos, kNoTarget);
    m.mask_flags.assign(n_pos, 0);
    m.categories.assign(n_pos, MaskCategory::none);
    m.spans = seq.spans;

    std::size_t maskable = 0;
    for (const auto& s : seq.spans) maskable += static_cast<std::size_t>(s.length());
    if (maskable == 0) return m;

    std::vector<std::size_t> order(seq.spans.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    const double budget = policy.rate * static_cast<double>(maskable);
    double count = 0.0;
    std::vector<std::size_t> chosen;
    for (std::size_t idx : order) {
        if (count >= budget) break;
        const auto len = static_cast<double>(seq.spans[idx].length());
        if (count + len <= budget) {
            chosen.push_back(idx);
            count += len;
            continue;
        }
        if (rng.uniform() * len < budget - count) chosen.push_back(idx);
        break;
    }

    for (std::size_t idx : chosen) {
        const auto& span = seq.spans[idx];
        MaskCategory cat = MaskCategory::mask;
        if (!policy.all_mask) {
            const double u = rng.uniform();
            cat = u < policy.mask_prob ? MaskCategory::mask
                  : u < policy.mask_prob + policy.random_prob ? MaskCategory::random
                                                              : MaskCategory::keep;
        }
        for (int i = span.begin; i < span.end; ++i) {
            const auto p = static_cast<std::size_t>(i);
            m.mask_flags[p] = 1;
            m.categories[p] = cat;
            m.target_ids[p] = seq.ids[p];
            if (cat == MaskCategory::mask) m.input_ids[p] = SpecialIds::mask;
            else if (cat == MaskCategory::random) m.input_ids[p] = sample_replacement_token(rng, vocab_size);
        }
    }
    m.nothing_masked = chosen.empty();
    return m;
}

}  // namespace tnf::masking
