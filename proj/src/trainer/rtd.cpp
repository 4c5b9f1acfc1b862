#include "tnf/trainer/rtd.hpp"

#include <cmath>

namespace tnf::trainer {

RtdSeeds RtdSeeds::for_slot(std::uint64_t seed, std::int64_t step, int slot) {
    return RtdSeeds{derive_seed(seed, step, slot, 1), derive_seed(seed, step, slot, 4), derive_seed(seed, step, slot, 3),
                    derive_seed(seed, step, slot, 2)};
}

int sample_from_logits(std::span<const double> logits, Rng& rng) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : logits) total += std::exp(v - mx);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        u -= std::exp(logits[i] - mx);
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(logits.size() - 1);
}

RtdConstruction construct_rtd(const PretrainState& st, const Sample& s, const RtdSeeds& seeds, double dropout) {
    if (!st.generator) throw std::logic_error("construct_rtd: state has no generator");
    const auto& G = *st.generator;
    auto policy = st.config.masking_policy();
    policy.all_mask = true;
    RtdConstruction c;
    Rng mask_rng(seeds.mask);
    c.masked = masking::apply_whole_word_masking(s.seq, mask_rng, policy, st.vocab_size());
    c.gen_input = nn::embed(G, c.masked.input_ids);
    c.gen_tape = nn::forward(G, c.gen_input, nn::ForwardOptions{dropout, seeds.gen_dropout, {}});
    c.positions = c.masked.masked_positions();
    c.corrupted = c.masked.original_ids;
    if (!c.positions.empty()) {
        c.gen_logits = nn::mlm_logits(G, c.gen_tape.output, c.positions);
        Rng sample_rng(seeds.sample);
        for (std::size_t r = 0; r < c.positions.size(); ++r) {
            c.corrupted[static_cast<std::size_t>(c.positions[r])] = sample_from_logits(c.gen_logits.row(r), sample_rng);
        }
    }
    c.replaced.resize(c.corrupted.size());
    for (std::size_t i = 0; i < c.corrupted.size(); ++i) c.replaced[i] = c.corrupted[i] != c.masked.original_ids[i];
    return c;
}

}  // namespace tnf::trainer
