#include "tnf/trainer/data.hpp"

#include <numeric>

namespace tnf::trainer {

std::vector<notes::RareOccurrence> find_rare_occurrences(std::span<const corpus::WordSpan> spans,
                                                         const corpus::RareWordSet& rare) {
    std::vector<notes::RareOccurrence> out;
    if (rare.empty()) return out;
    for (const auto& s : spans) {
        if (!s.whole) continue;
        if (auto key = rare.key(s.word)) out.push_back({*key, s.begin, s.end});
    }
    return out;
}

Sample make_sample(corpus::TokenizedSequence seq, const corpus::RareWordSet& rare) {
    Sample s;
    s.occurrences = find_rare_occurrences(seq.spans, rare);
    s.sentence_rare.assign(seq.sentences.size(), 0);
    for (const auto& o : s.occurrences) {
        for (std::size_t i = 0; i < seq.sentences.size(); ++i) {
            if (o.begin >= seq.sentences[i].begin && o.begin < seq.sentences[i].end) s.sentence_rare[i] = 1;
        }
    }
    s.seq = std::move(seq);
    return s;
}

Dataset build_dataset(const corpus::Corpus& corpus, const corpus::SubwordVocab& vocab, const corpus::RareWordSet& rare,
                      int max_len) {
    auto packed = corpus::pack_sequences(corpus::tokenize_corpus(corpus, vocab), max_len);
    Dataset ds;
    ds.samples.resize(packed.size());
    const auto n = static_cast<std::int64_t>(packed.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        ds.samples[k] = make_sample(std::move(packed[k]), rare);
    }
    return ds;
}

std::size_t BatchOrder::at(std::int64_t global) const {
    if (n_ == 0) throw DataError("training split is empty");
    const auto n = static_cast<std::int64_t>(n_);
    const std::int64_t epoch = global / n;
    std::lock_guard lock(mu_);
    if (epoch != epoch_) {
        perm_.resize(n_);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        Rng rng(derive_seed(seed_, epoch));
        rng.shuffle(std::span<std::size_t>(perm_));
        epoch_ = epoch;
    }
    return perm_[static_cast<std::size_t>(global % n)];
}

}  // namespace tnf::trainer
