#pragma once

#include <cstdint>
#include <filesystem>

#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/synthetic.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"
#include "tnf/trainer/run.hpp"

namespace tnf::test {

struct SyntheticData {
    corpus::SyntheticCorpus synth;
    trainer::PretrainData data;
    std::vector<corpus::ProbeSequence> probe_train, probe_test;
};

/// Synthetic corpus -> BPE -> rare band -> packed datasets.
inline SyntheticData make_synthetic_data(const corpus::SyntheticConfig& sc, int bpe_size, std::int64_t lo,
                                         std::int64_t hi, int max_len) {
    SyntheticData d;
    d.synth = corpus::generate_synthetic(sc);
    const auto train = corpus::parse_corpus(d.synth.train_text);
    const auto valid = corpus::parse_corpus(d.synth.valid_text);
    const auto freq = corpus::count_word_frequencies(train);
    d.data.vocab = corpus::train_bpe(freq, bpe_size);
    d.data.rare = corpus::select_rare_words(freq, lo, hi);
    d.data.train = trainer::build_dataset(train, d.data.vocab, d.data.rare, max_len);
    d.data.valid = trainer::build_dataset(valid, d.data.vocab, d.data.rare, max_len);
    for (const auto& ex : d.synth.probe_train) d.probe_train.push_back(corpus::tokenize_probe(ex, d.data.vocab));
    for (const auto& ex : d.synth.probe_test) d.probe_test.push_back(corpus::tokenize_probe(ex, d.data.vocab));
    return d;
}

/// About 20k words with 12 planted rare words; builds in well under a second.
inline const SyntheticData& tiny_data() {
    static const SyntheticData d = [] {
        corpus::SyntheticConfig sc;
        sc.target_words = 20000;
        sc.rare_words = 12;
        sc.common_words = 200;
        sc.attributes = 8;
        return make_synthetic_data(sc, 300, 10, 50, 32);
    }();
    return d;
}

/// Small model matching tiny_data().
inline trainer::TrainConfig tiny_config() {
    trainer::TrainConfig c;
    c.steps = 20;
    c.batch = 4;
    c.warmup = 2;
    c.lr = 1e-3;
    c.layers = 1;
    c.d_model = 16;
    c.heads = 2;
    c.ffn_dim = 32;
    c.max_len = 32;
    c.eval_every = 10;
    c.eval_samples = 16;
    c.note = {2, 0.5, 0.1};
    return c;
}

}  // namespace tnf::test
