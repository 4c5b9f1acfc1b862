#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"
#include "tnf/notes.hpp"

namespace tnf::trainer {

/// One packed training sample with its rare-word occurrences (pre-masking
/// word spans) and which of its sentences contain a rare word.
struct Sample {
    corpus::TokenizedSequence seq;
    std::vector<notes::RareOccurrence> occurrences;
    std::vector<std::uint8_t> sentence_rare;  // parallel to seq.sentences

    bool has_rare() const { return !occurrences.empty(); }
};

struct Dataset {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Occurrences of rare-set words among whole spans. Keys are rare-set keys,
/// which are also the note dictionary keys.
std::vector<notes::RareOccurrence> find_rare_occurrences(std::span<const corpus::WordSpan> spans,
                                                         const corpus::RareWordSet& rare);

Sample make_sample(corpus::TokenizedSequence seq, const corpus::RareWordSet& rare);

/// Tokenize, pack to max_len and annotate.
Dataset build_dataset(const corpus::Corpus& corpus, const corpus::SubwordVocab& vocab, const corpus::RareWordSet& rare,
                      int max_len);

/// Sample order: epoch e visits a permutation drawn from (seed, e). Entry
/// `global` is sample perm_e[global % N] with e = global / N.
class BatchOrder {
public:
    BatchOrder(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}
    std::size_t at(std::int64_t global) const;

private:
    std::size_t n_;
    std::uint64_t seed_;
    mutable std::mutex mu_;
    mutable std::int64_t epoch_ = -1;
    mutable std::vector<std::size_t> perm_;
};

}  // namespace tnf::trainer
