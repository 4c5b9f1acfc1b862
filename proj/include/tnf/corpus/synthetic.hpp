#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tnf/corpus/sequence.hpp"

namespace tnf::corpus {

/// Generator for a corpus with planted rare words.
///
/// Common words follow a sparse first-order Markov chain over a Zipfian
/// unigram distribution. Every planted rare word w owns a hidden attribute
/// word a(w); each sentence that contains w contains the bigram "w a(w)".
/// A masked a(w) is therefore only predictable from the identity of w, which
/// is exactly the signal a note dictionary can carry across sentences.
struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::int64_t target_words = 1'000'000;
    int common_words = 600;
    int attributes = 24;
    int rare_words = 600;
    int rare_min = 14;  // occurrences per planted word, whole corpus
    int rare_max = 40;
    int sentence_min = 8;
    int sentence_max = 16;
    int successors = 6;
    double follow_prob = 0.7;
    double zipf_exponent = 1.0;
    int sentences_per_doc = 20;
    double valid_fraction = 0.05;
    int probe_per_word = 2;
};

struct PlantedWord {
    std::string word;
    std::string attribute;
    int attribute_index = 0;
};

/// One probe example: normalized words, the literal "[MASK]" stands for the
/// mask token. Label = attribute index parity of the planted word.
struct ProbeExample {
    int label = 0;
    std::vector<std::string> words;
};

struct SyntheticCorpus {
    std::string train_text;
    std::string valid_text;
    std::vector<std::string> attributes;
    std::vector<PlantedWord> planted;
    // Probe train uses even-indexed planted words, probe test the odd ones.
    std::vector<ProbeExample> probe_train;
    std::vector<ProbeExample> probe_test;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

/// Writes train.txt, valid.txt, planted.tsv, probe_train.tsv, probe_test.tsv.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

std::vector<ProbeExample> load_probe(const std::filesystem::path& path);

struct ProbeSequence {
    int label = 0;
    TokenizedSequence seq;
};

/// Tokenize a probe example, mapping "[MASK]" to the mask id and appending [SEP].
ProbeSequence tokenize_probe(const ProbeExample& ex, const SubwordVocab& vocab);

}  // namespace tnf::corpus
