#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"

namespace tnf::corpus {

/// Token range [begin, end) that came from one source word. `whole` is false
/// for the pieces of a word that a packing cut split in two.
struct WordSpan {
    std::string word;
    int begin = 0;
    int end = 0;
    bool whole = true;

    int length() const { return end - begin; }
    friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

/// Origin sentence of a token range inside a (possibly packed) sequence.
struct SentenceBound {
    int begin = 0;
    int end = 0;
    std::int64_t source = 0;  // index of the sentence in canonical corpus order
    friend bool operator==(const SentenceBound&, const SentenceBound&) = default;
};

struct TokenizedSequence {
    std::vector<int> ids;
    std::vector<WordSpan> spans;
    std::vector<SentenceBound> sentences;

    int size() const { return static_cast<int>(ids.size()); }
    friend bool operator==(const TokenizedSequence&, const TokenizedSequence&) = default;
};

TokenizedSequence tokenize(const Sentence& words, const SubwordVocab& vocab, std::int64_t source = 0);
/// Normalizes and splits `text` into words first.
TokenizedSequence tokenize(std::string_view text, const SubwordVocab& vocab);

/// Concatenated token strings of one span.
std::string detokenize_span(const TokenizedSequence& seq, const WordSpan& span, const SubwordVocab& vocab);

/// Tokenize every sentence of a corpus, in canonical order.
std::vector<TokenizedSequence> tokenize_corpus(const Corpus& corpus, const SubwordVocab& vocab);

/// True when the spans are sorted, disjoint, and cover exactly the
/// non-special positions.
bool spans_tile_sequence(const TokenizedSequence& seq, const SubwordVocab& vocab);

/// FULL-SENTENCES packing: consecutive sentences, each followed by [SEP],
/// are concatenated while the total stays <= max_len. A sentence longer than
/// max_len-1 tokens is cut into (max_len-1)-token pieces first. Spans and
/// sentence bounds are re-indexed into packed coordinates.
std::vector<TokenizedSequence> pack_sequences(const std::vector<TokenizedSequence>& sentences, int max_len);

struct StatsReport {
    std::int64_t sentences = 0;
    std::int64_t rare_sentences = 0;
    std::int64_t samples = 0;
    std::int64_t rare_samples = 0;
    std::int64_t tokens = 0;       // non-special
    std::int64_t rare_tokens = 0;  // inside whole rare-word spans

    double sentence_fraction() const { return sentences ? double(rare_sentences) / double(sentences) : 0.0; }
    double sample_fraction() const { return samples ? double(rare_samples) / double(samples) : 0.0; }
    double rare_token_mass() const { return tokens ? double(rare_tokens) / double(tokens) : 0.0; }
};

StatsReport corpus_rare_stats(const std::vector<TokenizedSequence>& sentences, const RareWordSet& rare, int max_len);

}  // namespace tnf::corpus
