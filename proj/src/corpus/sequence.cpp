#include "tnf/corpus/sequence.hpp"

#include "tnf/common.hpp"

namespace tnf::corpus {

TokenizedSequence tokenize(const Sentence& words, const SubwordVocab& vocab, std::int64_t source) {
    TokenizedSequence seq;
    for (const auto& w : words) {
        const int begin = seq.size();
        for (int id : vocab.encode_word(w)) seq.ids.push_back(id);
        seq.spans.push_back(WordSpan{w, begin, seq.size(), true});
    }
    if (!seq.ids.empty()) seq.sentences.push_back(SentenceBound{0, seq.size(), source});
    return seq;
}

TokenizedSequence tokenize(std::string_view text, const SubwordVocab& vocab) {
    return tokenize(split_words(text), vocab);
}

std::string detokenize_span(const TokenizedSequence& seq, const WordSpan& span, const SubwordVocab& vocab) {
    std::string out;
    for (int i = span.begin; i < span.end; ++i) out += vocab.token(seq.ids[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<TokenizedSequence> tokenize_corpus(const Corpus& corpus, const SubwordVocab& vocab) {
    const auto sentences = corpus.sentences();
    const auto n = static_cast<std::int64_t>(sentences.size());
    std::vector<TokenizedSequence> out(sentences.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = tokenize(*sentences[static_cast<std::size_t>(i)], vocab, i);
    }
    return out;
}

bool spans_tile_sequence(const TokenizedSequence& seq, const SubwordVocab& vocab) {
    std::vector<int> cover(seq.ids.size(), 0);
    int prev_end = 0;
    for (const auto& s : seq.spans) {
        if (s.begin < prev_end || s.begin >= s.end || s.end > seq.size()) return false;
        for (int i = s.begin; i < s.end; ++i) ++cover[static_cast<std::size_t>(i)];
        prev_end = s.end;
    }
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        const int expect = vocab.is_special(seq.ids[i]) && seq.ids[i] != SpecialIds::unk ? 0 : 1;
        if (cover[i] != expect) return false;
    }
    return true;
}

namespace {

// Cut a sentence into pieces of at most `limit` tokens.
std::vector<TokenizedSequence> cut(const TokenizedSequence& s, int limit) {
    if (s.size() <= limit) return {s};
    std::vector<TokenizedSequence> pieces;
    const std::int64_t source = s.sentences.empty() ? 0 : s.sentences.front().source;
    for (int start = 0; start < s.size(); start += limit) {
        const int stop = std::min(start + limit, s.size());
        TokenizedSequence p;
        p.ids.assign(s.ids.begin() + start, s.ids.begin() + stop);
        for (const auto& sp : s.spans) {
            const int b = std::max(sp.begin, start);
            const int e = std::min(sp.end, stop);
            if (b >= e) continue;
            const bool whole = sp.whole && b == sp.begin && e == sp.end;
            p.spans.push_back(WordSpan{sp.word, b - start, e - start, whole});
        }
        p.sentences.push_back(SentenceBound{0, stop - start, source});
        pieces.push_back(std::move(p));
    }
    return pieces;
}

void append(TokenizedSequence& dst, const TokenizedSequence& src) {
    const int offset = dst.size();
    dst.ids.insert(dst.ids.end(), src.ids.begin(), src.ids.end());
    for (auto sp : src.spans) {
        sp.begin += offset;
        sp.end += offset;
        dst.spans.push_back(std::move(sp));
    }
    for (auto sb : src.sentences) {
        sb.begin += offset;
        sb.end += offset;
        dst.sentences.push_back(sb);
    }
    dst.ids.push_back(SpecialIds::sep);
}

}  // namespace

std::vector<TokenizedSequence> pack_sequences(const std::vector<TokenizedSequence>& sentences, int max_len) {
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    std::vector<TokenizedSequence> packed;
    TokenizedSequence cur;
    for (const auto& sentence : sentences) {
        if (sentence.ids.empty()) continue;
        for (const auto& piece : cut(sentence, max_len - 1)) {
            if (!cur.ids.empty() && cur.size() + piece.size() + 1 > max_len) {
                packed.push_back(std::move(cur));
                cur = TokenizedSequence{};
            }
            append(cur, piece);
        }
    }
    if (!cur.ids.empty()) packed.push_back(std::move(cur));
    return packed;
}

namespace {

bool has_rare(const TokenizedSequence& s, const RareWordSet& rare, std::int64_t* rare_tokens) {
    bool any = false;
    for (const auto& sp : s.spans) {
        if (sp.whole && rare.contains(sp.word)) {
            any = true;
            if (rare_tokens) *rare_tokens += sp.length();
        }
    }
    return any;
}

}  // namespace

StatsReport corpus_rare_stats(const std::vector<TokenizedSequence>& sentences, const RareWordSet& rare, int max_len) {
    StatsReport r;
    for (const auto& s : sentences) {
        if (s.ids.empty()) continue;
        ++r.sentences;
        r.tokens += static_cast<std::int64_t>(s.ids.size());
        if (has_rare(s, rare, &r.rare_tokens)) ++r.rare_sentences;
    }
    for (const auto& p : pack_sequences(sentences, max_len)) {
        ++r.samples;
        if (has_rare(p, rare, nullptr)) ++r.rare_samples;
    }
    return r;
}

}  // namespace tnf::corpus
