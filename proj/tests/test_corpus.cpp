#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "test_support.hpp"
#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/corpus/synthetic.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"

using namespace tnf;
using namespace tnf::corpus;

namespace {

// Most frequent adjacent pair over word counts, ties by smallest pair.
std::pair<std::string, std::string> oracle_best_pair(const std::map<std::string, std::int64_t>& words) {
    std::map<std::pair<std::string, std::string>, std::int64_t> counts;
    for (const auto& [w, c] : words) {
        auto u = utf8_units(w);
        for (std::size_t i = 0; i + 1 < u.size(); ++i) counts[{u[i], u[i + 1]}] += c;
    }
    std::pair<std::string, std::string> best;
    std::int64_t best_c = -1;
    for (const auto& [p, c] : counts) {
        if (c > best_c) best = p, best_c = c;
    }
    return best;
}

std::vector<std::string> flatten(const Corpus& c) {
    std::vector<std::string> out;
    for (const auto* s : c.sentences()) out.insert(out.end(), s->begin(), s->end());
    return out;
}

SubwordVocab toy_vocab() {
    // Base {a, b, c, d}; merges "a"+"b" then "ab"+"c".
    return SubwordVocab({"a", "b", "c", "d"}, {{"a", "b"}, {"ab", "c"}});
}

}  // namespace

TEST(Text, NormalizesAndSplitsPunctuation) {
    EXPECT_EQ(split_words("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
    const auto s = split_sentences("One two. Three\nfour");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0], (Sentence{"one", "two", "."}));
    EXPECT_EQ(s[1], (Sentence{"three"}));
    EXPECT_EQ(s[2], (Sentence{"four"}));
}

TEST(Text, BlankLinesSeparateDocuments) {
    const auto c = parse_corpus("a b.\nc\n\n\nd e\n");
    ASSERT_EQ(c.documents.size(), 2u);
    EXPECT_EQ(c.sentence_count(), 3u);
    EXPECT_EQ(c.word_count(), 6u);
}

TEST(Bpe, FirstMergeMatchesPairCountOracle) {
    const auto c = parse_corpus("aaab aaab");
    const auto freq = count_word_frequencies(c);
    const auto v = train_bpe(freq, 3);  // base {a, b} + 1 merge
    ASSERT_EQ(v.merges().size(), 1u);
    EXPECT_EQ(v.merges()[0], (SubwordVocab::Merge{"a", "a"}));
    EXPECT_EQ(v.merges()[0], oracle_best_pair(freq.counts));
}

TEST(Bpe, EveryMergeIsTheGreedyBestPair) {
    SyntheticConfig sc;
    sc.target_words = 3000;
    const auto freq = count_word_frequencies(parse_corpus(generate_synthetic(sc).train_text));
    const auto v = train_bpe(freq, 120);
    // Replay: re-segment every word with the merges so far and recount.
    std::map<std::string, std::int64_t> words = freq.counts;
    std::map<std::string, std::vector<std::string>> seg;
    for (const auto& [w, c] : words) seg[w] = utf8_units(w);
    for (const auto& m : v.merges()) {
        std::map<std::pair<std::string, std::string>, std::int64_t> counts;
        for (const auto& [w, c] : words) {
            const auto& s = seg[w];
            for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[{s[i], s[i + 1]}] += c;
        }
        std::pair<std::string, std::string> best;
        std::int64_t best_c = -1;
        for (const auto& [p, c] : counts) {
            if (c > best_c) best = p, best_c = c;
        }
        ASSERT_EQ(m, best);
        for (auto& [w, s] : seg) {
            std::vector<std::string> next;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (i + 1 < s.size() && s[i] == m.first && s[i + 1] == m.second) {
                    next.push_back(m.first + m.second);
                    ++i;
                } else {
                    next.push_back(s[i]);
                }
            }
            s = std::move(next);
        }
    }
}

TEST(Bpe, SingleCharacterCorpusLearnsNoMerges) {
    const auto v = train_bpe(parse_corpus("b b b"), 5);
    EXPECT_TRUE(v.merges().empty());
    EXPECT_EQ(v.size(), SpecialIds::count + 1);
    EXPECT_EQ(v.token(SpecialIds::count), "b");
}

TEST(Bpe, DeterministicAndDenseIds) {
    const auto c = parse_corpus("low lower lowest newer wider new\nnewest low low");
    const auto a = train_bpe(c, 20), b = train_bpe(c, 20);
    EXPECT_EQ(a.merges(), b.merges());
    for (int id = 0; id < a.size(); ++id) EXPECT_EQ(a.id_of(a.token(id)), id);
    for (int id = 0; id < SpecialIds::count; ++id) EXPECT_TRUE(a.is_special(id));
}

TEST(Bpe, Errors) {
    EXPECT_THROW(train_bpe(FreqTable{}, 10), DataError);
    EXPECT_THROW(train_bpe(parse_corpus("abc"), 3), ConfigError);
}

TEST(Bpe, SaveLoadRoundTrip) {
    const auto dir = test::temp_dir("vocab");
    const auto v = train_bpe(parse_corpus("the cat sat on the mat with the hat"), 20);
    v.save(dir / "vocab.txt");
    EXPECT_EQ(SubwordVocab::load(dir / "vocab.txt"), v);
}

TEST(Tokenize, SpansFollowHandAppliedMerges) {
    const auto v = toy_vocab();
    // "abc" -> [abc]; "abd" -> [ab, d]; "da" -> [d, a].
    const auto seq = tokenize(Sentence{"abc", "abd", "da"}, v);
    const int abc = v.id_of("abc"), ab = v.id_of("ab"), d = v.id_of("d"), a = v.id_of("a");
    EXPECT_EQ(seq.ids, (std::vector<int>{abc, ab, d, d, a}));
    ASSERT_EQ(seq.spans.size(), 3u);
    EXPECT_EQ(seq.spans[0], (WordSpan{"abc", 0, 1, true}));
    EXPECT_EQ(seq.spans[1], (WordSpan{"abd", 1, 3, true}));
    EXPECT_EQ(seq.spans[2], (WordSpan{"da", 3, 5, true}));
    EXPECT_TRUE(spans_tile_sequence(seq, v));
}

TEST(Tokenize, EmptyAndUnknown) {
    const auto v = toy_vocab();
    const auto e = tokenize(std::string_view(""), v);
    EXPECT_TRUE(e.ids.empty());
    EXPECT_TRUE(e.spans.empty());
    const auto u = tokenize(Sentence{"axb"}, v);
    EXPECT_EQ(u.ids, (std::vector<int>{v.id_of("a"), SpecialIds::unk, v.id_of("b")}));
    ASSERT_EQ(u.spans.size(), 1u);
    EXPECT_EQ(u.spans[0].length(), 3);
}

TEST(Tokenize, RoundTripOverCorpus) {
    SyntheticConfig sc;
    sc.target_words = 5000;
    const auto c = parse_corpus(generate_synthetic(sc).train_text);
    const auto v = train_bpe(c, 200);
    const auto seqs = tokenize_corpus(c, v);
    const auto sents = c.sentences();
    ASSERT_EQ(seqs.size(), sents.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        ASSERT_TRUE(spans_tile_sequence(seqs[i], v));
        ASSERT_EQ(seqs[i].spans.size(), sents[i]->size());
        for (std::size_t w = 0; w < seqs[i].spans.size(); ++w) {
            EXPECT_EQ(detokenize_span(seqs[i], seqs[i].spans[w], v), (*sents[i])[w]);
            EXPECT_EQ(seqs[i].spans[w].word, (*sents[i])[w]);
        }
    }
}

TEST(Freq, SmallCountsAndTotal) {
    const auto f = count_word_frequencies(parse_corpus("a b a"));
    EXPECT_EQ(f.counts, (std::map<std::string, std::int64_t>{{"a", 2}, {"b", 1}}));
    EXPECT_EQ(f.total(), 3);
}

TEST(Freq, MatchesSinglePassRecount) {
    SyntheticConfig sc;
    sc.target_words = 10000;
    const auto c = parse_corpus(generate_synthetic(sc).train_text);
    std::map<std::string, std::int64_t> naive;
    for (const auto& w : flatten(c)) ++naive[w];
    const auto f = count_word_frequencies(c);
    EXPECT_EQ(f.counts, naive);
    EXPECT_EQ(f.total(), static_cast<std::int64_t>(c.word_count()));
}

TEST(Rare, BandSelection) {
    FreqTable f;
    f.counts = {{"a", 1}, {"b", 5}, {"c", 50}};
    const auto r = select_rare_words(f, 2, 10);
    EXPECT_EQ(r.words(), (std::vector<std::string>{"b"}));
    EXPECT_EQ(r.key("b"), 0);
    EXPECT_FALSE(r.key("a").has_value());
    EXPECT_THROW(select_rare_words(f, 11, 10), ConfigError);
    EXPECT_THROW(select_rare_words(f, 1, 10), ConfigError);
}

TEST(Rare, MatchesBruteForceFilterWithLexicographicKeys) {
    SyntheticConfig sc;
    sc.target_words = 50000;
    const auto f = count_word_frequencies(parse_corpus(generate_synthetic(sc).train_text));
    const auto r = select_rare_words(f, 10, 50);
    std::vector<std::string> expect;
    for (const auto& [w, c] : f.counts) {
        if (c >= 10 && c <= 50) expect.push_back(w);
    }
    std::sort(expect.begin(), expect.end());
    EXPECT_EQ(r.words(), expect);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(r.key(expect[i]), static_cast<int>(i));
}

TEST(Rare, FilesRoundTripAndLineCount) {
    const auto dir = test::temp_dir("rare");
    FreqTable f;
    f.counts = {{"x", 3}, {"y", 7}, {"z", 70}};
    save_freq_table(f, dir / "freq.tsv");
    EXPECT_EQ(load_freq_table(dir / "freq.tsv").counts, f.counts);
    const auto r = select_rare_words(f, 2, 10);
    save_rare_set(r, dir / "rare.tsv");
    const auto back = load_rare_set(dir / "rare.tsv");
    EXPECT_EQ(back.words(), r.words());
    EXPECT_EQ(back.counts(), r.counts());
    std::ifstream in(dir / "rare.tsv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, r.size());
}

TEST(Pack, TwoShortSentences) {
    const auto v = toy_vocab();
    const auto s1 = tokenize(Sentence{"a", "b", "c", "d", "a"}, v, 0);
    const auto s2 = tokenize(Sentence{"d", "c", "b", "a", "d"}, v, 1);
    const auto packed = pack_sequences({s1, s2}, 16);
    ASSERT_EQ(packed.size(), 1u);
    EXPECT_EQ(packed[0].size(), 12);
    EXPECT_EQ(packed[0].ids[5], SpecialIds::sep);
    EXPECT_EQ(packed[0].ids[11], SpecialIds::sep);
    // Offsets in the second sentence shift by the first piece's length.
    for (std::size_t w = 0; w < s2.spans.size(); ++w) {
        EXPECT_EQ(packed[0].spans[5 + w].begin, s2.spans[w].begin + 6);
        EXPECT_EQ(packed[0].spans[5 + w].end, s2.spans[w].end + 6);
    }
    EXPECT_EQ(packed[0].sentences[1], (SentenceBound{6, 11, 1}));
    EXPECT_TRUE(spans_tile_sequence(packed[0], v));
}

TEST(Pack, LongSentenceIsSplitAndSpansMatchRecomputation) {
    const auto v = toy_vocab();
    // Each "abd" is two tokens, so word boundaries do not align with the cut.
    Sentence words;
    for (int i = 0; i < 9; ++i) words.push_back(i % 3 == 0 ? "abd" : "c");
    const auto seq = tokenize(words, v);
    const int max_len = 6;
    const auto packed = pack_sequences({seq}, max_len);
    std::size_t covered = 0;
    for (const auto& p : packed) {
        ASSERT_LE(p.size(), max_len);
        ASSERT_TRUE(spans_tile_sequence(p, v));
        for (const auto& sp : p.spans) {
            // A whole span re-tokenizes to exactly its token range.
            if (sp.whole) {
                const auto re = tokenize(Sentence{sp.word}, v);
                EXPECT_EQ(std::vector<int>(p.ids.begin() + sp.begin, p.ids.begin() + sp.end), re.ids);
            }
            covered += static_cast<std::size_t>(sp.length());
        }
    }
    EXPECT_EQ(covered, seq.ids.size());
    EXPECT_GT(packed.size(), 1u);
}

TEST(Pack, Deterministic) {
    SyntheticConfig sc;
    sc.target_words = 4000;
    const auto c = parse_corpus(generate_synthetic(sc).train_text);
    const auto v = train_bpe(c, 150);
    const auto seqs = tokenize_corpus(c, v);
    EXPECT_EQ(pack_sequences(seqs, 64), pack_sequences(seqs, 64));
}

TEST(Stats, NoRareWordsGivesZero) {
    const auto v = toy_vocab();
    const auto r = corpus_rare_stats({tokenize(Sentence{"a", "b"}, v)}, RareWordSet{}, 16);
    EXPECT_EQ(r.sentence_fraction(), 0.0);
    EXPECT_EQ(r.sample_fraction(), 0.0);
    EXPECT_EQ(r.rare_token_mass(), 0.0);
}

TEST(Stats, MatchesBruteForceScan) {
    SyntheticConfig sc;
    sc.target_words = 12000;
    const auto c = parse_corpus(generate_synthetic(sc).train_text);
    const auto v = train_bpe(c, 300);
    const auto freq = count_word_frequencies(c);
    std::vector<std::int64_t> all;
    for (const auto& [w, n] : freq.counts) all.push_back(n);
    std::sort(all.begin(), all.end());
    const std::int64_t lo = 2, hi = std::max<std::int64_t>(2, all[all.size() / 3]);
    const auto rare = select_rare_words(freq, lo, hi);
    auto seqs = tokenize_corpus(c, v);
    seqs.resize(std::min<std::size_t>(seqs.size(), 1000));
    const auto r = corpus_rare_stats(seqs, rare, 64);

    std::set<std::string> band;
    for (const auto& [w, n] : freq.counts) {
        if (n >= lo && n <= hi) band.insert(w);
    }
    std::int64_t sent = 0, rs = 0, tok = 0, rtok = 0;
    for (const auto& s : seqs) {
        if (s.ids.empty()) continue;
        ++sent;
        tok += s.size();
        bool any = false;
        for (const auto& sp : s.spans) {
            if (band.count(sp.word)) any = true, rtok += sp.length();
        }
        rs += any;
    }
    std::int64_t samp = 0, rsamp = 0;
    for (const auto& p : pack_sequences(seqs, 64)) {
        ++samp;
        rsamp += std::any_of(p.spans.begin(), p.spans.end(),
                             [&](const WordSpan& sp) { return sp.whole && band.count(sp.word); });
    }
    EXPECT_EQ(r.sentences, sent);
    EXPECT_EQ(r.rare_sentences, rs);
    EXPECT_EQ(r.tokens, tok);
    EXPECT_EQ(r.rare_tokens, rtok);
    EXPECT_EQ(r.samples, samp);
    EXPECT_EQ(r.rare_samples, rsamp);
    EXPECT_GT(rs, 0);
}

TEST(Synthetic, PlantedWordsAreAlwaysFollowedByTheirAttribute) {
    SyntheticConfig sc;
    sc.target_words = 30000;
    sc.rare_words = 40;
    const auto syn = generate_synthetic(sc);
    std::map<std::string, std::string> attr;
    for (const auto& p : syn.planted) attr[p.word] = p.attribute;
    const auto c = parse_corpus(syn.train_text);
    std::size_t hits = 0;
    for (const auto* s : c.sentences()) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            auto it = attr.find((*s)[i]);
            if (it == attr.end()) continue;
            ASSERT_LT(i + 1, s->size());
            EXPECT_EQ((*s)[i + 1], it->second);
            ++hits;
        }
    }
    EXPECT_GT(hits, 0u);
    EXPECT_EQ(generate_synthetic(sc).train_text, syn.train_text);
}
