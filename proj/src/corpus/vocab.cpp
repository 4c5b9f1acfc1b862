#include "tnf/corpus/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tnf/common.hpp"

namespace tnf::corpus {

namespace {

constexpr const char* kVocabMagic = "tnf-vocab";
constexpr int kVocabVersion = 1;

}  // namespace

SubwordVocab::SubwordVocab(std::vector<std::string> base_chars, std::vector<Merge> merges)
    : base_(std::move(base_chars)), merges_(std::move(merges)) {
    for (const char* s : kSpecialTokens) tokens_.emplace_back(s);
    for (const auto& c : base_) tokens_.push_back(c);
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        tokens_.push_back(merges_[r].first + merges_[r].second);
        merge_rank_.emplace(merges_[r], static_cast<int>(r));
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        // A merge may reproduce an existing string; the first id wins.
        token_to_id_.emplace(tokens_[i], static_cast<int>(i));
    }
}

int SubwordVocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

std::vector<int> SubwordVocab::encode_word(std::string_view word) const {
    struct Piece {
        std::string text;
        bool unknown;
    };
    std::vector<Piece> pieces;
    for (auto& u : utf8_units(word)) {
        const bool known = std::binary_search(base_.begin(), base_.end(), u);
        pieces.push_back({std::move(u), !known});
    }
    while (pieces.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best_at = 0;
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
            if (pieces[i].unknown || pieces[i + 1].unknown) continue;
            auto it = merge_rank_.find(Merge{pieces[i].text, pieces[i + 1].text});
            if (it != merge_rank_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_at = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        pieces[best_at].text += pieces[best_at + 1].text;
        pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
    }
    std::vector<int> ids;
    ids.reserve(pieces.size());
    for (const auto& p : pieces) ids.push_back(p.unknown ? SpecialIds::unk : id_of(p.text));
    return ids;
}

void SubwordVocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << kVocabMagic << '\t' << kVocabVersion << '\n';
    out << "specials\t" << SpecialIds::count << '\n';
    for (const auto& c : base_) out << "base\t" << c << '\n';
    for (const auto& [a, b] : merges_) out << "merge\t" << a << '\t' << b << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty vocab file " + path.string());
    if (line != std::string(kVocabMagic) + "\t" + std::to_string(kVocabVersion)) {
        throw DataError("unsupported vocab header '" + line + "' in " + path.string());
    }
    std::vector<std::string> base;
    std::vector<Merge> merges;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            auto tab = line.find('\t', pos);
            f.push_back(line.substr(pos, tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (f[0] == "specials" && f.size() == 2) {
            if (std::stoi(f[1]) != SpecialIds::count) throw DataError("vocab special count mismatch");
        } else if (f[0] == "base" && f.size() == 2) {
            base.push_back(f[1]);
        } else if (f[0] == "merge" && f.size() == 3) {
            merges.emplace_back(f[1], f[2]);
        } else {
            throw DataError("malformed vocab line: " + line);
        }
    }
    return SubwordVocab(std::move(base), std::move(merges));
}

namespace {

using Pair = std::pair<int, int>;

class PairTable {
public:
    explicit PairTable(const std::vector<std::string>& tokens) : order_(Cmp{&tokens, &counts_}) {}

    void add(Pair p, std::int64_t delta) {
        auto it = counts_.find(p);
        if (it != counts_.end()) {
            order_.erase(p);
            it->second += delta;
            if (it->second <= 0) {
                counts_.erase(it);
                return;
            }
        } else {
            if (delta <= 0) return;
            counts_.emplace(p, delta);
        }
        order_.insert(p);
    }

    bool empty() const { return order_.empty(); }
    Pair best() const { return *order_.begin(); }

private:
    struct Cmp {
        const std::vector<std::string>* tokens;
        const std::map<Pair, std::int64_t>* counts;
        bool operator()(const Pair& x, const Pair& y) const {
            const auto cx = counts->at(x);
            const auto cy = counts->at(y);
            if (cx != cy) return cx > cy;
            const auto& t = *tokens;
            if (t[x.first] != t[y.first]) return t[x.first] < t[y.first];
            if (t[x.second] != t[y.second]) return t[x.second] < t[y.second];
            return x < y;  // distinct ids may spell the same string
        }
    };
    std::map<Pair, std::int64_t> counts_;
    std::set<Pair, Cmp> order_;
};

}  // namespace

SubwordVocab train_bpe(const FreqTable& words, int vocab_size) {
    if (words.counts.empty()) throw DataError("train_bpe: corpus is empty");

    std::set<std::string> alphabet;
    std::vector<std::vector<std::string>> spelled;
    std::vector<std::int64_t> freq;
    for (const auto& [w, c] : words.counts) {
        auto units = utf8_units(w);
        alphabet.insert(units.begin(), units.end());
        spelled.push_back(std::move(units));
        freq.push_back(c);
    }
    std::vector<std::string> base(alphabet.begin(), alphabet.end());
    if (vocab_size <= static_cast<int>(base.size())) {
        throw ConfigError("vocab_size " + std::to_string(vocab_size) + " must exceed the base alphabet size " +
                          std::to_string(base.size()));
    }

    // Working token table: learned tokens only, index = learned id.
    std::vector<std::string> tokens = base;
    std::map<std::string, int> base_id;
    for (std::size_t i = 0; i < base.size(); ++i) base_id.emplace(base[i], static_cast<int>(i));

    std::vector<std::vector<int>> syms(spelled.size());
    for (std::size_t w = 0; w < spelled.size(); ++w) {
        for (const auto& u : spelled[w]) syms[w].push_back(base_id.at(u));
    }

    PairTable table(tokens);
    std::map<Pair, std::set<std::size_t>> where;
    auto contribute = [&](std::size_t w, int sign) {
        const auto& s = syms[w];
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            const Pair p{s[i], s[i + 1]};
            table.add(p, sign * freq[w]);
            if (sign > 0) {
                where[p].insert(w);
            } else if (auto it = where.find(p); it != where.end()) {
                it->second.erase(w);
                if (it->second.empty()) where.erase(it);
            }
        }
    };
    for (std::size_t w = 0; w < syms.size(); ++w) contribute(w, +1);

    std::vector<SubwordVocab::Merge> merges;
    while (static_cast<int>(tokens.size()) < vocab_size && !table.empty()) {
        const Pair best = table.best();
        const int merged = static_cast<int>(tokens.size());
        merges.emplace_back(tokens[static_cast<std::size_t>(best.first)], tokens[static_cast<std::size_t>(best.second)]);
        tokens.push_back(merges.back().first + merges.back().second);

        const std::set<std::size_t> affected = where.at(best);
        for (std::size_t w : affected) {
            contribute(w, -1);
            auto& s = syms[w];
            std::vector<int> next;
            next.reserve(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(s[i]);
                }
            }
            s = std::move(next);
            contribute(w, +1);
        }
    }
    return SubwordVocab(std::move(base), std::move(merges));
}

SubwordVocab train_bpe(const Corpus& corpus, int vocab_size) {
    return train_bpe(count_word_frequencies(corpus), vocab_size);
}

}  // namespace tnf::corpus
