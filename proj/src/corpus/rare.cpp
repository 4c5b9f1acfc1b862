#include "tnf/corpus/rare.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "tnf/common.hpp"

namespace tnf::corpus {

std::int64_t FreqTable::total() const {
    std::int64_t t = 0;
    for (const auto& [w, c] : counts) t += c;
    return t;
}

std::int64_t FreqTable::count(const std::string& word) const {
    auto it = counts.find(word);
    return it == counts.end() ? 0 : it->second;
}

FreqTable count_word_frequencies(const Corpus& corpus) {
    const auto n_docs = static_cast<std::int64_t>(corpus.documents.size());
    FreqTable table;
#pragma omp parallel
    {
        std::unordered_map<std::string, std::int64_t> local;
#pragma omp for schedule(static) nowait
        for (std::int64_t d = 0; d < n_docs; ++d) {
            for (const auto& sentence : corpus.documents[static_cast<std::size_t>(d)].sentences) {
                for (const auto& w : sentence) ++local[w];
            }
        }
#pragma omp critical(tnf_freq_merge)
        for (const auto& [w, c] : local) table.counts[w] += c;
    }
    return table;
}

RareWordSet::RareWordSet(std::vector<std::string> words, std::vector<std::int64_t> counts)
    : words_(std::move(words)), counts_(std::move(counts)) {
    if (counts_.size() != words_.size()) throw DataError("rare set: words/counts length mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (i > 0 && !(words_[i - 1] < words_[i])) throw DataError("rare set: words must be sorted and unique");
        index_.emplace(words_[i], static_cast<int>(i));
    }
}

std::optional<int> RareWordSet::key(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

RareWordSet select_rare_words(const FreqTable& freq, std::int64_t lo, std::int64_t hi) {
    if (lo < 2) throw ConfigError("rare.lo must be >= 2 (a once-seen word has no cross-sentence signal)");
    if (lo > hi) throw ConfigError("rare.lo must be <= rare.hi");
    std::vector<std::string> words;
    std::vector<std::int64_t> counts;
    // std::map iteration is already lexicographic.
    for (const auto& [w, c] : freq.counts) {
        if (c >= lo && c <= hi) {
            words.push_back(w);
            counts.push_back(c);
        }
    }
    return RareWordSet(std::move(words), std::move(counts));
}

namespace {

void write_pairs(const std::filesystem::path& path, auto begin_end) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    begin_end(out);
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::pair<std::string, std::int64_t>> read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::pair<std::string, std::int64_t>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>count");
        }
        try {
            rows.emplace_back(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad count");
        }
    }
    return rows;
}

}  // namespace

void save_freq_table(const FreqTable& freq, const std::filesystem::path& path) {
    write_pairs(path, [&](std::ostream& out) {
        for (const auto& [w, c] : freq.counts) out << w << '\t' << c << '\n';
    });
}

FreqTable load_freq_table(const std::filesystem::path& path) {
    FreqTable t;
    for (auto& [w, c] : read_pairs(path)) t.counts[w] += c;
    return t;
}

void save_rare_set(const RareWordSet& rare, const std::filesystem::path& path) {
    write_pairs(path, [&](std::ostream& out) {
        for (std::size_t i = 0; i < rare.size(); ++i) out << rare.words()[i] << '\t' << rare.counts()[i] << '\n';
    });
}

RareWordSet load_rare_set(const std::filesystem::path& path) {
    std::vector<std::string> words;
    std::vector<std::int64_t> counts;
    for (auto& [w, c] : read_pairs(path)) {
        words.push_back(std::move(w));
        counts.push_back(c);
    }
    return RareWordSet(std::move(words), std::move(counts));
}

}  // namespace tnf::corpus
