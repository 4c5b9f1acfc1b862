#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tnf/corpus/text.hpp"

namespace tnf::corpus {

/// Whole-word occurrence counts over a corpus, post-normalization.
struct FreqTable {
    std::map<std::string, std::int64_t> counts;

    std::int64_t total() const;
    std::int64_t count(const std::string& word) const;
};

/// Exact counts. Documents are counted in parallel shards and merged; the
/// result does not depend on the shard layout.
FreqTable count_word_frequencies(const Corpus& corpus);

/// Words whose corpus frequency lies in [lo, hi]. Keys are dense 0..R-1 in
/// lexicographic word order.
class RareWordSet {
public:
    RareWordSet() = default;
    RareWordSet(std::vector<std::string> words, std::vector<std::int64_t> counts);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::optional<int> key(const std::string& word) const;
    bool contains(const std::string& word) const { return index_.contains(word); }

private:
    std::vector<std::string> words_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, int> index_;
};

/// Throws ConfigError when lo < 2 or lo > hi.
RareWordSet select_rare_words(const FreqTable& freq, std::int64_t lo, std::int64_t hi);

// "word\tcount" lines, sorted by word, no header.
void save_freq_table(const FreqTable& freq, const std::filesystem::path& path);
FreqTable load_freq_table(const std::filesystem::path& path);
void save_rare_set(const RareWordSet& rare, const std::filesystem::path& path);
RareWordSet load_rare_set(const std::filesystem::path& path);

}  // namespace tnf::corpus
