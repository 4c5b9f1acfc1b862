#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tnf/corpus/rare.hpp"

namespace tnf::corpus {

/// Reserved ids. They precede every learned token.
struct SpecialIds {
    static constexpr int pad = 0;
    static constexpr int unk = 1;
    static constexpr int cls = 2;
    static constexpr int sep = 3;
    static constexpr int mask = 4;
    static constexpr int count = 5;
};

inline constexpr const char* kSpecialTokens[SpecialIds::count] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

/// Byte-pair-encoding vocabulary over UTF-8 code points.
///
/// ids: 0..4 specials, then the base characters in byte order, then one
/// token per merge in merge order. Dense 0..V-1.
class SubwordVocab {
public:
    using Merge = std::pair<std::string, std::string>;

    SubwordVocab() = default;
    SubwordVocab(std::vector<std::string> base_chars, std::vector<Merge> merges);

    int size() const { return static_cast<int>(tokens_.size()); }
    int first_learned() const { return SpecialIds::count; }
    int learned_count() const { return size() - SpecialIds::count; }
    bool is_special(int id) const { return id < SpecialIds::count; }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int id_of(const std::string& token) const;  // -1 when absent
    const std::vector<std::string>& base_chars() const { return base_; }
    const std::vector<Merge>& merges() const { return merges_; }

    /// Apply the merge list greedily by rank. Characters missing from the
    /// base alphabet become [UNK] and never merge.
    std::vector<int> encode_word(std::string_view word) const;

    void save(const std::filesystem::path& path) const;
    static SubwordVocab load(const std::filesystem::path& path);

    friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
        return a.base_ == b.base_ && a.merges_ == b.merges_;
    }

private:
    std::vector<std::string> base_;
    std::vector<Merge> merges_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> token_to_id_;
    std::map<Merge, int> merge_rank_;
};

/// Learn merges from whole-word counts: repeatedly merge the most frequent
/// adjacent pair (ties: lexicographically smallest (left, right)) until the
/// learned token count reaches vocab_size or no pair remains.
///
/// vocab_size counts learned tokens (base characters + merges); specials are
/// added on top. Throws DataError on an empty table and ConfigError when
/// vocab_size does not exceed the base alphabet.
SubwordVocab train_bpe(const FreqTable& words, int vocab_size);
SubwordVocab train_bpe(const Corpus& corpus, int vocab_size);

}  // namespace tnf::corpus
