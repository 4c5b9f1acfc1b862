#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tnf/common.hpp"
#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/nn/encoder.hpp"
#include "tnf/nn/matrix.hpp"

namespace tnf::notes {

struct NoteConfig {
    int k = 16;           // half window, tokens
    double lambda = 0.5;  // blending weight
    double gamma = 0.1;   // EMA discount

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Rare word `key` spans tokens [begin, end) of a sequence.
struct RareOccurrence {
    int key = 0;
    int begin = 0;
    int end = 0;
    friend bool operator==(const RareOccurrence&, const RareOccurrence&) = default;
};

/// Rare word -> note vector, one row per key.
class NoteDict {
public:
    NoteDict() = default;
    NoteDict(std::vector<std::string> words, nn::Matrix values, std::vector<std::int64_t> counters);

    /// Values drawn N(0, init_std), the token-embedding initializer.
    static NoteDict init(const corpus::RareWordSet& rare, int dim, Rng& rng, double init_std = 0.02);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    int dim() const { return static_cast<int>(values_.cols()); }
    const std::vector<std::string>& words() const { return words_; }
    /// -1 when absent.
    int key(const std::string& word) const;

    std::span<const double> value(int key) const { return values_.row(static_cast<std::size_t>(key)); }
    const nn::Matrix& values() const { return values_; }
    nn::Matrix& mutable_values() { return values_; }
    const std::vector<std::int64_t>& counters() const { return counters_; }

    /// v <- (1 - gamma) v + gamma note. Throws std::out_of_range on an unknown key.
    void update(int key, std::span<const double> note, double gamma);

    friend bool operator==(const NoteDict& a, const NoteDict& b) {
        return a.words_ == b.words_ && a.values_ == b.values_ && a.counters_ == b.counters_;
    }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    nn::Matrix values_;
    std::vector<std::int64_t> counters_;
};

/// Whole-word spans whose word is a dictionary key, in position order.
std::vector<RareOccurrence> find_rare_occurrences(std::span<const corpus::WordSpan> spans, const NoteDict& dict);

/// Mean of c_j over j in [s-k, t+k) clipped to [0, n).
std::vector<double> compute_note(const nn::Matrix& c, const RareOccurrence& occ, int k);

void update_note(NoteDict& dict, int key, std::span<const double> note, double gamma);

struct BlendedInput {
    nn::Matrix input;
    std::vector<double> base_scale;  // d input / d (pos + tok), per row
    std::vector<int> note_key;       // key blended into each row, -1 for none
};

/// Rows inside an occurrence: (1 - lambda)(pos + tok) + lambda note; others
/// pos + tok. Notes are read as constants.
BlendedInput blend_inputs(const nn::EncoderParams& params, std::span<const int> input_ids,
                          std::span<const RareOccurrence> occs, const NoteDict& dict, double lambda);

/// dL/d(note values) for a blended input: lambda times the sum of the input
/// gradient over every row blended with that key. Accumulates into grad (R x d).
void accumulate_note_gradient(const BlendedInput& blend, const nn::Matrix& d_input, double lambda, nn::Matrix& grad);

/// Notes computed during one batch, committed after all forwards.
class NoteUpdateBatch {
public:
    void add(int key, std::vector<double> note) { items_.push_back({key, std::move(note)}); }
    void append(NoteUpdateBatch&& other);
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    /// Apply in insertion order.
    void commit(NoteDict& dict, double gamma) const;

private:
    struct Item {
        int key;
        std::vector<double> note;
    };
    std::vector<Item> items_;
};

}  // namespace tnf::notes
