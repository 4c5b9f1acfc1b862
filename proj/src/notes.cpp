#include "tnf/notes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tnf::notes {

void NoteConfig::validate() const {
    if (k < 0) throw ConfigError("tnf.k: must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("tnf.lambda: must be in [0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("tnf.gamma: must be in (0,1)");
}

NoteDict::NoteDict(std::vector<std::string> words, nn::Matrix values, std::vector<std::int64_t> counters)
    : words_(std::move(words)), values_(std::move(values)), counters_(std::move(counters)) {
    if (values_.rows() != words_.size() || counters_.size() != words_.size()) {
        throw DataError("note dictionary: keys, values and counters disagree in size");
    }
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!index_.emplace(words_[i], static_cast<int>(i)).second) throw DataError("note dictionary: duplicate key");
    }
}

NoteDict NoteDict::init(const corpus::RareWordSet& rare, int dim, Rng& rng, double init_std) {
    nn::Matrix values(rare.size(), static_cast<std::size_t>(dim));
    for (double& v : values.values()) v = rng.normal(0.0, init_std);
    return NoteDict(rare.words(), std::move(values), std::vector<std::int64_t>(rare.size(), 0));
}

int NoteDict::key(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

void NoteDict::update(int key, std::span<const double> note, double gamma) {
    if (key < 0 || static_cast<std::size_t>(key) >= words_.size()) {
        throw std::out_of_range("note dictionary: unknown key " + std::to_string(key));
    }
    if (note.size() != values_.cols()) throw std::invalid_argument("note dictionary: note width mismatch");
    auto v = values_.row(static_cast<std::size_t>(key));
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = (1.0 - gamma) * v[c] + gamma * note[c];
    ++counters_[static_cast<std::size_t>(key)];
}

std::vector<RareOccurrence> find_rare_occurrences(std::span<const corpus::WordSpan> spans, const NoteDict& dict) {
    std::vector<RareOccurrence> out;
    if (dict.empty()) return out;
    for (const auto& s : spans) {
        if (!s.whole) continue;
        const int key = dict.key(s.word);
        if (key >= 0) out.push_back({key, s.begin, s.end});
    }
    return out;
}

std::vector<double> compute_note(const nn::Matrix& c, const RareOccurrence& occ, int k) {
    const int n = static_cast<int>(c.rows());
    const int lo = std::max(0, occ.begin - k);
    const int hi = std::min(n, occ.end + k);
    if (occ.begin < 0 || occ.end > n || occ.begin >= occ.end) throw std::invalid_argument("compute_note: bad span");
    std::vector<double> note(c.cols(), 0.0);
    for (int j = lo; j < hi; ++j) {
        auto row = c.row(static_cast<std::size_t>(j));
        for (std::size_t d = 0; d < note.size(); ++d) note[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (double& v : note) v *= inv;
    return note;
}

void update_note(NoteDict& dict, int key, std::span<const double> note, double gamma) {
    for (double v : note) {
        if (!std::isfinite(v)) throw NumericError("non-finite note for key " + std::to_string(key));
    }
    dict.update(key, note, gamma);
}

BlendedInput blend_inputs(const nn::EncoderParams& params, std::span<const int> input_ids,
                          std::span<const RareOccurrence> occs, const NoteDict& dict, double lambda) {
    BlendedInput b;
    b.input = nn::embed(params, input_ids);
    const std::size_t n = input_ids.size();
    b.base_scale.assign(n, 1.0);
    b.note_key.assign(n, -1);
    if (!occs.empty() && dict.dim() != static_cast<int>(b.input.cols())) {
        throw ConfigError("note dictionary width does not match the encoder input width");
    }
    for (const auto& o : occs) {
        auto note = dict.value(o.key);
        for (int i = o.begin; i < o.end; ++i) {
            const auto r = static_cast<std::size_t>(i);
            auto row = b.input.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = (1.0 - lambda) * row[c] + lambda * note[c];
            b.base_scale[r] = 1.0 - lambda;
            b.note_key[r] = o.key;
        }
    }
    return b;
}

void accumulate_note_gradient(const BlendedInput& blend, const nn::Matrix& d_input, double lambda, nn::Matrix& grad) {
    for (std::size_t r = 0; r < blend.note_key.size(); ++r) {
        const int key = blend.note_key[r];
        if (key < 0) continue;
        auto g = grad.row(static_cast<std::size_t>(key));
        auto d = d_input.row(r);
        for (std::size_t c = 0; c < g.size(); ++c) g[c] += lambda * d[c];
    }
}

void NoteUpdateBatch::append(NoteUpdateBatch&& other) {
    for (auto& item : other.items_) items_.push_back(std::move(item));
    other.items_.clear();
}

void NoteUpdateBatch::commit(NoteDict& dict, double gamma) const {
    for (const auto& item : items_) update_note(dict, item.key, item.note, gamma);
}

}  // namespace tnf::notes
