#include "tnf/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tnf/common.hpp"

namespace tnf::corpus {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

class WordFactory {
public:
    explicit WordFactory(Rng& rng) : rng_(rng) {}

    std::string make(int min_syl, int max_syl) {
        for (;;) {
            const int n = min_syl + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_syl - min_syl + 1)));
            std::string w;
            for (int i = 0; i < n; ++i) {
                w.push_back(kConsonants[rng_.below(kConsonants.size())]);
                w.push_back(kVowels[rng_.below(kVowels.size())]);
            }
            if (used_.insert(w).second) return w;
        }
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

class Discrete {
public:
    explicit Discrete(const std::vector<double>& weights) {
        double acc = 0.0;
        for (double w : weights) cdf_.push_back(acc += w);
        for (double& c : cdf_) c /= acc;
    }
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

struct Chain {
    std::vector<std::string> words;
    Discrete unigram;
    std::vector<std::vector<std::size_t>> next;
    double follow;

    std::vector<std::string> sentence(Rng& rng, int len) const {
        std::vector<std::string> out;
        std::size_t cur = unigram.sample(rng);
        out.push_back(words[cur]);
        while (static_cast<int>(out.size()) < len) {
            cur = rng.uniform() < follow ? next[cur][rng.below(next[cur].size())] : unigram.sample(rng);
            out.push_back(words[cur]);
        }
        return out;
    }
};

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s.push_back(' ');
        s += w;
    }
    return s;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.common_words < 2 || cfg.attributes < 2 || cfg.rare_words < 1) throw ConfigError("synthetic: sizes too small");
    if (cfg.rare_min < 1 || cfg.rare_min > cfg.rare_max) throw ConfigError("synthetic: bad rare occurrence range");
    if (cfg.sentence_min < 1 || cfg.sentence_min > cfg.sentence_max) throw ConfigError("synthetic: bad sentence range");

    Rng rng(cfg.seed);
    WordFactory factory(rng);
    SyntheticCorpus out;

    std::vector<std::string> common;
    for (int i = 0; i < cfg.common_words; ++i) common.push_back(factory.make(1, 2));
    for (int i = 0; i < cfg.attributes; ++i) out.attributes.push_back(factory.make(2, 2));
    for (int i = 0; i < cfg.rare_words; ++i) {
        const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.attributes)));
        out.planted.push_back(PlantedWord{factory.make(3, 4), out.attributes[static_cast<std::size_t>(a)], a});
    }

    std::vector<double> zipf;
    for (int r = 1; r <= cfg.common_words; ++r) zipf.push_back(1.0 / std::pow(r, cfg.zipf_exponent));
    Chain chain{common, Discrete(zipf), {}, cfg.follow_prob};
    for (int i = 0; i < cfg.common_words; ++i) {
        std::vector<std::size_t> succ;
        for (int j = 0; j < cfg.successors; ++j) succ.push_back(chain.unigram.sample(rng));
        chain.next.push_back(std::move(succ));
    }

    // One rare occurrence per host sentence.
    std::vector<int> occurrences;
    for (int w = 0; w < cfg.rare_words; ++w) {
        const auto c = cfg.rare_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.rare_max - cfg.rare_min + 1)));
        occurrences.insert(occurrences.end(), static_cast<std::size_t>(c), w);
    }
    const double mean_len = 0.5 * (cfg.sentence_min + cfg.sentence_max);
    const auto n_sentences = std::max<std::int64_t>(
        static_cast<std::int64_t>(occurrences.size()),
        static_cast<std::int64_t>(static_cast<double>(cfg.target_words) / mean_len));
    std::vector<int> host(static_cast<std::size_t>(n_sentences), -1);
    for (std::size_t i = 0; i < occurrences.size(); ++i) host[i] = occurrences[i];
    rng.shuffle(std::span<int>(host));

    std::ostringstream train, valid;
    std::ostringstream* doc_stream = &train;
    for (std::int64_t s = 0; s < n_sentences; ++s) {
        if (s % cfg.sentences_per_doc == 0) {
            if (s > 0) *doc_stream << '\n';
            doc_stream = rng.uniform() < cfg.valid_fraction ? &valid : &train;
        }
        const int len = cfg.sentence_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.sentence_max - cfg.sentence_min + 1)));
        auto words = chain.sentence(rng, len);
        if (const int w = host[static_cast<std::size_t>(s)]; w >= 0) {
            const auto& p = out.planted[static_cast<std::size_t>(w)];
            const auto at = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
            words.insert(words.begin() + at, {p.word, p.attribute});
        }
        *doc_stream << join(words) << '\n';
    }
    out.train_text = train.str();
    out.valid_text = valid.str();

    for (std::size_t w = 0; w < out.planted.size(); ++w) {
        const auto& p = out.planted[w];
        for (int r = 0; r < cfg.probe_per_word; ++r) {
            const int len = cfg.sentence_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.sentence_max - cfg.sentence_min + 1)));
            auto words = chain.sentence(rng, len);
            const auto at = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
            words.insert(words.begin() + at, {p.word, "[MASK]"});
            ProbeExample ex{p.attribute_index % 2, std::move(words)};
            (w % 2 == 0 ? out.probe_train : out.probe_test).push_back(std::move(ex));
        }
    }
    return out;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw DataError("cannot write " + p.string());
    f << text;
}

std::string probe_text(const std::vector<ProbeExample>& xs) {
    std::string s;
    for (const auto& x : xs) s += std::to_string(x.label) + "\t" + join(x.words) + "\n";
    return s;
}

}  // namespace

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "train.txt", corpus.train_text);
    write_file(dir / "valid.txt", corpus.valid_text);
    std::string planted;
    for (const auto& p : corpus.planted) planted += p.word + "\t" + p.attribute + "\n";
    write_file(dir / "planted.tsv", planted);
    write_file(dir / "probe_train.tsv", probe_text(corpus.probe_train));
    write_file(dir / "probe_test.tsv", probe_text(corpus.probe_test));
}

std::vector<ProbeExample> load_probe(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<ProbeExample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("probe line without label: " + line);
        ProbeExample ex;
        ex.label = std::stoi(line.substr(0, tab));
        std::istringstream ws(line.substr(tab + 1));
        for (std::string w; ws >> w;) ex.words.push_back(w);
        out.push_back(std::move(ex));
    }
    return out;
}

ProbeSequence tokenize_probe(const ProbeExample& ex, const SubwordVocab& vocab) {
    ProbeSequence out;
    out.label = ex.label;
    auto& seq = out.seq;
    for (const auto& w : ex.words) {
        if (w == "[MASK]") {
            seq.ids.push_back(SpecialIds::mask);
            continue;
        }
        const int begin = seq.size();
        for (int id : vocab.encode_word(w)) seq.ids.push_back(id);
        seq.spans.push_back(WordSpan{w, begin, seq.size(), true});
    }
    seq.sentences.push_back(SentenceBound{0, seq.size(), 0});
    seq.ids.push_back(SpecialIds::sep);
    return out;
}

}  // namespace tnf::corpus
