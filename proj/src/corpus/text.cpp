#include "tnf/corpus/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tnf/common.hpp"

namespace tnf::corpus {

namespace fs = std::filesystem;

std::size_t Corpus::sentence_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.sentences.size();
    return n;
}

std::size_t Corpus::word_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) {
        for (const auto& s : d.sentences) n += s.size();
    }
    return n;
}

std::vector<const Sentence*> Corpus::sentences() const {
    std::vector<const Sentence*> out;
    out.reserve(sentence_count());
    for (const auto& d : documents) {
        for (const auto& s : d.sentences) out.push_back(&s);
    }
    return out;
}

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char ch : line) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            words.emplace_back(1, ch);
        } else if (c < 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return words;
}

namespace {

bool is_terminal(const std::string& w) { return w == "." || w == "!" || w == "?"; }

}  // namespace

std::vector<Sentence> split_sentences(std::string_view document_text) {
    std::vector<Sentence> out;
    std::size_t pos = 0;
    while (pos <= document_text.size()) {
        std::size_t nl = document_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = document_text.size();
        Sentence cur;
        for (auto& w : split_words(document_text.substr(pos, nl - pos))) {
            const bool end = is_terminal(w);
            cur.push_back(std::move(w));
            if (end) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) out.push_back(std::move(cur));
        pos = nl + 1;
    }
    return out;
}

Corpus parse_corpus(std::string_view text) {
    Corpus corpus;
    std::string block;
    auto flush = [&] {
        auto sentences = split_sentences(block);
        if (!sentences.empty()) corpus.documents.push_back(Document{std::move(sentences)});
        block.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        const bool blank = std::all_of(line.begin(), line.end(),
                                       [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        if (blank) {
            flush();
        } else {
            block.append(line);
            block.push_back('\n');
        }
        pos = nl + 1;
    }
    flush();
    return corpus;
}

namespace {

std::vector<fs::path> corpus_files(const fs::path& path) {
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) return {path};
    if (!fs::is_directory(path, ec)) throw DataError("corpus path not readable: " + path.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("corpus directory has no files: " + path.string());
    return files;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string read_corpus_bytes(const fs::path& path) {
    std::string all;
    for (const auto& f : corpus_files(path)) all += slurp(f);
    return all;
}

Corpus read_corpus(const fs::path& path) {
    Corpus corpus;
    // One file never merges documents with the next one.
    for (const auto& f : corpus_files(path)) {
        Corpus part = parse_corpus(slurp(f));
        for (auto& d : part.documents) corpus.documents.push_back(std::move(d));
    }
    return corpus;
}

std::vector<std::string> utf8_units(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if (c >= 0xF0 && c < 0xF8) len = 4;
        else if (c >= 0xE0) len = (c < 0xF0) ? 3 : 1;
        else if (c >= 0xC0) len = 2;
        if (i + len > s.size()) len = 1;
        for (std::size_t j = 1; j < len; ++j) {
            if ((static_cast<unsigned char>(s[i + j]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        out.emplace_back(s.substr(i, len));
        i += len;
    }
    return out;
}

}  // namespace tnf::corpus
