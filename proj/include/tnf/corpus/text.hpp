#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tnf::corpus {

using Sentence = std::vector<std::string>;  // normalized words

struct Document {
    std::vector<Sentence> sentences;
};

struct Corpus {
    std::vector<Document> documents;

    std::size_t sentence_count() const;
    std::size_t word_count() const;
    /// Sentences of all documents in canonical (document, sentence) order.
    std::vector<const Sentence*> sentences() const;
};

/// Lower-case ASCII letters and split ASCII punctuation into its own word.
std::vector<std::string> split_words(std::string_view line);

/// Segment one document into sentences: a newline always ends a sentence, and
/// so does a terminal punctuation word ("." "!" "?").
std::vector<Sentence> split_sentences(std::string_view document_text);

/// Parse raw text. Blank lines separate documents.
Corpus parse_corpus(std::string_view text);

/// Read a corpus from a file or from every regular file of a directory
/// (sorted by name, one or more documents per file). Throws DataError if the
/// path is unreadable.
Corpus read_corpus(const std::filesystem::path& path);

/// Raw bytes of every file read_corpus would read, concatenated in order.
std::string read_corpus_bytes(const std::filesystem::path& path);

/// Split a UTF-8 string into code points (invalid bytes become single units).
std::vector<std::string> utf8_units(std::string_view s);

}  // namespace tnf::corpus
