#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "titlecat/text.hpp"

namespace titlecat::features {

// Token statistics fitted over a title corpus. Indices are dense 0..V-1 in
// lexicographic token order so downstream parameter layouts are reproducible.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> document_frequency,
               std::uint64_t document_count);

    std::optional<int> index_of(const std::string& token) const;
    std::uint64_t document_frequency(const std::string& token) const;
    std::uint64_t document_count() const { return document_count_; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::uint64_t>& document_frequencies() const { return document_frequency_; }

    // Smoothed idf: ln((1+N)/(1+df)) + 1.
    double idf(int index) const;
    double idf(const std::string& token) const;

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && document_frequency_ == other.document_frequency_ &&
               document_count_ == other.document_count_;
    }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> document_frequency_;
    std::uint64_t document_count_ = 0;
    std::unordered_map<std::string, int> index_;
};

// Document frequencies counted over titles (one count per title containing
// the token, however many times it repeats).
Vocabulary fit_tfidf(const std::vector<TokenSequence>& corpus);

struct EmbeddingTable {
    int dimension = 0;
    std::vector<std::string> tokens;
    std::vector<Eigen::VectorXd> vectors;
    std::unordered_map<std::string, int> index;

    const Eigen::VectorXd* find(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? nullptr : &vectors[static_cast<std::size_t>(it->second)];
    }
    std::size_t size() const { return tokens.size(); }
    void add(std::string token, Eigen::VectorXd vec);
};

// Plain-text embedding loader. Accepts the word2vec convention (first line
// "V d") and the headerless vectors-per-line convention; auto-detected by
// whether line 1 is exactly two integers. Compressed or binary files are
// rejected.
EmbeddingTable load_embeddings(const std::string& path);

// Deterministic random table over the given tokens, uniform in
// (-1/sqrt(d), +1/sqrt(d)); stands in when no pretrained vectors exist.
EmbeddingTable random_embedding_table(const std::vector<std::string>& tokens, int dimension,
                                      std::uint64_t seed);

struct DocVector {
    Eigen::VectorXd values;
    double oov_ratio = 0.0;
};

// TF-IDF-weighted average of the token vectors: w(t) = tf(t)*idf(t) over
// tokens present in both the vocabulary and the table; tokens missing from
// either are skipped and counted into oov_ratio. All-skipped (or empty)
// input yields the zero vector with oov_ratio 1.
DocVector embed_title_weighted(const TokenSequence& tokens, const Vocabulary& vocab,
                               const EmbeddingTable& table);

// (token, df, idf) rows for inspection.
void export_vocabulary(const Vocabulary& vocab, const std::string& path);

}  // namespace titlecat::features
