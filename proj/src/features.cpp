#include "titlecat/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "titlecat/common.hpp"

namespace titlecat::features {

Vocabulary::Vocabulary(std::vector<std::string> tokens,
                       std::vector<std::uint64_t> document_frequency,
                       std::uint64_t document_count)
    : tokens_(std::move(tokens)),
      document_frequency_(std::move(document_frequency)),
      document_count_(document_count) {
    if (tokens_.size() != document_frequency_.size()) {
        throw DataError("vocabulary token and frequency lists differ in length");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (document_frequency_[i] > document_count_) {
            throw DataError("vocabulary df exceeds document count for token '" + tokens_[i] + "'");
        }
        index_[tokens_[i]] = static_cast<int>(i);
    }
}

std::optional<int> Vocabulary::index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t Vocabulary::document_frequency(const std::string& token) const {
    auto idx = index_of(token);
    return idx ? document_frequency_[static_cast<std::size_t>(*idx)] : 0;
}

double Vocabulary::idf(int index) const {
    double df = static_cast<double>(document_frequency_.at(static_cast<std::size_t>(index)));
    return std::log((1.0 + static_cast<double>(document_count_)) / (1.0 + df)) + 1.0;
}

double Vocabulary::idf(const std::string& token) const {
    auto idx = index_of(token);
    if (!idx) throw DataError("idf queried for token outside the vocabulary: '" + token + "'");
    return idf(*idx);
}

Vocabulary fit_tfidf(const std::vector<TokenSequence>& corpus) {
    if (corpus.empty()) throw DataError("fit_tfidf: corpus is empty");
    std::map<std::string, std::uint64_t> df;
    for (const auto& seq : corpus) {
        std::set<std::string> seen(seq.tokens.begin(), seq.tokens.end());
        for (const auto& t : seen) ++df[t];
    }
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freqs;
    tokens.reserve(df.size());
    freqs.reserve(df.size());
    for (const auto& [token, count] : df) {
        tokens.push_back(token);
        freqs.push_back(count);
    }
    return Vocabulary(std::move(tokens), std::move(freqs), corpus.size());
}

void EmbeddingTable::add(std::string token, Eigen::VectorXd vec) {
    if (index.count(token)) throw DataError("duplicate token in embedding table: '" + token + "'");
    index[token] = static_cast<int>(tokens.size());
    tokens.push_back(std::move(token));
    vectors.push_back(std::move(vec));
}

namespace {

bool is_integer_field(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file: " + path);

    // Reject the common compressed/binary formats up front.
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() == 2 && static_cast<unsigned char>(magic[0]) == 0x1f &&
        static_cast<unsigned char>(magic[1]) == 0x8b) {
        throw DataError("embedding file is gzip-compressed; only plain text is supported: " + path);
    }
    in.seekg(0);

    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    std::size_t declared_rows = 0;
    bool has_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find('\0') != std::string::npos) {
            throw DataError("embedding file contains binary data; only plain text is supported: " + path);
        }
        std::istringstream row(line);
        std::vector<std::string> fields;
        std::string f;
        while (row >> f) fields.push_back(f);
        if (fields.empty()) continue;

        if (first_content_line) {
            first_content_line = false;
            if (fields.size() == 2 && is_integer_field(fields[0]) && is_integer_field(fields[1])) {
                has_header = true;
                declared_rows = std::stoull(fields[0]);
                table.dimension = static_cast<int>(std::stoull(fields[1]));
                if (table.dimension < 1) {
                    throw DataError(path + ": line 1: embedding dimension must be >= 1");
                }
                continue;
            }
            if (fields.size() < 2) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": expected a token followed by vector components");
            }
            table.dimension = static_cast<int>(fields.size()) - 1;
        }

        if (static_cast<int>(fields.size()) != table.dimension + 1) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.dimension) + " vector components, found " +
                            std::to_string(fields.size() - 1));
        }
        Eigen::VectorXd vec(table.dimension);
        for (int i = 0; i < table.dimension; ++i) {
            try {
                std::size_t consumed = 0;
                vec[i] = std::stod(fields[static_cast<std::size_t>(i) + 1], &consumed);
                if (consumed != fields[static_cast<std::size_t>(i) + 1].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": non-numeric vector component '" + fields[static_cast<std::size_t>(i) + 1] + "'");
            }
            if (!std::isfinite(vec[i])) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": non-finite vector component");
            }
        }
        try {
            table.add(fields[0], std::move(vec));
        } catch (const DataError& e) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (table.size() == 0) throw DataError("embedding file holds no vectors: " + path);
    if (has_header && declared_rows != table.size()) {
        throw DataError(path + ": header declares " + std::to_string(declared_rows) +
                        " vectors, file holds " + std::to_string(table.size()));
    }
    return table;
}

EmbeddingTable random_embedding_table(const std::vector<std::string>& tokens, int dimension,
                                      std::uint64_t seed) {
    if (dimension < 1) throw ConfigError("random embedding dimension must be >= 1");
    EmbeddingTable table;
    table.dimension = dimension;
    std::mt19937_64 rng(mix_seed(seed, 0xe3bed));
    double bound = 1.0 / std::sqrt(static_cast<double>(dimension));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (const auto& token : tokens) {
        Eigen::VectorXd vec(dimension);
        for (int i = 0; i < dimension; ++i) vec[i] = dist(rng);
        table.add(token, std::move(vec));
    }
    return table;
}

DocVector embed_title_weighted(const TokenSequence& tokens, const Vocabulary& vocab,
                               const EmbeddingTable& table) {
    DocVector doc;
    doc.values = Eigen::VectorXd::Zero(table.dimension);
    if (tokens.empty()) {
        doc.oov_ratio = 1.0;
        return doc;
    }

    std::map<std::string, std::size_t> tf;
    for (const auto& t : tokens.tokens) ++tf[t];

    double weight_sum = 0.0;
    std::size_t used_occurrences = 0;
    for (const auto& [token, count] : tf) {
        auto idx = vocab.index_of(token);
        const Eigen::VectorXd* vec = table.find(token);
        if (!idx || !vec) continue;
        double w = static_cast<double>(count) * vocab.idf(*idx);
        doc.values += w * (*vec);
        weight_sum += w;
        used_occurrences += count;
    }
    if (weight_sum > 0.0) {
        doc.values /= weight_sum;
    } else {
        doc.values.setZero();
    }
    doc.oov_ratio = 1.0 - static_cast<double>(used_occurrences) / static_cast<double>(tokens.size());
    return doc;
}

void export_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    out << "token,df,idf\n";
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out << csv_field(vocab.tokens()[i], ',') << ',' << vocab.document_frequencies()[i] << ','
            << vocab.idf(static_cast<int>(i)) << '\n';
    }
}

}  // namespace titlecat::features
