#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "titlecat/corpus.hpp"
#include "titlecat/eval.hpp"
#include "titlecat/features.hpp"
#include "titlecat/linear.hpp"
#include "titlecat/neural.hpp"

namespace titlecat::cli {

// Single-file model format: magic, version, length-prefixed sections
// (header key-values, taxonomy, vocabularies, parameters, embedding
// reference or inline vectors), FNV-1a 64 content hash in the footer.
// Integers little-endian, floats 64-bit IEEE-754.
inline constexpr std::uint32_t kFormatMajor = 1;
inline constexpr std::uint32_t kFormatMinor = 1;  // minor 1 added the sequence_cap header field

struct EmbeddingRef {
    std::string path;
    std::uint64_t content_hash = 0;
    int dimension = 0;
};

struct NeuralPayload {
    neural::EncoderConfig encoder;  // sequence_cap mirrored from the container field
    neural::HeadSelection heads = neural::HeadSelection::both;
    int embedding_dim_primary = 0;
    int embedding_dim_secondary = 0;
    std::vector<double> theta;
    // Frozen embedding matrices live outside theta and are stored here when
    // the network was trained with --freeze-embeddings.
    Eigen::MatrixXd frozen_primary;
    Eigen::MatrixXd frozen_secondary;
};

struct ModelContainer {
    std::uint32_t version_major = kFormatMajor;
    std::uint32_t version_minor = kFormatMinor;
    std::string family;  // "linear" | "neural"
    features::Locale locale = features::Locale::turkish;
    bool masking = false;
    bool independent_heads = false;
    std::uint64_t seed = 0;
    std::string config_summary;
    double val_rank_metric = 0.0;
    int sequence_cap = 32;

    corpus::Taxonomy taxonomy;
    features::Vocabulary vocab_primary;
    std::optional<features::Vocabulary> vocab_secondary;

    // linear family
    std::optional<linear::LinearModel> linear_category;
    std::optional<linear::LinearModel> linear_subcategory;
    std::optional<EmbeddingRef> embedding_ref;
    std::optional<features::EmbeddingTable> embedding_inline;

    // neural family; two payloads in independent-heads mode
    std::vector<NeuralPayload> networks;
};

void save_model(const ModelContainer& container, const std::string& path);
ModelContainer load_model(const std::string& path);

// Classifiers backing the container contents. Linear models need an
// embedding table at prediction time: the inlined one when present,
// otherwise the referenced file (re-hashed and verified).
std::unique_ptr<eval::Classifier> make_classifier(const ModelContainer& container);

// In-memory constructors used right after training (no file round trip).
std::unique_ptr<eval::Classifier> make_linear_classifier(
    corpus::Taxonomy taxonomy, features::Vocabulary vocab, features::EmbeddingTable table,
    features::Locale locale, linear::LinearModel category_model,
    linear::LinearModel subcategory_model);
std::unique_ptr<eval::Classifier> make_neural_classifier(neural::ClassifierNetwork network);
std::unique_ptr<eval::Classifier> make_independent_classifier(
    neural::ClassifierNetwork category_network, neural::ClassifierNetwork subcategory_network);

namespace detail {
// Test seam: emit a container stamped with an older minor version (older
// minors lack the sequence_cap header field).
void save_model_as_minor(const ModelContainer& container, const std::string& path,
                         std::uint32_t minor);
}  // namespace detail

}  // namespace titlecat::cli
