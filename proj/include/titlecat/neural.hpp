#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "titlecat/corpus.hpp"
#include "titlecat/features.hpp"

namespace titlecat::neural {

// Binary C x S matrix with M[c][s] = 1 iff s is a child of c. Column sums
// are exactly 1 by the taxonomy's single-parent invariant.
struct HierarchyMask {
    std::size_t categories = 0;
    std::size_t subcategories = 0;
    std::vector<std::uint8_t> bits;  // row-major

    std::uint8_t at(std::size_t c, std::size_t s) const { return bits[c * subcategories + s]; }
    const std::uint8_t* row(std::size_t c) const { return bits.data() + c * subcategories; }
};

HierarchyMask build_mask(const corpus::Taxonomy& taxonomy);

// Dynamic Masked Softmax over one mask row:
//
//   O' = O - max(O over unmasked entries)
//   P(s) = (exp(O'_s) * M_s + e^-8) / sum_s' (exp(O'_s') * M_s' + e^-8)
//
// The shift keeps exponentials bounded and pins the smoothing scale, which
// makes the distribution shift-invariant and bounds every masked-out entry
// by e^-8. An all-zero mask row degenerates to the uniform distribution and
// is flagged.
struct MaskedSoftmax {
    Eigen::VectorXd probs;
    Eigen::VectorXd exps;     // exp(O'_s) * M_s, kept for backprop
    double denominator = 0.0;
    int shift_index = -1;     // index of the max unmasked logit, -1 if none
    bool degenerate = false;  // all-zero mask row
};

MaskedSoftmax masked_softmax_detail(const Eigen::VectorXd& logits, const std::uint8_t* mask_row);
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits,
                               const std::vector<std::uint8_t>& mask_row);

enum class EncoderVariant { mean_pool, bi_recurrent, dual_tower };
EncoderVariant parse_encoder_variant(std::string_view name);
std::string encoder_variant_name(EncoderVariant variant);

// Which heads contribute to the loss. `both` is the shared two-head form;
// the single-head selections exist for the independent-heads ablation.
enum class HeadSelection { both, category_only, subcategory_only };

struct EncoderConfig {
    EncoderVariant variant = EncoderVariant::bi_recurrent;
    int hidden_size = 200;
    int dense_size = 100;
    int sequence_cap = 32;  // titles are short; longer ones are truncated
    bool train_embeddings = true;
};

struct NetworkSpec {
    EncoderConfig encoder;
    bool masking_enabled = true;
    HeadSelection heads = HeadSelection::both;
    features::Locale locale = features::Locale::turkish;
    int embedding_dim_primary = 100;
    int embedding_dim_secondary = 100;
};

struct TrainConfig {
    double learning_rate = 1e-3;  // 3e-5 suits large pretrained bases, not from-scratch nets
    int batch_size = 16;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
};

// Flat parameter vector with named matrix segments mapped over it; gradient
// buffers share the layout, so finite differencing, Adam and serialization
// all walk one contiguous array.
class ParamStore {
public:
    struct Segment {
        std::string name;
        std::size_t offset = 0;
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
    };

    int add(std::string name, Eigen::Index rows, Eigen::Index cols);
    void allocate();

    Eigen::Map<Eigen::MatrixXd> mat(int id);
    Eigen::Map<const Eigen::MatrixXd> mat(int id) const;
    // Same layout over an external buffer (e.g. a gradient vector).
    Eigen::Map<Eigen::MatrixXd> mat_in(int id, std::vector<double>& buffer) const;

    std::size_t size() const { return total_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<Segment>& segments() const { return segments_; }

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
    std::vector<double> values_;
    bool allocated_ = false;
};

struct ForwardResult {
    Eigen::VectorXd category_probs;
    Eigen::VectorXd subcategory_probs;
    bool degenerate_mask = false;
};

struct HierarchicalPrediction {
    int category = -1;
    int subcategory = -1;
    Eigen::VectorXd category_probs;
    Eigen::VectorXd subcategory_probs;
};

// Shared encoder with a dense layer and two classification heads. The
// encoder is one of: mean pooling of token embeddings, a BiLSTM over the
// primary title, or two BiLSTM towers (primary + secondary title) whose
// final states are concatenated.
class ClassifierNetwork {
public:
    ClassifierNetwork(corpus::Taxonomy taxonomy, NetworkSpec spec,
                      features::Vocabulary vocab_primary,
                      std::optional<features::Vocabulary> vocab_secondary,
                      std::uint64_t init_seed,
                      const features::EmbeddingTable* init_primary = nullptr,
                      const features::EmbeddingTable* init_secondary = nullptr);

    // A pre-tokenized, vocabulary-indexed training example.
    struct Example {
        std::vector<int> primary_ids;
        std::vector<int> secondary_ids;
        int gold_category = -1;
        int gold_subcategory = -1;
    };

    Example make_example(const corpus::Product& product) const;

    ForwardResult forward(const corpus::Product& product, const HierarchyMask& mask,
                          std::optional<int> teacher_category = std::nullopt) const;

    // Teacher-forced joint cross-entropy (category + masked subcategory).
    double loss(const corpus::Product& product, int gold_category, int gold_subcategory,
                const HierarchyMask& mask) const;
    double loss(const Example& example, const HierarchyMask& mask) const;

    // Mean-batch loss and exact reverse-mode gradients for every parameter.
    // `gradients` is resized to the parameter count.
    double compute_gradients(const std::vector<Example>& batch, const HierarchyMask& mask,
                             std::vector<double>& gradients) const;

    // Inference: subcategory mask row follows the *predicted* category.
    HierarchicalPrediction predict_hierarchical(const corpus::Product& product,
                                                const HierarchyMask& mask) const;

    const corpus::Taxonomy& taxonomy() const { return taxonomy_; }
    const NetworkSpec& spec() const { return spec_; }
    const features::Vocabulary& vocab_primary() const { return vocab_primary_; }
    const features::Vocabulary* vocab_secondary() const {
        return vocab_secondary_ ? &*vocab_secondary_ : nullptr;
    }
    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_.values(); }
    const std::vector<double>& parameters() const { return params_.values(); }
    const ParamStore& store() const { return params_; }

    // Frozen embedding matrices (d x V); empty when embeddings are trainable.
    const Eigen::MatrixXd& frozen_primary() const { return frozen_emb_primary_; }
    const Eigen::MatrixXd& frozen_secondary() const { return frozen_emb_secondary_; }
    void set_frozen_embeddings(Eigen::MatrixXd primary, Eigen::MatrixXd secondary);

    int representation_size() const;

private:
    struct StepCache {
        Eigen::VectorXd x, pre, i, f, g, o, c, tanh_c, h;
    };
    struct TowerCache {
        std::vector<int> ids;
        std::vector<StepCache> fwd, bwd;  // bwd runs over the reversed sequence
        Eigen::VectorXd pooled;           // mean_pool only
    };
    struct Cache {
        TowerCache primary, secondary;
        Eigen::VectorXd repr, dense_pre, dense_act;
        Eigen::VectorXd cat_logits, cat_probs;
        Eigen::VectorXd sub_logits;
        MaskedSoftmax sub;         // masked path
        Eigen::VectorXd sub_probs; // final subcategory distribution
        int mask_row_used = -1;    // -1 -> plain softmax on the subcategory head
    };

    struct LstmIds {
        int W = -1, U = -1, b = -1;
    };
    struct TowerIds {
        int emb = -1;  // -1 when embeddings are frozen
        LstmIds fwd, bwd;
    };

    void init_parameters(std::uint64_t seed, const features::EmbeddingTable* init_primary,
                         const features::EmbeddingTable* init_secondary);
    Eigen::MatrixXd build_embedding_matrix(const features::Vocabulary& vocab, int dim,
                                           const features::EmbeddingTable* table,
                                           std::mt19937_64& rng) const;

    std::vector<int> lookup_ids(const std::string& title, const features::Vocabulary& vocab) const;

    Eigen::VectorXd embedding_column(bool secondary, int token) const;
    void run_tower(const std::vector<int>& ids, bool secondary, TowerCache& cache) const;
    void run_lstm(const std::vector<Eigen::VectorXd>& xs, const LstmIds& ids,
                  std::vector<StepCache>& steps) const;
    Cache run_forward(const Example& example, const HierarchyMask& mask,
                      std::optional<int> teacher_category) const;
    void backward(const Example& example, const Cache& cache, double scale,
                  std::vector<double>& gradients) const;
    void backward_tower(const TowerCache& cache, bool secondary, const Eigen::VectorXd& d_repr,
                        Eigen::Index repr_offset, double scale,
                        std::vector<double>& gradients) const;
    void backward_lstm(const std::vector<StepCache>& steps, const LstmIds& ids,
                       const Eigen::VectorXd& d_h_final, bool secondary, int emb_id,
                       const std::vector<int>& ids_in_order, double scale,
                       std::vector<double>& gradients) const;

    corpus::Taxonomy taxonomy_;
    NetworkSpec spec_;
    features::Vocabulary vocab_primary_;
    std::optional<features::Vocabulary> vocab_secondary_;

    ParamStore params_;
    TowerIds primary_ids_, secondary_ids_;
    int dense_W_ = -1, dense_b_ = -1;
    int cat_W_ = -1, cat_b_ = -1;
    int sub_W_ = -1, sub_b_ = -1;
    Eigen::MatrixXd frozen_emb_primary_, frozen_emb_secondary_;  // d x V when frozen
};

struct EpochRow {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_metric = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRow> epochs;
    int best_epoch = 0;
    double best_metric = 0.0;
    bool stopped_early = false;
};

// Test seam: replaces the real validation metric when set.
using ValidationHook = std::function<double(const ClassifierNetwork&, int epoch)>;

// Adam on shuffled seeded mini-batches with teacher forcing; after each epoch
// the validation ranking metric is computed and early stopping restores the
// best-epoch weights.
TrainLog train_network(ClassifierNetwork& network, const corpus::Dataset& train,
                       const corpus::Dataset& val, const TrainConfig& config,
                       const ValidationHook& validation_hook = {});

}  // namespace titlecat::neural
