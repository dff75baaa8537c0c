#include "titlecat/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "titlecat/common.hpp"

namespace titlecat::cli {

namespace {

enum SectionId : std::uint32_t {
    kSectionHeader = 1,
    kSectionTaxonomy = 2,
    kSectionVocabPrimary = 3,
    kSectionVocabSecondary = 4,
    kSectionLinear = 5,
    kSectionNeural = 6,
    kSectionEmbeddingRef = 7,
    kSectionEmbeddingInline = 8,
};

constexpr char kMagic[8] = {'T', 'C', 'A', 'T', 'M', 'O', 'D', 'L'};

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.append(s);
    }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    Reader(const std::string& bytes, std::size_t begin, std::size_t end)
        : bytes_(bytes), pos_(begin), end_(end) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        std::uint32_t len = u32();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    bool done() const { return pos_ >= end_; }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > end_) throw DataError("model container is corrupt or truncated");
    }
    const std::string& bytes_;
    std::size_t pos_;
    std::size_t end_;
};

void write_vocabulary(Writer& w, const features::Vocabulary& vocab) {
    w.u64(vocab.document_count());
    w.u32(static_cast<std::uint32_t>(vocab.size()));
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        w.str(vocab.tokens()[i]);
        w.u64(vocab.document_frequencies()[i]);
    }
}

features::Vocabulary read_vocabulary(Reader& r) {
    std::uint64_t doc_count = r.u64();
    std::uint32_t count = r.u32();
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> dfs;
    tokens.reserve(count);
    dfs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        tokens.push_back(r.str());
        dfs.push_back(r.u64());
    }
    return {std::move(tokens), std::move(dfs), doc_count};
}

void write_linear_model(Writer& w, const linear::LinearModel& model) {
    w.u32(static_cast<std::uint32_t>(model.labels.size()));
    for (const auto& label : model.labels) w.str(label);
    w.u32(static_cast<std::uint32_t>(model.weights.cols()));
    w.f64(model.c_reg);
    for (Eigen::Index k = 0; k < model.weights.rows(); ++k) {
        for (Eigen::Index j = 0; j < model.weights.cols(); ++j) w.f64(model.weights(k, j));
    }
    for (Eigen::Index k = 0; k < model.biases.size(); ++k) w.f64(model.biases[k]);
}

linear::LinearModel read_linear_model(Reader& r) {
    linear::LinearModel model;
    std::uint32_t K = r.u32();
    model.labels.reserve(K);
    for (std::uint32_t k = 0; k < K; ++k) model.labels.push_back(r.str());
    std::uint32_t d = r.u32();
    model.c_reg = r.f64();
    model.weights.resize(K, d);
    for (std::uint32_t k = 0; k < K; ++k) {
        for (std::uint32_t j = 0; j < d; ++j) model.weights(k, j) = r.f64();
    }
    model.biases.resize(K);
    for (std::uint32_t k = 0; k < K; ++k) model.biases[k] = r.f64();
    return model;
}

void write_matrix(Writer& w, const Eigen::MatrixXd& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) w.f64(m(r, c));
    }
}

Eigen::MatrixXd read_matrix(Reader& r) {
    std::uint32_t rows = r.u32();
    std::uint32_t cols = r.u32();
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t c = 0; c < cols; ++c) {
        for (std::uint32_t row = 0; row < rows; ++row) m(row, c) = r.f64();
    }
    return m;
}

void write_neural_payload(Writer& w, const NeuralPayload& payload) {
    w.u32(static_cast<std::uint32_t>(payload.encoder.variant));
    w.u32(static_cast<std::uint32_t>(payload.encoder.hidden_size));
    w.u32(static_cast<std::uint32_t>(payload.encoder.dense_size));
    w.u8(payload.encoder.train_embeddings ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(payload.heads));
    w.u32(static_cast<std::uint32_t>(payload.embedding_dim_primary));
    w.u32(static_cast<std::uint32_t>(payload.embedding_dim_secondary));
    w.u64(payload.theta.size());
    for (double v : payload.theta) w.f64(v);
    if (!payload.encoder.train_embeddings) {
        write_matrix(w, payload.frozen_primary);
        write_matrix(w, payload.frozen_secondary);
    }
}

NeuralPayload read_neural_payload(Reader& r) {
    NeuralPayload payload;
    std::uint32_t variant = r.u32();
    if (variant > 2) throw DataError("model container names an unknown encoder variant");
    payload.encoder.variant = static_cast<neural::EncoderVariant>(variant);
    payload.encoder.hidden_size = static_cast<int>(r.u32());
    payload.encoder.dense_size = static_cast<int>(r.u32());
    payload.encoder.train_embeddings = r.u8() != 0;
    std::uint8_t heads = r.u8();
    if (heads > 2) throw DataError("model container names an unknown head selection");
    payload.heads = static_cast<neural::HeadSelection>(heads);
    payload.embedding_dim_primary = static_cast<int>(r.u32());
    payload.embedding_dim_secondary = static_cast<int>(r.u32());
    std::uint64_t count = r.u64();
    payload.theta.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) payload.theta[i] = r.f64();
    if (!payload.encoder.train_embeddings) {
        payload.frozen_primary = read_matrix(r);
        payload.frozen_secondary = read_matrix(r);
    }
    return payload;
}

std::string encode_container(const ModelContainer& container, std::uint32_t minor) {
    Writer out;
    for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
    out.u32(kFormatMajor);
    out.u32(minor);

    std::vector<std::pair<std::uint32_t, std::string>> sections;
    auto add_section = [&](std::uint32_t id, const Writer& w) {
        sections.emplace_back(id, w.bytes());
    };

    {
        Writer w;
        std::map<std::string, std::string> kv;
        kv["family"] = container.family;
        kv["locale"] = features::locale_name(container.locale);
        kv["masking"] = container.masking ? "1" : "0";
        kv["independent_heads"] = container.independent_heads ? "1" : "0";
        kv["seed"] = std::to_string(container.seed);
        kv["config"] = container.config_summary;
        kv["val_rank_metric"] = std::to_string(container.val_rank_metric);
        if (minor >= 1) kv["sequence_cap"] = std::to_string(container.sequence_cap);
        w.u32(static_cast<std::uint32_t>(kv.size()));
        for (const auto& [k, v] : kv) {
            w.str(k);
            w.str(v);
        }
        add_section(kSectionHeader, w);
    }
    {
        Writer w;
        const auto& tax = container.taxonomy;
        w.u32(static_cast<std::uint32_t>(tax.category_count()));
        for (const auto& c : tax.categories()) w.str(c);
        w.u32(static_cast<std::uint32_t>(tax.subcategory_count()));
        for (const auto& s : tax.subcategories()) w.str(s);
        for (int p : tax.parent_map()) w.u32(static_cast<std::uint32_t>(p));
        add_section(kSectionTaxonomy, w);
    }
    {
        Writer w;
        write_vocabulary(w, container.vocab_primary);
        add_section(kSectionVocabPrimary, w);
    }
    if (container.vocab_secondary) {
        Writer w;
        write_vocabulary(w, *container.vocab_secondary);
        add_section(kSectionVocabSecondary, w);
    }
    if (container.linear_category && container.linear_subcategory) {
        Writer w;
        write_linear_model(w, *container.linear_category);
        write_linear_model(w, *container.linear_subcategory);
        add_section(kSectionLinear, w);
    }
    if (!container.networks.empty()) {
        Writer w;
        w.u32(static_cast<std::uint32_t>(container.networks.size()));
        for (const auto& payload : container.networks) write_neural_payload(w, payload);
        add_section(kSectionNeural, w);
    }
    if (container.embedding_ref) {
        Writer w;
        w.str(container.embedding_ref->path);
        w.u64(container.embedding_ref->content_hash);
        w.u32(static_cast<std::uint32_t>(container.embedding_ref->dimension));
        add_section(kSectionEmbeddingRef, w);
    }
    if (container.embedding_inline) {
        Writer w;
        const auto& table = *container.embedding_inline;
        w.u32(static_cast<std::uint32_t>(table.dimension));
        w.u32(static_cast<std::uint32_t>(table.size()));
        for (std::size_t i = 0; i < table.size(); ++i) {
            w.str(table.tokens[i]);
            for (int j = 0; j < table.dimension; ++j) w.f64(table.vectors[i][j]);
        }
        add_section(kSectionEmbeddingInline, w);
    }

    out.u32(static_cast<std::uint32_t>(sections.size()));
    std::string body = out.bytes();
    for (const auto& [id, bytes] : sections) {
        Writer w;
        w.u32(id);
        w.u64(bytes.size());
        body += w.bytes();
        body += bytes;
    }
    Fnv1a64 hash;
    hash.update(body);
    Writer footer;
    footer.u64(hash.digest());
    return body + footer.bytes();
}

}  // namespace

void save_model(const ModelContainer& container, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path);
    std::string bytes = encode_container(container, container.version_minor);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing model file: " + path);
}

void detail::save_model_as_minor(const ModelContainer& container, const std::string& path,
                                 std::uint32_t minor) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path);
    std::string bytes = encode_container(container, minor);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelContainer load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic) + 4 + 4 + 4 + 8) {
        throw DataError("model container is corrupt or truncated: " + path);
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a model container: " + path);
    }

    Reader head(bytes, sizeof(kMagic), bytes.size());
    std::uint32_t major = head.u32();
    std::uint32_t minor = head.u32();
    if (major != kFormatMajor || minor > kFormatMinor) {
        throw DataError("incompatible model container version " + std::to_string(major) + "." +
                        std::to_string(minor) + " (supported: " + std::to_string(kFormatMajor) +
                        "." + std::to_string(kFormatMinor) + ")");
    }

    // Integrity gate before any section is parsed.
    Fnv1a64 hash;
    hash.update(bytes.data(), bytes.size() - 8);
    Reader footer(bytes, bytes.size() - 8, bytes.size());
    if (hash.digest() != footer.u64()) {
        throw DataError("model container failed the content-hash integrity check: " + path);
    }

    ModelContainer container;
    container.version_major = major;
    container.version_minor = minor;

    std::uint32_t section_count = head.u32();
    std::size_t pos = head.pos();
    bool saw_header = false;
    for (std::uint32_t s = 0; s < section_count; ++s) {
        Reader meta(bytes, pos, bytes.size() - 8);
        std::uint32_t id = meta.u32();
        std::uint64_t length = meta.u64();
        std::size_t begin = meta.pos();
        if (begin + length > bytes.size() - 8) {
            throw DataError("model container is corrupt or truncated: " + path);
        }
        Reader r(bytes, begin, begin + length);
        switch (id) {
            case kSectionHeader: {
                std::uint32_t kv_count = r.u32();
                std::map<std::string, std::string> kv;
                for (std::uint32_t i = 0; i < kv_count; ++i) {
                    std::string key = r.str();
                    kv[key] = r.str();
                }
                container.family = kv.count("family") ? kv["family"] : "";
                container.locale = features::parse_locale(kv.count("locale") ? kv["locale"] : "turkish");
                container.masking = kv["masking"] == "1";
                container.independent_heads = kv["independent_heads"] == "1";
                container.seed = kv.count("seed") ? std::stoull(kv["seed"]) : 0;
                container.config_summary = kv["config"];
                container.val_rank_metric = kv.count("val_rank_metric") ? std::stod(kv["val_rank_metric"]) : 0.0;
                // Added in minor 1; older containers fall back to the default.
                container.sequence_cap = kv.count("sequence_cap") ? std::stoi(kv["sequence_cap"]) : 32;
                saw_header = true;
                break;
            }
            case kSectionTaxonomy: {
                std::uint32_t C = r.u32();
                std::vector<std::string> cats;
                cats.reserve(C);
                for (std::uint32_t i = 0; i < C; ++i) cats.push_back(r.str());
                std::uint32_t S = r.u32();
                std::vector<std::string> subs;
                subs.reserve(S);
                for (std::uint32_t i = 0; i < S; ++i) subs.push_back(r.str());
                std::vector<int> parent;
                parent.reserve(S);
                for (std::uint32_t i = 0; i < S; ++i) parent.push_back(static_cast<int>(r.u32()));
                container.taxonomy = corpus::Taxonomy::from_parts(std::move(cats), std::move(subs), std::move(parent));
                break;
            }
            case kSectionVocabPrimary:
                container.vocab_primary = read_vocabulary(r);
                break;
            case kSectionVocabSecondary:
                container.vocab_secondary = read_vocabulary(r);
                break;
            case kSectionLinear:
                container.linear_category = read_linear_model(r);
                container.linear_subcategory = read_linear_model(r);
                break;
            case kSectionNeural: {
                std::uint32_t count = r.u32();
                for (std::uint32_t i = 0; i < count; ++i) {
                    container.networks.push_back(read_neural_payload(r));
                }
                break;
            }
            case kSectionEmbeddingRef: {
                EmbeddingRef ref;
                ref.path = r.str();
                ref.content_hash = r.u64();
                ref.dimension = static_cast<int>(r.u32());
                container.embedding_ref = std::move(ref);
                break;
            }
            case kSectionEmbeddingInline: {
                features::EmbeddingTable table;
                table.dimension = static_cast<int>(r.u32());
                std::uint32_t count = r.u32();
                for (std::uint32_t i = 0; i < count; ++i) {
                    std::string token = r.str();
                    Eigen::VectorXd vec(table.dimension);
                    for (int j = 0; j < table.dimension; ++j) vec[j] = r.f64();
                    table.add(std::move(token), std::move(vec));
                }
                container.embedding_inline = std::move(table);
                break;
            }
            default:
                break;  // unknown sections from future minors are skipped
        }
        pos = begin + length;
    }
    if (!saw_header || container.family.empty()) {
        throw DataError("model container lacks a header section: " + path);
    }
    for (auto& payload : container.networks) {
        payload.encoder.sequence_cap = container.sequence_cap;
    }
    return container;
}

namespace {

class LinearClassifier : public eval::Classifier {
public:
    LinearClassifier(corpus::Taxonomy taxonomy, features::Vocabulary vocab,
                     features::EmbeddingTable table, features::Locale locale,
                     linear::LinearModel category_model, linear::LinearModel subcategory_model)
        : taxonomy_(std::move(taxonomy)),
          vocab_(std::move(vocab)),
          table_(std::move(table)),
          locale_(locale),
          category_model_(std::move(category_model)),
          subcategory_model_(std::move(subcategory_model)) {}

    eval::Prediction predict(const corpus::Product& product) const override {
        auto doc = features::embed_title_weighted(
            features::tokenize(product.title_primary, locale_), vocab_, table_);
        auto [cat, cat_scores] = linear::predict_linear(category_model_, doc.values);
        auto [sub, sub_scores] = linear::predict_linear(subcategory_model_, doc.values);
        eval::Prediction pred;
        pred.category = cat;
        pred.subcategory = sub;
        // Scores are margins, not probabilities; a softmax gives a usable
        // confidence ordering for the audit report.
        Eigen::VectorXd cs = (cat_scores.array() - cat_scores.maxCoeff()).exp();
        Eigen::VectorXd ss = (sub_scores.array() - sub_scores.maxCoeff()).exp();
        pred.category_prob = cs.maxCoeff() / cs.sum();
        pred.subcategory_prob = ss.maxCoeff() / ss.sum();
        return pred;
    }

    const corpus::Taxonomy& taxonomy() const override { return taxonomy_; }

private:
    corpus::Taxonomy taxonomy_;
    features::Vocabulary vocab_;
    features::EmbeddingTable table_;
    features::Locale locale_;
    linear::LinearModel category_model_;
    linear::LinearModel subcategory_model_;
};

class NeuralClassifier : public eval::Classifier {
public:
    explicit NeuralClassifier(neural::ClassifierNetwork network)
        : network_(std::move(network)), mask_(neural::build_mask(network_.taxonomy())) {}

    eval::Prediction predict(const corpus::Product& product) const override {
        auto p = network_.predict_hierarchical(product, mask_);
        eval::Prediction pred;
        const auto& tax = network_.taxonomy();
        pred.category = tax.categories()[static_cast<std::size_t>(p.category)];
        pred.subcategory = tax.subcategories()[static_cast<std::size_t>(p.subcategory)];
        pred.category_prob = p.category_probs[p.category];
        pred.subcategory_prob = p.subcategory_probs[p.subcategory];
        return pred;
    }

    const corpus::Taxonomy& taxonomy() const override { return network_.taxonomy(); }

private:
    neural::ClassifierNetwork network_;
    neural::HierarchyMask mask_;
};

// Fig. 3(a) arrangement: two networks trained separately, one queried per
// level.
class IndependentClassifier : public eval::Classifier {
public:
    IndependentClassifier(neural::ClassifierNetwork category_network,
                          neural::ClassifierNetwork subcategory_network)
        : category_network_(std::move(category_network)),
          subcategory_network_(std::move(subcategory_network)),
          mask_(neural::build_mask(category_network_.taxonomy())) {}

    eval::Prediction predict(const corpus::Product& product) const override {
        auto pc = category_network_.predict_hierarchical(product, mask_);
        auto ps = subcategory_network_.predict_hierarchical(product, mask_);
        eval::Prediction pred;
        const auto& tax = category_network_.taxonomy();
        pred.category = tax.categories()[static_cast<std::size_t>(pc.category)];
        pred.subcategory = tax.subcategories()[static_cast<std::size_t>(ps.subcategory)];
        pred.category_prob = pc.category_probs[pc.category];
        pred.subcategory_prob = ps.subcategory_probs[ps.subcategory];
        return pred;
    }

    const corpus::Taxonomy& taxonomy() const override { return category_network_.taxonomy(); }

private:
    neural::ClassifierNetwork category_network_;
    neural::ClassifierNetwork subcategory_network_;
    neural::HierarchyMask mask_;
};

neural::ClassifierNetwork rebuild_network(const ModelContainer& container,
                                          const NeuralPayload& payload) {
    neural::NetworkSpec spec;
    spec.encoder = payload.encoder;
    spec.encoder.sequence_cap = container.sequence_cap;
    spec.masking_enabled = container.masking;
    spec.heads = payload.heads;
    spec.locale = container.locale;
    spec.embedding_dim_primary = payload.embedding_dim_primary;
    spec.embedding_dim_secondary = payload.embedding_dim_secondary;
    neural::ClassifierNetwork network(container.taxonomy, spec, container.vocab_primary,
                                      container.vocab_secondary, /*init_seed=*/0);
    if (network.parameter_count() != payload.theta.size()) {
        throw DataError("model container parameter count does not match the network layout");
    }
    network.parameters() = payload.theta;
    if (!payload.encoder.train_embeddings) {
        network.set_frozen_embeddings(payload.frozen_primary, payload.frozen_secondary);
    }
    return network;
}

}  // namespace

std::unique_ptr<eval::Classifier> make_linear_classifier(
    corpus::Taxonomy taxonomy, features::Vocabulary vocab, features::EmbeddingTable table,
    features::Locale locale, linear::LinearModel category_model,
    linear::LinearModel subcategory_model) {
    return std::make_unique<LinearClassifier>(std::move(taxonomy), std::move(vocab),
                                              std::move(table), locale, std::move(category_model),
                                              std::move(subcategory_model));
}

std::unique_ptr<eval::Classifier> make_neural_classifier(neural::ClassifierNetwork network) {
    return std::make_unique<NeuralClassifier>(std::move(network));
}

std::unique_ptr<eval::Classifier> make_independent_classifier(
    neural::ClassifierNetwork category_network, neural::ClassifierNetwork subcategory_network) {
    return std::make_unique<IndependentClassifier>(std::move(category_network),
                                                   std::move(subcategory_network));
}

std::unique_ptr<eval::Classifier> make_classifier(const ModelContainer& container) {
    if (container.family == "linear") {
        if (!container.linear_category || !container.linear_subcategory) {
            throw DataError("linear model container lacks its parameter section");
        }
        features::EmbeddingTable table;
        if (container.embedding_inline) {
            table = *container.embedding_inline;
        } else if (container.embedding_ref) {
            std::uint64_t actual = fnv1a64_file(container.embedding_ref->path);
            if (actual != container.embedding_ref->content_hash) {
                throw DataError("embedding file " + container.embedding_ref->path +
                                " does not match the hash recorded in the model container");
            }
            table = features::load_embeddings(container.embedding_ref->path);
        } else {
            throw DataError("linear model container carries no embedding table or reference");
        }
        return make_linear_classifier(container.taxonomy, container.vocab_primary,
                                      std::move(table), container.locale,
                                      *container.linear_category, *container.linear_subcategory);
    }
    if (container.family == "neural") {
        if (container.networks.empty()) {
            throw DataError("neural model container lacks its parameter section");
        }
        if (container.independent_heads) {
            if (container.networks.size() != 2) {
                throw DataError("independent-heads container must hold two networks");
            }
            return make_independent_classifier(rebuild_network(container, container.networks[0]),
                                               rebuild_network(container, container.networks[1]));
        }
        return make_neural_classifier(rebuild_network(container, container.networks[0]));
    }
    throw DataError("unknown model family in container: " + container.family);
}

}  // namespace titlecat::cli
