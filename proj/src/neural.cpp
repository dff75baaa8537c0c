#include "titlecat/neural.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "titlecat/common.hpp"
#include "titlecat/eval.hpp"

namespace titlecat::neural {

namespace {

constexpr double kMaskSmoothing = 0.00033546262790251185;  // exp(-8)

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::Index argmax(const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
    Eigen::VectorXd e = shifted.array().exp();
    return e / e.sum();
}

double log_softmax_at(const Eigen::VectorXd& logits, Eigen::Index index) {
    double mx = logits.maxCoeff();
    double lse = std::log((logits.array() - mx).exp().sum());
    return logits[index] - mx - lse;
}

void require_finite(const Eigen::VectorXd& v, const char* layer) {
    if (!v.allFinite()) {
        throw TrainError(std::string("non-finite activation in ") + layer);
    }
}

}  // namespace

HierarchyMask build_mask(const corpus::Taxonomy& taxonomy) {
    HierarchyMask mask;
    mask.categories = taxonomy.category_count();
    mask.subcategories = taxonomy.subcategory_count();
    mask.bits.assign(mask.categories * mask.subcategories, 0);
    for (std::size_t s = 0; s < mask.subcategories; ++s) {
        auto c = static_cast<std::size_t>(taxonomy.parent_of(static_cast<int>(s)));
        mask.bits[c * mask.subcategories + s] = 1;
    }
    return mask;
}

MaskedSoftmax masked_softmax_detail(const Eigen::VectorXd& logits, const std::uint8_t* mask_row) {
    const Eigen::Index S = logits.size();
    MaskedSoftmax out;
    out.exps = Eigen::VectorXd::Zero(S);

    out.shift_index = -1;
    for (Eigen::Index s = 0; s < S; ++s) {
        if (mask_row[s] && (out.shift_index < 0 || logits[s] > logits[out.shift_index])) {
            out.shift_index = static_cast<int>(s);
        }
    }
    out.degenerate = out.shift_index < 0;
    const double shift = out.degenerate ? 0.0 : logits[out.shift_index];

    for (Eigen::Index s = 0; s < S; ++s) {
        if (mask_row[s]) out.exps[s] = std::exp(logits[s] - shift);
    }
    out.denominator = out.exps.sum() + static_cast<double>(S) * kMaskSmoothing;
    out.probs = (out.exps.array() + kMaskSmoothing) / out.denominator;
    return out;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits,
                               const std::vector<std::uint8_t>& mask_row) {
    if (static_cast<Eigen::Index>(mask_row.size()) != logits.size()) {
        throw DataError("masked_softmax: logits and mask row differ in length");
    }
    if (!logits.allFinite()) throw DataError("masked_softmax: logits must be finite");
    return masked_softmax_detail(logits, mask_row.data()).probs;
}

EncoderVariant parse_encoder_variant(std::string_view name) {
    if (name == "mean_pool") return EncoderVariant::mean_pool;
    if (name == "bi_recurrent") return EncoderVariant::bi_recurrent;
    if (name == "dual_tower") return EncoderVariant::dual_tower;
    throw ConfigError("unknown encoder variant: " + std::string(name) +
                      " (expected mean_pool|bi_recurrent|dual_tower)");
}

std::string encoder_variant_name(EncoderVariant variant) {
    switch (variant) {
        case EncoderVariant::mean_pool: return "mean_pool";
        case EncoderVariant::bi_recurrent: return "bi_recurrent";
        case EncoderVariant::dual_tower: return "dual_tower";
    }
    return "?";
}

int ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (allocated_) throw TrainError("ParamStore: cannot add segments after allocation");
    Segment seg;
    seg.name = std::move(name);
    seg.offset = total_;
    seg.rows = rows;
    seg.cols = cols;
    total_ += static_cast<std::size_t>(rows * cols);
    segments_.push_back(std::move(seg));
    return static_cast<int>(segments_.size()) - 1;
}

void ParamStore::allocate() {
    values_.assign(total_, 0.0);
    allocated_ = true;
}

Eigen::Map<Eigen::MatrixXd> ParamStore::mat(int id) {
    const Segment& s = segments_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::mat(int id) const {
    const Segment& s = segments_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::mat_in(int id, std::vector<double>& buffer) const {
    const Segment& s = segments_.at(static_cast<std::size_t>(id));
    return {buffer.data() + s.offset, s.rows, s.cols};
}

ClassifierNetwork::ClassifierNetwork(corpus::Taxonomy taxonomy, NetworkSpec spec,
                                     features::Vocabulary vocab_primary,
                                     std::optional<features::Vocabulary> vocab_secondary,
                                     std::uint64_t init_seed,
                                     const features::EmbeddingTable* init_primary,
                                     const features::EmbeddingTable* init_secondary)
    : taxonomy_(std::move(taxonomy)),
      spec_(std::move(spec)),
      vocab_primary_(std::move(vocab_primary)),
      vocab_secondary_(std::move(vocab_secondary)) {
    if (taxonomy_.empty()) throw DataError("network requires a non-empty taxonomy");
    const bool dual = spec_.encoder.variant == EncoderVariant::dual_tower;
    if (dual && !vocab_secondary_) {
        throw ConfigError("dual_tower encoder requires a secondary-language vocabulary");
    }
    if (spec_.encoder.hidden_size < 1 || spec_.encoder.dense_size < 1 ||
        spec_.encoder.sequence_cap < 1 || spec_.embedding_dim_primary < 1 ||
        (dual && spec_.embedding_dim_secondary < 1)) {
        throw ConfigError("network sizes must be positive");
    }
    if (init_primary && init_primary->dimension != spec_.embedding_dim_primary) {
        spec_.embedding_dim_primary = init_primary->dimension;
    }
    if (init_secondary && init_secondary->dimension != spec_.embedding_dim_secondary) {
        spec_.embedding_dim_secondary = init_secondary->dimension;
    }

    const auto V1 = static_cast<Eigen::Index>(vocab_primary_.size());
    const Eigen::Index d1 = spec_.embedding_dim_primary;
    const Eigen::Index H = spec_.encoder.hidden_size;
    const Eigen::Index D = spec_.encoder.dense_size;
    const auto C = static_cast<Eigen::Index>(taxonomy_.category_count());
    const auto S = static_cast<Eigen::Index>(taxonomy_.subcategory_count());

    const bool trainable = spec_.encoder.train_embeddings;
    if (trainable) primary_ids_.emb = params_.add("emb_primary", d1, V1);
    if (dual && trainable) {
        secondary_ids_.emb = params_.add("emb_secondary", spec_.embedding_dim_secondary,
                                         static_cast<Eigen::Index>(vocab_secondary_->size()));
    }
    const bool recurrent = spec_.encoder.variant != EncoderVariant::mean_pool;
    if (recurrent) {
        primary_ids_.fwd = {params_.add("p_fwd_W", 4 * H, d1), params_.add("p_fwd_U", 4 * H, H),
                            params_.add("p_fwd_b", 4 * H, 1)};
        primary_ids_.bwd = {params_.add("p_bwd_W", 4 * H, d1), params_.add("p_bwd_U", 4 * H, H),
                            params_.add("p_bwd_b", 4 * H, 1)};
    }
    if (dual) {
        const Eigen::Index d2 = spec_.embedding_dim_secondary;
        secondary_ids_.fwd = {params_.add("s_fwd_W", 4 * H, d2), params_.add("s_fwd_U", 4 * H, H),
                              params_.add("s_fwd_b", 4 * H, 1)};
        secondary_ids_.bwd = {params_.add("s_bwd_W", 4 * H, d2), params_.add("s_bwd_U", 4 * H, H),
                              params_.add("s_bwd_b", 4 * H, 1)};
    }
    const Eigen::Index repr = representation_size();
    dense_W_ = params_.add("dense_W", D, repr);
    dense_b_ = params_.add("dense_b", D, 1);
    cat_W_ = params_.add("cat_W", C, D);
    cat_b_ = params_.add("cat_b", C, 1);
    sub_W_ = params_.add("sub_W", S, D);
    sub_b_ = params_.add("sub_b", S, 1);
    params_.allocate();

    init_parameters(init_seed, init_primary, init_secondary);
}

int ClassifierNetwork::representation_size() const {
    switch (spec_.encoder.variant) {
        case EncoderVariant::mean_pool: return spec_.embedding_dim_primary;
        case EncoderVariant::bi_recurrent: return 2 * spec_.encoder.hidden_size;
        case EncoderVariant::dual_tower: return 4 * spec_.encoder.hidden_size;
    }
    return 0;
}

Eigen::MatrixXd ClassifierNetwork::build_embedding_matrix(const features::Vocabulary& vocab,
                                                          int dim,
                                                          const features::EmbeddingTable* table,
                                                          std::mt19937_64& rng) const {
    Eigen::MatrixXd emb(dim, static_cast<Eigen::Index>(vocab.size()));
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t v = 0; v < vocab.size(); ++v) {
        const Eigen::VectorXd* vec = table ? table->find(vocab.tokens()[v]) : nullptr;
        if (vec) {
            emb.col(static_cast<Eigen::Index>(v)) = *vec;
        } else {
            for (int r = 0; r < dim; ++r) emb(r, static_cast<Eigen::Index>(v)) = dist(rng);
        }
    }
    return emb;
}

void ClassifierNetwork::init_parameters(std::uint64_t seed,
                                        const features::EmbeddingTable* init_primary,
                                        const features::EmbeddingTable* init_secondary) {
    std::mt19937_64 rng(mix_seed(seed, 0x1712a7));
    auto fill_uniform = [&](int id, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto m = params_.mat(id);
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
        }
    };
    auto init_lstm = [&](const LstmIds& ids, Eigen::Index in_dim) {
        fill_uniform(ids.W, 1.0 / std::sqrt(static_cast<double>(in_dim)));
        fill_uniform(ids.U, 1.0 / std::sqrt(static_cast<double>(spec_.encoder.hidden_size)));
        // biases stay zero
    };

    Eigen::MatrixXd emb1 = build_embedding_matrix(vocab_primary_, spec_.embedding_dim_primary,
                                                  init_primary, rng);
    if (primary_ids_.emb >= 0) {
        params_.mat(primary_ids_.emb) = emb1;
    } else {
        frozen_emb_primary_ = std::move(emb1);
    }
    const bool dual = spec_.encoder.variant == EncoderVariant::dual_tower;
    if (dual) {
        Eigen::MatrixXd emb2 = build_embedding_matrix(*vocab_secondary_,
                                                      spec_.embedding_dim_secondary,
                                                      init_secondary, rng);
        if (secondary_ids_.emb >= 0) {
            params_.mat(secondary_ids_.emb) = emb2;
        } else {
            frozen_emb_secondary_ = std::move(emb2);
        }
    }
    if (spec_.encoder.variant != EncoderVariant::mean_pool) {
        init_lstm(primary_ids_.fwd, spec_.embedding_dim_primary);
        init_lstm(primary_ids_.bwd, spec_.embedding_dim_primary);
    }
    if (dual) {
        init_lstm(secondary_ids_.fwd, spec_.embedding_dim_secondary);
        init_lstm(secondary_ids_.bwd, spec_.embedding_dim_secondary);
    }
    fill_uniform(dense_W_, 1.0 / std::sqrt(static_cast<double>(representation_size())));
    fill_uniform(cat_W_, 1.0 / std::sqrt(static_cast<double>(spec_.encoder.dense_size)));
    fill_uniform(sub_W_, 1.0 / std::sqrt(static_cast<double>(spec_.encoder.dense_size)));
}

void ClassifierNetwork::set_frozen_embeddings(Eigen::MatrixXd primary, Eigen::MatrixXd secondary) {
    if (spec_.encoder.train_embeddings) {
        throw ConfigError("set_frozen_embeddings on a network with trainable embeddings");
    }
    if (primary.rows() != spec_.embedding_dim_primary ||
        primary.cols() != static_cast<Eigen::Index>(vocab_primary_.size())) {
        throw DataError("frozen primary embedding matrix has the wrong shape");
    }
    frozen_emb_primary_ = std::move(primary);
    if (spec_.encoder.variant == EncoderVariant::dual_tower) {
        if (secondary.rows() != spec_.embedding_dim_secondary ||
            secondary.cols() != static_cast<Eigen::Index>(vocab_secondary_->size())) {
            throw DataError("frozen secondary embedding matrix has the wrong shape");
        }
        frozen_emb_secondary_ = std::move(secondary);
    }
}

std::vector<int> ClassifierNetwork::lookup_ids(const std::string& title,
                                               const features::Vocabulary& vocab) const {
    features::TokenSequence seq = features::tokenize(title, spec_.locale);
    std::vector<int> ids;
    ids.reserve(seq.size());
    for (const auto& token : seq.tokens) {
        if (auto idx = vocab.index_of(token)) ids.push_back(*idx);
        if (ids.size() >= static_cast<std::size_t>(spec_.encoder.sequence_cap)) break;
    }
    return ids;
}

ClassifierNetwork::Example ClassifierNetwork::make_example(const corpus::Product& product) const {
    Example ex;
    ex.primary_ids = lookup_ids(product.title_primary, vocab_primary_);
    if (spec_.encoder.variant == EncoderVariant::dual_tower) {
        ex.secondary_ids = lookup_ids(product.title_secondary, *vocab_secondary_);
    }
    ex.gold_category = taxonomy_.category_index(product.category).value_or(-1);
    ex.gold_subcategory = taxonomy_.subcategory_index(product.subcategory).value_or(-1);
    return ex;
}

Eigen::VectorXd ClassifierNetwork::embedding_column(bool secondary, int token) const {
    int id = secondary ? secondary_ids_.emb : primary_ids_.emb;
    if (id >= 0) return params_.mat(id).col(token);
    return (secondary ? frozen_emb_secondary_ : frozen_emb_primary_).col(token);
}

void ClassifierNetwork::run_lstm(const std::vector<Eigen::VectorXd>& xs, const LstmIds& ids,
                                 std::vector<StepCache>& steps) const {
    const Eigen::Index H = spec_.encoder.hidden_size;
    auto W = params_.mat(ids.W);
    auto U = params_.mat(ids.U);
    auto b = params_.mat(ids.b);
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
    steps.clear();
    steps.reserve(xs.size());
    for (const auto& x : xs) {
        StepCache step;
        step.x = x;
        step.pre = W * x + U * h_prev + b.col(0);
        step.i = step.pre.segment(0, H).unaryExpr([](double v) { return sigmoid(v); });
        step.f = step.pre.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
        step.g = step.pre.segment(2 * H, H).array().tanh();
        step.o = step.pre.segment(3 * H, H).unaryExpr([](double v) { return sigmoid(v); });
        step.c = step.f.cwiseProduct(c_prev) + step.i.cwiseProduct(step.g);
        step.tanh_c = step.c.array().tanh();
        step.h = step.o.cwiseProduct(step.tanh_c);
        h_prev = step.h;
        c_prev = step.c;
        steps.push_back(std::move(step));
    }
}

void ClassifierNetwork::run_tower(const std::vector<int>& ids, bool secondary,
                                  TowerCache& cache) const {
    cache.ids = ids;
    if (spec_.encoder.variant == EncoderVariant::mean_pool) {
        const Eigen::Index d = spec_.embedding_dim_primary;
        cache.pooled = Eigen::VectorXd::Zero(d);
        for (int token : ids) cache.pooled += embedding_column(secondary, token);
        if (!ids.empty()) cache.pooled /= static_cast<double>(ids.size());
        return;
    }
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(ids.size());
    for (int token : ids) xs.push_back(embedding_column(secondary, token));
    const LstmIds& fwd = secondary ? secondary_ids_.fwd : primary_ids_.fwd;
    const LstmIds& bwd = secondary ? secondary_ids_.bwd : primary_ids_.bwd;
    run_lstm(xs, fwd, cache.fwd);
    std::reverse(xs.begin(), xs.end());
    run_lstm(xs, bwd, cache.bwd);
}

ClassifierNetwork::Cache ClassifierNetwork::run_forward(const Example& example,
                                                        const HierarchyMask& mask,
                                                        std::optional<int> teacher_category) const {
    if (mask.categories != taxonomy_.category_count() ||
        mask.subcategories != taxonomy_.subcategory_count()) {
        throw DataError("hierarchy mask does not match the network taxonomy");
    }
    const Eigen::Index H = spec_.encoder.hidden_size;
    Cache cache;
    run_tower(example.primary_ids, /*secondary=*/false, cache.primary);

    switch (spec_.encoder.variant) {
        case EncoderVariant::mean_pool:
            cache.repr = cache.primary.pooled;
            break;
        case EncoderVariant::bi_recurrent: {
            cache.repr = Eigen::VectorXd::Zero(2 * H);
            if (!cache.primary.fwd.empty()) cache.repr.segment(0, H) = cache.primary.fwd.back().h;
            if (!cache.primary.bwd.empty()) cache.repr.segment(H, H) = cache.primary.bwd.back().h;
            break;
        }
        case EncoderVariant::dual_tower: {
            run_tower(example.secondary_ids, /*secondary=*/true, cache.secondary);
            cache.repr = Eigen::VectorXd::Zero(4 * H);
            if (!cache.primary.fwd.empty()) cache.repr.segment(0, H) = cache.primary.fwd.back().h;
            if (!cache.primary.bwd.empty()) cache.repr.segment(H, H) = cache.primary.bwd.back().h;
            if (!cache.secondary.fwd.empty()) cache.repr.segment(2 * H, H) = cache.secondary.fwd.back().h;
            if (!cache.secondary.bwd.empty()) cache.repr.segment(3 * H, H) = cache.secondary.bwd.back().h;
            break;
        }
    }
    require_finite(cache.repr, "encoder representation");

    cache.dense_pre = params_.mat(dense_W_) * cache.repr + params_.mat(dense_b_).col(0);
    cache.dense_act = cache.dense_pre.cwiseMax(0.0);
    require_finite(cache.dense_act, "dense layer");

    cache.cat_logits = params_.mat(cat_W_) * cache.dense_act + params_.mat(cat_b_).col(0);
    require_finite(cache.cat_logits, "category head");
    cache.cat_probs = softmax(cache.cat_logits);

    cache.sub_logits = params_.mat(sub_W_) * cache.dense_act + params_.mat(sub_b_).col(0);
    require_finite(cache.sub_logits, "subcategory head");

    if (spec_.masking_enabled) {
        int row = teacher_category ? *teacher_category
                                   : static_cast<int>(argmax(cache.cat_probs));
        if (row < 0 || static_cast<std::size_t>(row) >= mask.categories) {
            throw DataError("mask row index out of range");
        }
        cache.mask_row_used = row;
        cache.sub = masked_softmax_detail(cache.sub_logits, mask.row(static_cast<std::size_t>(row)));
        cache.sub_probs = cache.sub.probs;
    } else {
        cache.mask_row_used = -1;
        cache.sub_probs = softmax(cache.sub_logits);
    }
    return cache;
}

ForwardResult ClassifierNetwork::forward(const corpus::Product& product,
                                         const HierarchyMask& mask,
                                         std::optional<int> teacher_category) const {
    Cache cache = run_forward(make_example(product), mask, teacher_category);
    ForwardResult out;
    out.category_probs = std::move(cache.cat_probs);
    out.subcategory_probs = std::move(cache.sub_probs);
    out.degenerate_mask = cache.mask_row_used >= 0 && cache.sub.degenerate;
    return out;
}

double ClassifierNetwork::loss(const Example& example, const HierarchyMask& mask) const {
    if (example.gold_category < 0 || example.gold_subcategory < 0) {
        throw DataError("loss requires gold labels drawn from the network taxonomy");
    }
    Cache cache = run_forward(example, mask, example.gold_category);
    double total = 0.0;
    if (spec_.heads != HeadSelection::subcategory_only) {
        total -= log_softmax_at(cache.cat_logits, example.gold_category);
    }
    if (spec_.heads != HeadSelection::category_only) {
        if (cache.mask_row_used >= 0) {
            double numer = cache.sub.exps[example.gold_subcategory] + kMaskSmoothing;
            total -= std::log(numer) - std::log(cache.sub.denominator);
        } else {
            total -= log_softmax_at(cache.sub_logits, example.gold_subcategory);
        }
    }
    return total;
}

double ClassifierNetwork::loss(const corpus::Product& product, int gold_category,
                               int gold_subcategory, const HierarchyMask& mask) const {
    Example ex = make_example(product);
    ex.gold_category = gold_category;
    ex.gold_subcategory = gold_subcategory;
    return loss(ex, mask);
}

void ClassifierNetwork::backward_lstm(const std::vector<StepCache>& steps, const LstmIds& ids,
                                      const Eigen::VectorXd& d_h_final, bool secondary, int emb_id,
                                      const std::vector<int>& ids_in_order, double scale,
                                      std::vector<double>& gradients) const {
    if (steps.empty()) return;
    const Eigen::Index H = spec_.encoder.hidden_size;
    auto W = params_.mat(ids.W);
    auto U = params_.mat(ids.U);
    auto dW = params_.mat_in(ids.W, gradients);
    auto dU = params_.mat_in(ids.U, gradients);
    auto db = params_.mat_in(ids.b, gradients);

    Eigen::VectorXd dh = d_h_final;
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
    for (std::size_t t = steps.size(); t-- > 0;) {
        const StepCache& step = steps[t];
        Eigen::VectorXd d_o = dh.cwiseProduct(step.tanh_c);
        dc += dh.cwiseProduct(step.o).cwiseProduct(
            (1.0 - step.tanh_c.array().square()).matrix());
        Eigen::VectorXd d_i = dc.cwiseProduct(step.g);
        Eigen::VectorXd d_g = dc.cwiseProduct(step.i);
        Eigen::VectorXd c_prev = t == 0 ? Eigen::VectorXd::Zero(H) : steps[t - 1].c;
        Eigen::VectorXd d_f = dc.cwiseProduct(c_prev);

        Eigen::VectorXd d_pre(4 * H);
        d_pre.segment(0, H) =
            d_i.cwiseProduct(step.i).cwiseProduct((1.0 - step.i.array()).matrix());
        d_pre.segment(H, H) =
            d_f.cwiseProduct(step.f).cwiseProduct((1.0 - step.f.array()).matrix());
        d_pre.segment(2 * H, H) = d_g.cwiseProduct((1.0 - step.g.array().square()).matrix());
        d_pre.segment(3 * H, H) =
            d_o.cwiseProduct(step.o).cwiseProduct((1.0 - step.o.array()).matrix());

        Eigen::VectorXd h_prev = t == 0 ? Eigen::VectorXd::Zero(H) : steps[t - 1].h;
        dW += scale * d_pre * step.x.transpose();
        dU += scale * d_pre * h_prev.transpose();
        db.col(0) += scale * d_pre;

        if (emb_id >= 0) {
            auto demb = params_.mat_in(emb_id, gradients);
            demb.col(ids_in_order[t]) += scale * (W.transpose() * d_pre);
        }
        dh = U.transpose() * d_pre;
        dc = dc.cwiseProduct(step.f);
    }
    (void)secondary;
}

void ClassifierNetwork::backward_tower(const TowerCache& cache, bool secondary,
                                       const Eigen::VectorXd& d_repr, Eigen::Index repr_offset,
                                       double scale, std::vector<double>& gradients) const {
    const Eigen::Index H = spec_.encoder.hidden_size;
    const TowerIds& tower = secondary ? secondary_ids_ : primary_ids_;
    if (spec_.encoder.variant == EncoderVariant::mean_pool) {
        if (cache.ids.empty() || tower.emb < 0) return;
        auto demb = params_.mat_in(tower.emb, gradients);
        Eigen::VectorXd per_token =
            d_repr.segment(repr_offset, spec_.embedding_dim_primary) *
            (scale / static_cast<double>(cache.ids.size()));
        for (int token : cache.ids) demb.col(token) += per_token;
        return;
    }
    std::vector<int> forward_order = cache.ids;
    backward_lstm(cache.fwd, tower.fwd, d_repr.segment(repr_offset, H), secondary, tower.emb,
                  forward_order, scale, gradients);
    std::reverse(forward_order.begin(), forward_order.end());
    backward_lstm(cache.bwd, tower.bwd, d_repr.segment(repr_offset + H, H), secondary, tower.emb,
                  forward_order, scale, gradients);
}

void ClassifierNetwork::backward(const Example& example, const Cache& cache, double scale,
                                 std::vector<double>& gradients) const {
    const auto C = static_cast<Eigen::Index>(taxonomy_.category_count());
    const auto S = static_cast<Eigen::Index>(taxonomy_.subcategory_count());
    const Eigen::Index D = spec_.encoder.dense_size;

    Eigen::VectorXd d_dense = Eigen::VectorXd::Zero(D);

    if (spec_.heads != HeadSelection::subcategory_only) {
        Eigen::VectorXd d_cat = cache.cat_probs;
        d_cat[example.gold_category] -= 1.0;
        params_.mat_in(cat_W_, gradients) += scale * d_cat * cache.dense_act.transpose();
        params_.mat_in(cat_b_, gradients).col(0) += scale * d_cat;
        d_dense += params_.mat(cat_W_).transpose() * d_cat;
    }
    if (spec_.heads != HeadSelection::category_only) {
        Eigen::VectorXd d_sub(S);
        if (cache.mask_row_used >= 0) {
            // d(-ln P_g)/dO'_k = e_k/D - [k==g] e_g/n_g over the shifted
            // logits; the shift itself is O_{k*}, so its total derivative is
            // routed back through index k*.
            const auto g = static_cast<Eigen::Index>(example.gold_subcategory);
            d_sub = cache.sub.exps / cache.sub.denominator;
            double n_g = cache.sub.exps[g] + kMaskSmoothing;
            d_sub[g] -= cache.sub.exps[g] / n_g;
            if (cache.sub.shift_index >= 0) {
                d_sub[cache.sub.shift_index] -= d_sub.sum();
            }
        } else {
            d_sub = cache.sub_probs;
            d_sub[example.gold_subcategory] -= 1.0;
        }
        params_.mat_in(sub_W_, gradients) += scale * d_sub * cache.dense_act.transpose();
        params_.mat_in(sub_b_, gradients).col(0) += scale * d_sub;
        d_dense += params_.mat(sub_W_).transpose() * d_sub;
    }
    (void)C;

    Eigen::VectorXd d_pre =
        d_dense.cwiseProduct((cache.dense_pre.array() > 0.0).cast<double>().matrix());
    params_.mat_in(dense_W_, gradients) += scale * d_pre * cache.repr.transpose();
    params_.mat_in(dense_b_, gradients).col(0) += scale * d_pre;
    Eigen::VectorXd d_repr = params_.mat(dense_W_).transpose() * d_pre;

    backward_tower(cache.primary, /*secondary=*/false, d_repr, 0, scale, gradients);
    if (spec_.encoder.variant == EncoderVariant::dual_tower) {
        backward_tower(cache.secondary, /*secondary=*/true, d_repr,
                       2 * spec_.encoder.hidden_size, scale, gradients);
    }
}

double ClassifierNetwork::compute_gradients(const std::vector<Example>& batch,
                                            const HierarchyMask& mask,
                                            std::vector<double>& gradients) const {
    if (batch.empty()) throw DataError("compute_gradients: batch is empty");
    gradients.assign(params_.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total_loss = 0.0;
    for (const auto& example : batch) {
        if (example.gold_category < 0 || example.gold_subcategory < 0) {
            throw DataError("compute_gradients: example lacks gold labels from the taxonomy");
        }
        Cache cache = run_forward(example, mask, example.gold_category);
        if (spec_.heads != HeadSelection::subcategory_only) {
            total_loss -= log_softmax_at(cache.cat_logits, example.gold_category);
        }
        if (spec_.heads != HeadSelection::category_only) {
            if (cache.mask_row_used >= 0) {
                double numer = cache.sub.exps[example.gold_subcategory] + kMaskSmoothing;
                total_loss -= std::log(numer) - std::log(cache.sub.denominator);
            } else {
                total_loss -= log_softmax_at(cache.sub_logits, example.gold_subcategory);
            }
        }
        backward(example, cache, scale, gradients);
    }
    return total_loss * scale;
}

HierarchicalPrediction ClassifierNetwork::predict_hierarchical(const corpus::Product& product,
                                                               const HierarchyMask& mask) const {
    Cache cache = run_forward(make_example(product), mask, std::nullopt);
    HierarchicalPrediction pred;
    pred.category = static_cast<int>(argmax(cache.cat_probs));
    pred.subcategory = static_cast<int>(argmax(cache.sub_probs));
    pred.category_probs = std::move(cache.cat_probs);
    pred.subcategory_probs = std::move(cache.sub_probs);
    return pred;
}

namespace {

double validation_metric(const ClassifierNetwork& network, const corpus::Dataset& val,
                         const HierarchyMask& mask) {
    std::vector<std::string> gold_cat, gold_sub, pred_cat, pred_sub;
    gold_cat.reserve(val.size());
    const auto& tax = network.taxonomy();
    for (const auto& product : val.products) {
        HierarchicalPrediction pred = network.predict_hierarchical(product, mask);
        gold_cat.push_back(product.category);
        gold_sub.push_back(product.subcategory);
        pred_cat.push_back(tax.categories()[static_cast<std::size_t>(pred.category)]);
        pred_sub.push_back(tax.subcategories()[static_cast<std::size_t>(pred.subcategory)]);
    }
    switch (network.spec().heads) {
        case HeadSelection::category_only:
            return eval::classification_metrics(gold_cat, pred_cat).waf1;
        case HeadSelection::subcategory_only:
            return eval::classification_metrics(gold_sub, pred_sub).waf1;
        case HeadSelection::both:
            break;
    }
    return eval::rank_metric(eval::classification_metrics(gold_cat, pred_cat).waf1,
                             eval::classification_metrics(gold_sub, pred_sub).waf1);
}

}  // namespace

TrainLog train_network(ClassifierNetwork& network, const corpus::Dataset& train,
                       const corpus::Dataset& val, const TrainConfig& config,
                       const ValidationHook& validation_hook) {
    if (config.learning_rate <= 0.0 || config.batch_size < 1 || config.max_epochs < 1 ||
        config.patience < 1) {
        throw ConfigError("train_network: config values must be positive");
    }
    if (train.products.empty() || val.products.empty()) {
        throw DataError("train_network: train and validation sets must be non-empty");
    }
    if (!(train.taxonomy == network.taxonomy()) || !(val.taxonomy == network.taxonomy())) {
        throw DataError("train_network: datasets do not share the network's taxonomy");
    }

    const HierarchyMask mask = build_mask(network.taxonomy());
    std::vector<ClassifierNetwork::Example> examples;
    examples.reserve(train.size());
    for (const auto& product : train.products) {
        auto ex = network.make_example(product);
        if (ex.gold_category < 0 || ex.gold_subcategory < 0) {
            throw DataError("train_network: product " + product.id +
                            " carries labels outside the taxonomy");
        }
        examples.push_back(std::move(ex));
    }

    const std::size_t P = network.parameter_count();
    std::vector<double> grads(P, 0.0);
    std::vector<double> adam_m(P, 0.0), adam_v(P, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    std::mt19937_64 rng(mix_seed(config.seed, 0x5add1e));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    std::vector<double> best_theta = network.parameters();
    double best_metric = -std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t pos = 0;
        std::vector<ClassifierNetwork::Example> batch;
        while (pos < order.size()) {
            std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                     order.size() - pos);
            batch.clear();
            for (std::size_t i = 0; i < take; ++i) batch.push_back(examples[order[pos + i]]);
            pos += take;

            double batch_loss = network.compute_gradients(batch, mask, grads);
            loss_sum += batch_loss * static_cast<double>(take);

            beta1_t *= beta1;
            beta2_t *= beta2;
            std::vector<double>& theta = network.parameters();
            for (std::size_t p = 0; p < P; ++p) {
                adam_m[p] = beta1 * adam_m[p] + (1.0 - beta1) * grads[p];
                adam_v[p] = beta2 * adam_v[p] + (1.0 - beta2) * grads[p] * grads[p];
                double m_hat = adam_m[p] / (1.0 - beta1_t);
                double v_hat = adam_v[p] / (1.0 - beta2_t);
                theta[p] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + adam_eps);
            }
        }

        double train_loss = loss_sum / static_cast<double>(examples.size());
        double metric = validation_hook ? validation_hook(network, epoch)
                                        : validation_metric(network, val, mask);
        if (!std::isfinite(metric)) {
            throw TrainError("validation metric is not finite at epoch " + std::to_string(epoch) +
                             " (train loss " + std::to_string(train_loss) + ")");
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back({epoch, train_loss, metric, seconds});

        if (metric > best_metric) {
            best_metric = metric;
            best_theta = network.parameters();
            log.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement >= config.patience) {
            log.stopped_early = true;
            break;
        }
    }

    network.parameters() = best_theta;
    log.best_metric = best_metric;
    return log;
}

}  // namespace titlecat::neural
