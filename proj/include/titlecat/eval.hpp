#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "titlecat/corpus.hpp"

namespace titlecat::eval {

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t support = 0;
};

struct ConfusionStats {
    std::map<std::string, ClassCounts> per_class;
    std::size_t total = 0;
    std::size_t correct = 0;
};

ConfusionStats count_confusion(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted);

struct ClassPRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

// Accuracy, per-class precision/recall/F1 and support-weighted average F1
// for one label level. Zero-denominator precision/recall are defined as 0.
struct LevelMetrics {
    double accuracy = 0.0;
    double waf1 = 0.0;
    std::map<std::string, ClassPRF> per_class;
};

LevelMetrics classification_metrics(const std::vector<std::string>& gold,
                                    const std::vector<std::string>& predicted);

// The model-comparison score: mean of category-level and subcategory-level
// WAF1.
double rank_metric(double waf1_category, double waf1_subcategory);

struct MetricsReport {
    LevelMetrics category;
    LevelMetrics subcategory;
    double rank = 0.0;
    double hierarchy_consistency_rate = 0.0;  // fraction with parent(pred sub) == pred cat
    std::size_t count = 0;
};

struct Prediction {
    std::string category;
    std::string subcategory;
    double category_prob = 0.0;
    double subcategory_prob = 0.0;
};

// Anything that maps a product to a (category, subcategory) pair. Trained
// linear and neural models are wrapped behind this for evaluation.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual Prediction predict(const corpus::Product& product) const = 0;
    virtual const corpus::Taxonomy& taxonomy() const = 0;
};

// Evaluates a classifier over a dataset; when primary_title_only is set the
// secondary title is withheld from the classifier (the cross-platform
// protocol).
MetricsReport evaluate(const Classifier& classifier, const corpus::Dataset& dataset,
                       bool primary_title_only = false);

using TrainerFn = std::function<std::unique_ptr<Classifier>(
    const corpus::Dataset& train, const corpus::Dataset& val, std::uint64_t seed)>;

struct AggregateCell {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
};

struct CrossvalResult {
    std::vector<MetricsReport> folds;
    AggregateCell accuracy_cat, accuracy_sub, waf1_cat, waf1_sub, rank;
    AggregateCell consistency;
};

// Stratified k-fold protocol: for each fold, the remaining folds are split
// 90-10 (stratified, seeded) into train/validation, the trainer runs, and the
// held-out fold is scored. Trainer errors are rethrown with the fold index.
CrossvalResult run_crossval(const TrainerFn& trainer, const corpus::Dataset& dataset, int k,
                            std::uint64_t seed, double train_fraction = 0.9);

struct TransferRow {
    std::string name;
    std::size_t products_before = 0, products_after = 0;
    std::size_t categories_before = 0, categories_after = 0;
    std::size_t subcategories_before = 0, subcategories_after = 0;
    std::optional<MetricsReport> metrics;  // absent when nothing survives filtering
};

// Filters each external dataset to the classifier's training taxonomy, then
// evaluates on primary titles only.
std::vector<TransferRow> cross_platform_eval(
    const Classifier& classifier,
    const std::vector<std::pair<std::string, corpus::Dataset>>& external);

struct AuditEntry {
    std::string id;
    std::string title;
    std::string gold_category, gold_subcategory;
    std::string predicted_category, predicted_subcategory;
    double subcategory_prob = 0.0;
};

// Products mispredicted at either level, most confident first (the likeliest
// label-noise candidates). limit == 0 means no limit.
std::vector<AuditEntry> misprediction_report(const Classifier& classifier,
                                             const corpus::Dataset& dataset, std::size_t limit);

// Rendering. Percent cells use one decimal ("95.2 ± 0.8"), matching the
// aggregate-table convention.
std::string format_pm(const AggregateCell& cell);
std::string render_report(const MetricsReport& report);
std::string render_crossval_table(const std::string& model_name, const CrossvalResult& result);
std::string render_transfer_table(const std::vector<TransferRow>& rows);
std::string render_audit_table(const std::vector<AuditEntry>& entries);

std::string crossval_csv(const std::string& model_name, const CrossvalResult& result,
                         char delimiter = ',');
std::string transfer_csv(const std::vector<TransferRow>& rows, char delimiter = ',');
std::string audit_csv(const std::vector<AuditEntry>& entries, char delimiter = ',');

}  // namespace titlecat::eval
