#include "titlecat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "titlecat/common.hpp"

namespace titlecat::eval {

ConfusionStats count_confusion(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted) {
    if (gold.size() != predicted.size()) {
        throw DataError("gold and predicted label lists differ in length");
    }
    if (gold.empty()) throw DataError("cannot compute metrics over zero predictions");

    ConfusionStats stats;
    stats.total = gold.size();
    for (std::size_t i = 0; i < gold.size(); ++i) {
        stats.per_class[gold[i]];  // ensure every gold class appears
        stats.per_class[predicted[i]];
        if (gold[i] == predicted[i]) {
            ++stats.correct;
            ++stats.per_class[gold[i]].tp;
        } else {
            ++stats.per_class[predicted[i]].fp;
            ++stats.per_class[gold[i]].fn;
        }
        ++stats.per_class[gold[i]].support;
    }
    return stats;
}

LevelMetrics classification_metrics(const std::vector<std::string>& gold,
                                    const std::vector<std::string>& predicted) {
    ConfusionStats stats = count_confusion(gold, predicted);
    LevelMetrics m;
    m.accuracy = static_cast<double>(stats.correct) / static_cast<double>(stats.total);

    double weighted = 0.0;
    std::size_t support_sum = 0;
    for (const auto& [label, c] : stats.per_class) {
        ClassPRF prf;
        prf.support = c.support;
        std::size_t pdenom = c.tp + c.fp;
        std::size_t rdenom = c.tp + c.fn;
        prf.precision = pdenom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(pdenom);
        prf.recall = rdenom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(rdenom);
        double fdenom = prf.precision + prf.recall;
        prf.f1 = fdenom == 0.0 ? 0.0 : 2.0 * prf.precision * prf.recall / fdenom;
        weighted += static_cast<double>(prf.support) * prf.f1;
        support_sum += prf.support;
        m.per_class.emplace(label, prf);
    }
    m.waf1 = weighted / static_cast<double>(support_sum);
    return m;
}

double rank_metric(double waf1_category, double waf1_subcategory) {
    if (waf1_category < 0.0 || waf1_category > 1.0 || waf1_subcategory < 0.0 ||
        waf1_subcategory > 1.0) {
        throw DataError("rank_metric inputs must lie in [0,1]");
    }
    return 0.5 * (waf1_category + waf1_subcategory);
}

MetricsReport evaluate(const Classifier& classifier, const corpus::Dataset& dataset,
                       bool primary_title_only) {
    if (dataset.products.empty()) throw DataError("cannot evaluate on an empty dataset");
    const corpus::Taxonomy& tax = classifier.taxonomy();

    std::vector<std::string> gold_cat, gold_sub, pred_cat, pred_sub;
    gold_cat.reserve(dataset.size());
    std::size_t consistent = 0;
    for (const auto& product : dataset.products) {
        Prediction pred;
        if (primary_title_only) {
            corpus::Product stripped = product;
            stripped.title_secondary.clear();
            pred = classifier.predict(stripped);
        } else {
            pred = classifier.predict(product);
        }
        gold_cat.push_back(product.category);
        gold_sub.push_back(product.subcategory);
        pred_cat.push_back(pred.category);
        pred_sub.push_back(pred.subcategory);

        auto sub_idx = tax.subcategory_index(pred.subcategory);
        auto cat_idx = tax.category_index(pred.category);
        if (sub_idx && cat_idx && tax.parent_of(*sub_idx) == *cat_idx) ++consistent;
    }

    MetricsReport report;
    report.category = classification_metrics(gold_cat, pred_cat);
    report.subcategory = classification_metrics(gold_sub, pred_sub);
    report.rank = rank_metric(report.category.waf1, report.subcategory.waf1);
    report.hierarchy_consistency_rate =
        static_cast<double>(consistent) / static_cast<double>(dataset.size());
    report.count = dataset.size();
    return report;
}

namespace {

AggregateCell aggregate(const std::vector<MetricsReport>& folds,
                        const std::function<double(const MetricsReport&)>& pick) {
    AggregateCell cell;
    double n = static_cast<double>(folds.size());
    for (const auto& f : folds) cell.mean += pick(f);
    cell.mean /= n;
    if (folds.size() > 1) {
        double ss = 0.0;
        for (const auto& f : folds) {
            double d = pick(f) - cell.mean;
            ss += d * d;
        }
        cell.stddev = std::sqrt(ss / (n - 1.0));
    }
    return cell;
}

corpus::Dataset subset(const corpus::Dataset& dataset, const std::vector<std::size_t>& indices) {
    corpus::Dataset out{{}, dataset.taxonomy};
    out.products.reserve(indices.size());
    for (std::size_t i : indices) out.products.push_back(dataset.products[i]);
    return out;
}

}  // namespace

CrossvalResult run_crossval(const TrainerFn& trainer, const corpus::Dataset& dataset, int k,
                            std::uint64_t seed, double train_fraction) {
    auto folds = corpus::stratified_kfold(dataset, k, seed);
    CrossvalResult result;
    result.folds.reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        try {
            corpus::Dataset pool = subset(dataset, folds[f].train);
            corpus::Dataset test = subset(dataset, folds[f].test);
            auto [train, val] = corpus::train_val_split(pool, train_fraction, mix_seed(seed, 1000 + f));
            auto classifier = trainer(train, val, mix_seed(seed, 2000 + f));
            result.folds.push_back(evaluate(*classifier, test));
        } catch (const TrainError& e) {
            throw TrainError("fold " + std::to_string(f) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("fold " + std::to_string(f) + ": " + e.what());
        }
    }
    result.accuracy_cat = aggregate(result.folds, [](const MetricsReport& r) { return r.category.accuracy; });
    result.accuracy_sub = aggregate(result.folds, [](const MetricsReport& r) { return r.subcategory.accuracy; });
    result.waf1_cat = aggregate(result.folds, [](const MetricsReport& r) { return r.category.waf1; });
    result.waf1_sub = aggregate(result.folds, [](const MetricsReport& r) { return r.subcategory.waf1; });
    result.rank = aggregate(result.folds, [](const MetricsReport& r) { return r.rank; });
    result.consistency =
        aggregate(result.folds, [](const MetricsReport& r) { return r.hierarchy_consistency_rate; });
    return result;
}

std::vector<TransferRow> cross_platform_eval(
    const Classifier& classifier,
    const std::vector<std::pair<std::string, corpus::Dataset>>& external) {
    std::vector<TransferRow> rows;
    rows.reserve(external.size());
    for (const auto& [name, dataset] : external) {
        corpus::FilterResult filtered = corpus::filter_to_taxonomy(dataset, classifier.taxonomy());
        TransferRow row;
        row.name = name;
        row.products_before = filtered.products_before;
        row.products_after = filtered.products_after;
        row.categories_before = filtered.categories_before;
        row.categories_after = filtered.categories_after;
        row.subcategories_before = filtered.subcategories_before;
        row.subcategories_after = filtered.subcategories_after;
        if (!filtered.dataset.products.empty()) {
            row.metrics = evaluate(classifier, filtered.dataset, /*primary_title_only=*/true);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<AuditEntry> misprediction_report(const Classifier& classifier,
                                             const corpus::Dataset& dataset, std::size_t limit) {
    std::vector<AuditEntry> entries;
    for (const auto& product : dataset.products) {
        Prediction pred = classifier.predict(product);
        if (pred.category == product.category && pred.subcategory == product.subcategory) continue;
        AuditEntry entry;
        entry.id = product.id;
        entry.title = product.title_primary;
        entry.gold_category = product.category;
        entry.gold_subcategory = product.subcategory;
        entry.predicted_category = pred.category;
        entry.predicted_subcategory = pred.subcategory;
        entry.subcategory_prob = pred.subcategory_prob;
        entries.push_back(std::move(entry));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const AuditEntry& a, const AuditEntry& b) {
        return a.subcategory_prob > b.subcategory_prob;
    });
    if (limit > 0 && entries.size() > limit) entries.resize(limit);
    return entries;
}

namespace {

std::string percent1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v * 100.0);
    return buf;
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// '±' is two bytes; pad by display width, not byte count.
std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++w;
    }
    return w;
}

std::string pad(const std::string& s, std::size_t width) {
    std::string out = s;
    std::size_t w = display_width(s);
    if (w < width) out.append(width - w, ' ');
    return out;
}

std::string render_columns(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], display_width(row[c]));
        }
    }
    std::string out;
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += pad(row[c], widths[c]);
            if (c + 1 < row.size()) line += "  ";
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace

std::string format_pm(const AggregateCell& cell) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", cell.mean * 100.0, cell.stddev * 100.0);
    return buf;
}

std::string render_report(const MetricsReport& report) {
    std::ostringstream out;
    out << "products evaluated:    " << report.count << '\n'
        << "accuracy (cat, sub):   " << percent1(report.category.accuracy) << "  "
        << percent1(report.subcategory.accuracy) << '\n'
        << "WAF1 (cat, sub):       " << percent1(report.category.waf1) << "  "
        << percent1(report.subcategory.waf1) << '\n'
        << "rank metric:           " << percent1(report.rank) << '\n'
        << "hierarchy consistency: " << percent1(report.hierarchy_consistency_rate) << '\n';
    return out.str();
}

std::string render_crossval_table(const std::string& model_name, const CrossvalResult& result) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Model", "Acc Cat (%)", "Acc Sub (%)", "WAF1 Cat (%)", "WAF1 Sub (%)", "Avg."});
    rows.push_back({model_name, format_pm(result.accuracy_cat), format_pm(result.accuracy_sub),
                    format_pm(result.waf1_cat), format_pm(result.waf1_sub),
                    percent1(result.rank.mean)});
    return render_columns(rows);
}

std::string render_transfer_table(const std::vector<TransferRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Dataset", "Products", "Categories", "Subcategories", "WAF1 Cat (%)",
                     "WAF1 Sub (%)", "Avg."});
    for (const auto& row : rows) {
        std::vector<std::string> line;
        line.push_back(row.name);
        line.push_back(std::to_string(row.products_before) + " -> " + std::to_string(row.products_after));
        line.push_back(std::to_string(row.categories_before) + " -> " + std::to_string(row.categories_after));
        line.push_back(std::to_string(row.subcategories_before) + " -> " +
                       std::to_string(row.subcategories_after));
        if (row.metrics) {
            line.push_back(percent1(row.metrics->category.waf1));
            line.push_back(percent1(row.metrics->subcategory.waf1));
            line.push_back(percent1(row.metrics->rank));
        } else {
            line.insert(line.end(), {"-", "-", "-"});
        }
        cells.push_back(std::move(line));
    }
    return render_columns(cells);
}

std::string render_audit_table(const std::vector<AuditEntry>& entries) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Id", "Title", "Category", "Category Prediction", "Subcategory",
                     "Subcategory Prediction", "Confidence"});
    for (const auto& e : entries) {
        cells.push_back({e.id, e.title, e.gold_category, e.predicted_category, e.gold_subcategory,
                         e.predicted_subcategory, fixed3(e.subcategory_prob)});
    }
    return render_columns(cells);
}

std::string crossval_csv(const std::string& model_name, const CrossvalResult& result,
                         char delimiter) {
    std::ostringstream out;
    const char d = delimiter;
    out << "model" << d << "fold" << d << "accuracy_cat" << d << "accuracy_sub" << d << "waf1_cat"
        << d << "waf1_sub" << d << "rank" << d << "consistency\n";
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
        const auto& r = result.folds[f];
        out << csv_field(model_name, d) << d << f << d << r.category.accuracy << d
            << r.subcategory.accuracy << d << r.category.waf1 << d << r.subcategory.waf1 << d
            << r.rank << d << r.hierarchy_consistency_rate << '\n';
    }
    out << csv_field(model_name, d) << d << "mean" << d << result.accuracy_cat.mean << d
        << result.accuracy_sub.mean << d << result.waf1_cat.mean << d << result.waf1_sub.mean << d
        << result.rank.mean << d << result.consistency.mean << '\n';
    out << csv_field(model_name, d) << d << "stddev" << d << result.accuracy_cat.stddev << d
        << result.accuracy_sub.stddev << d << result.waf1_cat.stddev << d
        << result.waf1_sub.stddev << d << result.rank.stddev << d << result.consistency.stddev
        << '\n';
    return out.str();
}

std::string transfer_csv(const std::vector<TransferRow>& rows, char delimiter) {
    std::ostringstream out;
    const char d = delimiter;
    out << "dataset" << d << "products_before" << d << "products_after" << d << "categories_before"
        << d << "categories_after" << d << "subcategories_before" << d << "subcategories_after"
        << d << "waf1_cat" << d << "waf1_sub" << d << "rank\n";
    for (const auto& row : rows) {
        out << csv_field(row.name, d) << d << row.products_before << d << row.products_after << d
            << row.categories_before << d << row.categories_after << d
            << row.subcategories_before << d << row.subcategories_after << d;
        if (row.metrics) {
            out << row.metrics->category.waf1 << d << row.metrics->subcategory.waf1 << d
                << row.metrics->rank;
        } else {
            out << d;
        }
        out << '\n';
    }
    return out.str();
}

std::string audit_csv(const std::vector<AuditEntry>& entries, char delimiter) {
    std::ostringstream out;
    const char d = delimiter;
    out << "id" << d << "title" << d << "gold_cat" << d << "gold_sub" << d << "pred_cat" << d
        << "pred_sub" << d << "confidence\n";
    for (const auto& e : entries) {
        out << csv_field(e.id, d) << d << csv_field(e.title, d) << d
            << csv_field(e.gold_category, d) << d << csv_field(e.gold_subcategory, d) << d
            << csv_field(e.predicted_category, d) << d << csv_field(e.predicted_subcategory, d)
            << d << fixed3(e.subcategory_prob) << '\n';
    }
    return out.str();
}

}  // namespace titlecat::eval
