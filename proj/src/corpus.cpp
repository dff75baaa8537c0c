#include "titlecat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "titlecat/common.hpp"

namespace titlecat::corpus {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record starts
};

// RFC-4180-style reader: quoted fields may contain the delimiter, doubled
// quotes and line breaks.
std::vector<CsvRecord> parse_delimited(const std::string& content, char delimiter) {
    std::vector<CsvRecord> records;
    CsvRecord record;
    std::string field;
    bool in_quotes = false;
    bool field_started_quoted = false;
    bool record_has_content = false;
    std::size_t line = 1;
    record.line = 1;

    auto end_field = [&]() {
        record.fields.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(std::move(record));
        record = CsvRecord{};
        record.line = line;
        record_has_content = false;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_started_quoted) {
            in_quotes = true;
            field_started_quoted = true;
            record_has_content = true;
        } else if (c == delimiter) {
            end_field();
            record_has_content = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
            ++line;
            if (record_has_content || !field.empty() || !record.fields.empty()) {
                end_record();
            } else {
                record.line = line;  // skip blank line
            }
        } else {
            field += c;
            record_has_content = true;
        }
    }
    if (record_has_content || !field.empty() || !record.fields.empty()) {
        records.push_back([&] {
            record.fields.push_back(std::move(field));
            return std::move(record);
        }());
    }
    return records;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return i;
    }
    throw DataError("schema error: column '" + name + "' not found in " + path);
}

// Canonical within-class ordering independent of input row order; identical
// titles are interchangeable for splitting purposes.
void canonical_class_order(const Dataset& dataset, std::vector<std::size_t>& members) {
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        const Product& pa = dataset.products[a];
        const Product& pb = dataset.products[b];
        if (pa.title_primary != pb.title_primary) return pa.title_primary < pb.title_primary;
        return pa.title_secondary < pb.title_secondary;
    });
}

std::map<std::string, std::vector<std::size_t>> group_by_subcategory(const Dataset& dataset) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dataset.products.size(); ++i) {
        groups[dataset.products[i].subcategory].push_back(i);
    }
    return groups;
}

double quantile(const std::vector<std::size_t>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) * (1.0 - frac) + static_cast<double>(sorted[hi]) * frac;
}

}  // namespace

void Taxonomy::rebuild_index() {
    category_index_.clear();
    subcategory_index_.clear();
    for (std::size_t i = 0; i < categories_.size(); ++i) category_index_[categories_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < subcategories_.size(); ++i) subcategory_index_[subcategories_[i]] = static_cast<int>(i);
}

Taxonomy Taxonomy::from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) throw DataError("cannot build a taxonomy from an empty label space");

    std::map<std::string, std::set<std::string>> parents_of_sub;
    std::set<std::string> categories;
    for (const auto& [cat, sub] : pairs) {
        parents_of_sub[sub].insert(cat);
        categories.insert(cat);
    }
    std::string conflicts;
    for (const auto& [sub, cats] : parents_of_sub) {
        if (cats.size() > 1) {
            conflicts += conflicts.empty() ? "" : "; ";
            conflicts += "'" + sub + "' under {";
            bool first = true;
            for (const auto& c : cats) {
                conflicts += (first ? "'" : ", '") + c + "'";
                first = false;
            }
            conflicts += "}";
        }
    }
    if (!conflicts.empty()) {
        throw DataError("ambiguous taxonomy: subcategory observed under multiple categories: " + conflicts);
    }

    Taxonomy t;
    t.categories_.assign(categories.begin(), categories.end());
    t.subcategories_.reserve(parents_of_sub.size());
    for (const auto& [sub, cats] : parents_of_sub) t.subcategories_.push_back(sub);
    t.rebuild_index();
    t.parent_.reserve(t.subcategories_.size());
    for (const auto& sub : t.subcategories_) {
        t.parent_.push_back(t.category_index_.at(*parents_of_sub.at(sub).begin()));
    }
    return t;
}

Taxonomy Taxonomy::from_parts(std::vector<std::string> categories,
                              std::vector<std::string> subcategories, std::vector<int> parent) {
    if (categories.empty() || subcategories.empty()) throw DataError("taxonomy parts are empty");
    if (parent.size() != subcategories.size()) throw DataError("taxonomy parent map is not total");
    if (!std::is_sorted(categories.begin(), categories.end()) ||
        std::adjacent_find(categories.begin(), categories.end()) != categories.end()) {
        throw DataError("taxonomy category list is not sorted and distinct");
    }
    if (!std::is_sorted(subcategories.begin(), subcategories.end()) ||
        std::adjacent_find(subcategories.begin(), subcategories.end()) != subcategories.end()) {
        throw DataError("taxonomy subcategory list is not sorted and distinct");
    }
    for (int p : parent) {
        if (p < 0 || static_cast<std::size_t>(p) >= categories.size()) {
            throw DataError("taxonomy parent index out of range");
        }
    }
    Taxonomy t;
    t.categories_ = std::move(categories);
    t.subcategories_ = std::move(subcategories);
    t.parent_ = std::move(parent);
    t.rebuild_index();
    return t;
}

std::optional<int> Taxonomy::category_index(const std::string& label) const {
    auto it = category_index_.find(label);
    if (it == category_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Taxonomy::subcategory_index(const std::string& label) const {
    auto it = subcategory_index_.find(label);
    if (it == subcategory_index_.end()) return std::nullopt;
    return it->second;
}

bool Taxonomy::contains_pair(const std::string& category, const std::string& subcategory) const {
    auto sub = subcategory_index(subcategory);
    if (!sub) return false;
    auto cat = category_index(category);
    return cat && parent_[static_cast<std::size_t>(*sub)] == *cat;
}

Dataset load_dataset(const std::string& path, const LoadSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto records = parse_delimited(buf.str(), schema.delimiter);
    if (records.empty()) throw DataError("dataset file has no header row: " + path);

    const auto& header = records[0].fields;
    std::size_t col_title = find_column(header, schema.title_primary, path);
    std::size_t col_cat = find_column(header, schema.category, path);
    std::size_t col_sub = find_column(header, schema.subcategory, path);
    std::optional<std::size_t> col_title2;
    if (!schema.title_secondary.empty()) {
        col_title2 = find_column(header, schema.title_secondary, path);
    }

    std::string source = schema.source_name.empty() ? path : schema.source_name;
    Dataset dataset;
    dataset.products.reserve(records.size() - 1);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        std::size_t needed = std::max({col_title, col_cat, col_sub, col_title2.value_or(0)});
        if (rec.fields.size() <= needed) {
            throw DataError(path + ": line " + std::to_string(rec.line) + ": expected " +
                            std::to_string(needed + 1) + " columns, found " +
                            std::to_string(rec.fields.size()));
        }
        Product p;
        p.id = std::to_string(r);
        p.title_primary = trim(rec.fields[col_title]);
        if (col_title2) p.title_secondary = trim(rec.fields[*col_title2]);
        p.category = features::canonicalize_label(rec.fields[col_cat], schema.locale);
        p.subcategory = features::canonicalize_label(rec.fields[col_sub], schema.locale);
        p.source = source;
        if (p.title_primary.empty()) {
            throw DataError(path + ": line " + std::to_string(rec.line) + ": empty product title");
        }
        if (p.category.empty() || p.subcategory.empty()) {
            throw DataError(path + ": line " + std::to_string(rec.line) + ": empty category or subcategory label");
        }
        if (schema.namespace_subcategories) {
            p.subcategory = p.category + "/" + p.subcategory;
        }
        pairs.emplace_back(p.category, p.subcategory);
        dataset.products.push_back(std::move(p));
    }
    if (!dataset.products.empty()) {
        dataset.taxonomy = Taxonomy::from_pairs(pairs);
    }
    return dataset;
}

Taxonomy build_taxonomy(const Dataset& dataset) {
    if (dataset.products.empty()) {
        throw DataError("cannot build a taxonomy from an empty dataset");
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(dataset.products.size());
    for (const auto& p : dataset.products) pairs.emplace_back(p.category, p.subcategory);
    return Taxonomy::from_pairs(pairs);
}

FilterResult filter_to_taxonomy(const Dataset& dataset, const Taxonomy& reference) {
    FilterResult result;
    result.products_before = dataset.products.size();
    result.categories_before = dataset.taxonomy.category_count();
    result.subcategories_before = dataset.taxonomy.subcategory_count();

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : dataset.products) {
        if (reference.contains_pair(p.category, p.subcategory)) {
            result.dataset.products.push_back(p);
            pairs.emplace_back(p.category, p.subcategory);
        }
    }
    if (!pairs.empty()) {
        result.dataset.taxonomy = Taxonomy::from_pairs(pairs);
    }
    result.products_after = result.dataset.products.size();
    result.categories_after = result.dataset.taxonomy.category_count();
    result.subcategories_after = result.dataset.taxonomy.subcategory_count();
    return result;
}

std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
    if (dataset.products.empty()) throw DataError("stratified_kfold: dataset is empty");
    if (static_cast<std::size_t>(k) > dataset.products.size()) {
        throw ConfigError("stratified_kfold: k exceeds dataset size");
    }

    auto groups = group_by_subcategory(dataset);
    std::vector<std::vector<std::size_t>> fold_members(static_cast<std::size_t>(k));
    std::size_t class_ordinal = 0;
    for (auto& [label, members] : groups) {
        canonical_class_order(dataset, members);
        std::mt19937_64 rng(mix_seed(seed, class_ordinal));
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t offset = class_ordinal % static_cast<std::size_t>(k);
        for (std::size_t pos = 0; pos < members.size(); ++pos) {
            fold_members[(pos + offset) % static_cast<std::size_t>(k)].push_back(members[pos]);
        }
        ++class_ordinal;
    }

    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    for (std::size_t f = 0; f < folds.size(); ++f) {
        folds[f].test = fold_members[f];
        std::sort(folds[f].test.begin(), folds[f].test.end());
        std::vector<bool> in_test(dataset.products.size(), false);
        for (std::size_t i : folds[f].test) in_test[i] = true;
        for (std::size_t i = 0; i < dataset.products.size(); ++i) {
            if (!in_test[i]) folds[f].train.push_back(i);
        }
    }
    return folds;
}

std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double train_fraction,
                                            std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_val_split: fraction must be in (0,1)");
    }
    if (dataset.products.empty()) throw DataError("train_val_split: dataset is empty");
    std::size_t n = dataset.products.size();
    auto target_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * train_fraction));
    if (target_train == 0 || target_train >= n) {
        throw ConfigError("train_val_split: fraction " + std::to_string(train_fraction) +
                          " yields an empty part for " + std::to_string(n) + " products");
    }

    auto groups = group_by_subcategory(dataset);
    std::vector<std::size_t> train_idx, val_idx;
    std::size_t class_ordinal = 0;
    for (auto& [label, members] : groups) {
        canonical_class_order(dataset, members);
        std::mt19937_64 rng(mix_seed(seed, 0x100000 + class_ordinal));
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t n_c = members.size();
        std::size_t t_c;
        if (n_c == 1) {
            t_c = 1;  // singleton classes must be learnable
        } else {
            auto rounded = static_cast<std::size_t>(
                std::llround(static_cast<double>(n_c) * train_fraction));
            t_c = std::clamp<std::size_t>(rounded, 1, n_c - 1);
        }
        for (std::size_t pos = 0; pos < n_c; ++pos) {
            (pos < t_c ? train_idx : val_idx).push_back(members[pos]);
        }
        ++class_ordinal;
    }
    if (train_idx.empty() || val_idx.empty()) {
        throw ConfigError("train_val_split: split yields an empty part");
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    Dataset train{{}, dataset.taxonomy};
    Dataset val{{}, dataset.taxonomy};
    train.products.reserve(train_idx.size());
    val.products.reserve(val_idx.size());
    for (std::size_t i : train_idx) train.products.push_back(dataset.products[i]);
    for (std::size_t i : val_idx) val.products.push_back(dataset.products[i]);
    return {std::move(train), std::move(val)};
}

CorpusStats corpus_stats(const Dataset& dataset, int n, std::size_t min_count,
                         features::Locale locale) {
    if (n < 1) throw ConfigError("corpus_stats: n-gram order must be >= 1");
    CorpusStats stats;
    stats.title_count = dataset.products.size();

    std::vector<std::size_t> lengths;
    lengths.reserve(dataset.products.size());
    std::map<std::string, std::size_t> counts;
    for (const auto& p : dataset.products) {
        auto seq = features::tokenize(p.title_primary, locale);
        lengths.push_back(seq.size());
        if (seq.size() >= static_cast<std::size_t>(n)) {
            for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
                std::string key = seq.tokens[i];
                for (std::size_t j = 1; j < static_cast<std::size_t>(n); ++j) {
                    key += ' ';
                    key += seq.tokens[i + j];
                }
                ++counts[key];
            }
        }
    }

    if (!lengths.empty()) {
        std::size_t total = 0;
        for (auto len : lengths) total += len;
        stats.mean_title_length = static_cast<double>(total) / static_cast<double>(lengths.size());
        std::sort(lengths.begin(), lengths.end());
        stats.length_quantiles = {quantile(lengths, 0.0), quantile(lengths, 0.25),
                                  quantile(lengths, 0.5), quantile(lengths, 0.75),
                                  quantile(lengths, 1.0)};
    }
    for (auto& [key, count] : counts) {
        if (count >= min_count) stats.ngram_counts.emplace(key, count);
    }
    return stats;
}

void export_taxonomy(const Taxonomy& taxonomy, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write taxonomy file: " + path);
    out << "subcategory,category\n";
    for (std::size_t s = 0; s < taxonomy.subcategory_count(); ++s) {
        out << csv_field(taxonomy.subcategories()[s], ',') << ','
            << csv_field(taxonomy.categories()[static_cast<std::size_t>(taxonomy.parent_of(static_cast<int>(s)))], ',')
            << '\n';
    }
}

}  // namespace titlecat::corpus
