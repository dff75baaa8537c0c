#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "titlecat/text.hpp"

namespace titlecat::corpus {

// One catalog item. Labels are stored canonicalized (trimmed, locale
// lowercased); title_secondary is empty when the retailer has no second
// language.
struct Product {
    std::string id;
    std::string title_primary;
    std::string title_secondary;
    std::string category;
    std::string subcategory;
    std::string source;
};

// The two-level label space. Label lists are sorted, duplicate-free, and
// every subcategory has exactly one parent category, which is what makes the
// mask matrix of the neural module well defined.
class Taxonomy {
public:
    Taxonomy() = default;

    // Builds from observed (category, subcategory) pairs. Throws DataError if
    // a subcategory appears under two different categories.
    static Taxonomy from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

    // Reassembles a taxonomy from its serialized parts, revalidating the
    // invariants.
    static Taxonomy from_parts(std::vector<std::string> categories,
                               std::vector<std::string> subcategories,
                               std::vector<int> parent);

    const std::vector<std::string>& categories() const { return categories_; }
    const std::vector<std::string>& subcategories() const { return subcategories_; }
    const std::vector<int>& parent_map() const { return parent_; }

    std::size_t category_count() const { return categories_.size(); }
    std::size_t subcategory_count() const { return subcategories_.size(); }
    bool empty() const { return subcategories_.empty(); }

    int parent_of(int subcategory_index) const { return parent_.at(static_cast<std::size_t>(subcategory_index)); }
    std::optional<int> category_index(const std::string& label) const;
    std::optional<int> subcategory_index(const std::string& label) const;

    // True iff the subcategory exists and its parent is exactly `category`.
    bool contains_pair(const std::string& category, const std::string& subcategory) const;

    bool operator==(const Taxonomy& other) const {
        return categories_ == other.categories_ && subcategories_ == other.subcategories_ &&
               parent_ == other.parent_;
    }

private:
    std::vector<std::string> categories_;
    std::vector<std::string> subcategories_;
    std::vector<int> parent_;  // subcategory index -> category index
    std::unordered_map<std::string, int> category_index_;
    std::unordered_map<std::string, int> subcategory_index_;

    void rebuild_index();
};

struct Dataset {
    std::vector<Product> products;
    Taxonomy taxonomy;

    std::size_t size() const { return products.size(); }
};

// Column mapping and parse options for delimiter-separated files.
struct LoadSchema {
    std::string title_primary = "title";
    std::string title_secondary;  // empty: dataset has no secondary title column
    std::string category = "category";
    std::string subcategory = "subcategory";
    char delimiter = ',';
    features::Locale locale = features::Locale::turkish;
    bool namespace_subcategories = false;  // prefix subcategory labels with their category
    std::string source_name;
};

// Reads a header-row delimited file (RFC-4180-style quoting) into a Dataset.
// Ids are the 1-based data-row ordinals. Rows with an empty primary title or
// empty labels fail fast with the offending line number. A header-only file
// yields zero products and an empty taxonomy.
Dataset load_dataset(const std::string& path, const LoadSchema& schema);

// Distinct observed labels, sorted; parent(s) = the category observed with s.
Taxonomy build_taxonomy(const Dataset& dataset);

struct FilterResult {
    Dataset dataset;
    std::size_t products_before = 0;
    std::size_t products_after = 0;
    std::size_t categories_before = 0;
    std::size_t categories_after = 0;
    std::size_t subcategories_before = 0;
    std::size_t subcategories_after = 0;
};

// Keeps only products whose (category, subcategory) pair exists in
// `reference`; the result taxonomy is `reference` restricted to the labels
// that survive. Empty results are legal.
FilterResult filter_to_taxonomy(const Dataset& dataset, const Taxonomy& reference);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Stratified k-fold partition of product indices, stratification key =
// subcategory. Classes with >= k members differ by at most one per fold;
// smaller classes are spread round-robin across distinct folds. Fold
// composition depends only on (products-as-multiset, k, seed), not on row
// order.
std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed);

// Stratified train/validation split with the same small-class handling
// (singleton classes go to the training side). Errors if either part would
// be empty.
std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double train_fraction,
                                            std::uint64_t seed);

struct CorpusStats {
    std::size_t title_count = 0;
    double mean_title_length = 0.0;
    std::array<double, 5> length_quantiles{};  // min, 25%, 50%, 75%, max
    std::map<std::string, std::size_t> ngram_counts;  // space-joined n-gram -> count
};

// Title-length distribution and per-title n-gram counts (no n-grams across
// title boundaries); only n-grams with count >= min_count are kept.
CorpusStats corpus_stats(const Dataset& dataset, int n, std::size_t min_count,
                         features::Locale locale);

// Two-column file (subcategory, category), one row per subcategory, sorted.
void export_taxonomy(const Taxonomy& taxonomy, const std::string& path);

}  // namespace titlecat::corpus
