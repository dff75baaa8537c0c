#include "titlecat/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "titlecat/common.hpp"

namespace titlecat::synthetic {

namespace {

std::string two_digits(int v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

std::vector<std::string> make_pool(const std::string& prefix, int count) {
    std::vector<std::string> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pool.push_back(prefix + two_digits(i));
    return pool;
}

std::string join_shuffled(std::vector<std::string> tokens, std::mt19937_64& rng) {
    std::shuffle(tokens.begin(), tokens.end(), rng);
    std::string title;
    for (const auto& t : tokens) {
        if (!title.empty()) title += ' ';
        title += t;
    }
    return title;
}

const std::string& pick(const std::vector<std::string>& pool, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
    return pool[dist(rng)];
}

}  // namespace

corpus::Dataset generate(const SyntheticSpec& spec) {
    if (spec.categories < 1 || spec.subcategories_per_category < 1 ||
        spec.titles_per_subcategory < 1 || spec.min_keywords < 1 ||
        spec.max_keywords < spec.min_keywords || spec.noise_vocabulary < 1 ||
        spec.min_title_tokens < 1 || spec.max_title_tokens < spec.min_title_tokens) {
        throw ConfigError("synthetic spec values are inconsistent");
    }
    std::mt19937_64 rng(mix_seed(spec.seed, 0x5e17));

    const int S = spec.categories * spec.subcategories_per_category;
    std::vector<std::string> cat_labels, sub_labels;
    std::vector<int> parent;
    for (int c = 0; c < spec.categories; ++c) cat_labels.push_back("cat" + two_digits(c));
    for (int s = 0; s < S; ++s) {
        sub_labels.push_back("sub" + two_digits(s));
        parent.push_back(s / spec.subcategories_per_category);
    }

    // Keyword pools. Monolingual: one pool per subcategory. Bilingual: the
    // primary pool is per category, the secondary pool per within-category
    // position; each language alone under-determines the subcategory.
    std::uniform_int_distribution<int> pool_size(spec.min_keywords, spec.max_keywords);
    std::vector<std::vector<std::string>> primary_kw(static_cast<std::size_t>(S));
    std::vector<std::vector<std::string>> secondary_kw(static_cast<std::size_t>(S));
    if (!spec.bilingual) {
        for (int s = 0; s < S; ++s) {
            int k = pool_size(rng);
            for (int j = 0; j < k; ++j) {
                primary_kw[static_cast<std::size_t>(s)].push_back("kw" + two_digits(s) + "x" + std::to_string(j));
            }
        }
    } else {
        int half = std::max(1, pool_size(rng) / 2);
        std::vector<std::vector<std::string>> by_cat(static_cast<std::size_t>(spec.categories));
        std::vector<std::vector<std::string>> by_pos(static_cast<std::size_t>(spec.subcategories_per_category));
        for (int c = 0; c < spec.categories; ++c) {
            for (int j = 0; j < half; ++j) by_cat[static_cast<std::size_t>(c)].push_back("pa" + two_digits(c) + "x" + std::to_string(j));
        }
        for (int p = 0; p < spec.subcategories_per_category; ++p) {
            for (int j = 0; j < half; ++j) by_pos[static_cast<std::size_t>(p)].push_back("qb" + two_digits(p) + "x" + std::to_string(j));
        }
        for (int s = 0; s < S; ++s) {
            primary_kw[static_cast<std::size_t>(s)] = by_cat[static_cast<std::size_t>(s / spec.subcategories_per_category)];
            secondary_kw[static_cast<std::size_t>(s)] = by_pos[static_cast<std::size_t>(s % spec.subcategories_per_category)];
        }
    }
    std::vector<std::string> primary_noise = make_pool("noise", spec.noise_vocabulary);
    std::vector<std::string> secondary_noise = make_pool("gurult", spec.noise_vocabulary);

    std::uniform_int_distribution<int> title_len(spec.min_title_tokens, spec.max_title_tokens);
    std::uniform_int_distribution<int> kw_count(1, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto compose = [&](const std::vector<std::string>& keywords,
                       const std::vector<std::string>& noise, bool noise_only) {
        int len = title_len(rng);
        std::vector<std::string> tokens;
        if (!noise_only) {
            int k = std::min(kw_count(rng), len);
            for (int j = 0; j < k; ++j) tokens.push_back(pick(keywords, rng));
        }
        while (static_cast<int>(tokens.size()) < len) tokens.push_back(pick(noise, rng));
        return join_shuffled(std::move(tokens), rng);
    };

    corpus::Dataset dataset;
    for (int s = 0; s < S; ++s) {
        for (int t = 0; t < spec.titles_per_subcategory; ++t) {
            bool noise_only = unit(rng) < spec.noise_only_fraction;
            corpus::Product p;
            p.title_primary = compose(primary_kw[static_cast<std::size_t>(s)], primary_noise, noise_only);
            if (spec.bilingual) {
                p.title_secondary = compose(secondary_kw[static_cast<std::size_t>(s)], secondary_noise, noise_only);
            }
            p.category = cat_labels[static_cast<std::size_t>(parent[static_cast<std::size_t>(s)])];
            p.subcategory = sub_labels[static_cast<std::size_t>(s)];
            p.source = "synthetic";
            dataset.products.push_back(std::move(p));
        }
    }
    std::shuffle(dataset.products.begin(), dataset.products.end(), rng);
    for (std::size_t i = 0; i < dataset.products.size(); ++i) {
        dataset.products[i].id = std::to_string(i + 1);
    }
    dataset.taxonomy = corpus::build_taxonomy(dataset);
    return dataset;
}

void write_csv(const corpus::Dataset& dataset, const std::string& path, bool bilingual) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write synthetic corpus: " + path);
    out << (bilingual ? "title,title_secondary,category,subcategory\n"
                      : "title,category,subcategory\n");
    for (const auto& p : dataset.products) {
        out << csv_field(p.title_primary, ',') << ',';
        if (bilingual) out << csv_field(p.title_secondary, ',') << ',';
        out << csv_field(p.category, ',') << ',' << csv_field(p.subcategory, ',') << '\n';
    }
}

}  // namespace titlecat::synthetic
