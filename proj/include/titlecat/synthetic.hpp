#pragma once

#include <cstdint>
#include <string>

#include "titlecat/corpus.hpp"

namespace titlecat::synthetic {

// Seeded generator for benchmark corpora. Every subcategory owns a small
// pool of discriminative keywords; titles mix keywords with words from a
// shared noise pool. In bilingual mode the keyword signal is split across
// the two languages: the primary title identifies the category, the
// secondary title the position within it, so only both together pin the
// subcategory.
struct SyntheticSpec {
    int categories = 6;
    int subcategories_per_category = 3;
    int titles_per_subcategory = 200;
    int min_keywords = 2;  // keyword-pool size per subcategory
    int max_keywords = 4;
    int noise_vocabulary = 30;
    int min_title_tokens = 4;
    int max_title_tokens = 8;
    double noise_only_fraction = 0.02;  // titles carrying no keyword at all
    bool bilingual = false;
    std::uint64_t seed = 0;
};

corpus::Dataset generate(const SyntheticSpec& spec);

// Writes the corpus in the loader's format: title[,title_secondary],category,subcategory.
void write_csv(const corpus::Dataset& dataset, const std::string& path, bool bilingual);

}  // namespace titlecat::synthetic
