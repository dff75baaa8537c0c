#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace titlecat::features {

// Lowercasing locale. Turkish has the dotted/dotless i rule: 'İ' -> 'i' and
// 'I' -> 'ı'; generic maps 'I' -> 'i'. Everything else is shared.
enum class Locale { turkish, generic };

struct TokenSequence {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
};

// Locale-aware lowercase of UTF-8 text. Covers ASCII, Latin-1 Supplement and
// Latin Extended-A (which includes the Turkish letters Ç, Ğ, İ, I, Ö, Ş, Ü).
std::string lower_utf8(std::string_view text, Locale locale);

// Lowercases, then splits on whitespace and punctuation (punctuation is
// discarded); digits are kept as token characters. Empty input -> empty
// sequence.
TokenSequence tokenize(std::string_view title, Locale locale);

// Canonical label form: trim + locale lowercase (labels from different
// retailers differ in casing and stray whitespace).
std::string canonicalize_label(std::string_view label, Locale locale);

Locale parse_locale(std::string_view name);
std::string locale_name(Locale locale);

}  // namespace titlecat::features
