#include "titlecat/text.hpp"

#include <cctype>

#include "titlecat/common.hpp"

namespace titlecat::features {

namespace {

// Decodes one UTF-8 codepoint starting at text[i]; advances i. Invalid bytes
// decode to U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + static_cast<std::size_t>(len) > text.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char bk = byte(i + static_cast<std::size_t>(k));
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

char32_t lower_codepoint(char32_t cp, Locale locale) {
    if (cp == U'I') return locale == Locale::turkish ? 0x0131 : U'i';  // dotless ı
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp == 0x0130) return U'i';  // İ
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;  // Latin-1, skip ×
    if (cp == 0x0178) return 0x00FF;  // Ÿ -> ÿ
    // Latin Extended-A case pairs.
    if (cp >= 0x0100 && cp <= 0x0136 && (cp % 2) == 0) return cp + 1;
    if (cp >= 0x0139 && cp <= 0x0147 && (cp % 2) == 1) return cp + 1;
    if (cp >= 0x014A && cp <= 0x0176 && (cp % 2) == 0) return cp + 1;
    if (cp >= 0x0179 && cp <= 0x017D && (cp % 2) == 1) return cp + 1;
    return cp;
}

// Token characters are letters and digits; everything else separates tokens.
// Non-ASCII codepoints count as letters except known punctuation/symbol
// ranges (Latin-1 punctuation, ×, ÷, general punctuation, currency signs).
bool is_token_char(char32_t cp) {
    if (cp < 0x80) {
        return std::isalnum(static_cast<unsigned char>(cp)) != 0;
    }
    if (cp >= 0x00A0 && cp <= 0x00BF) return false;
    if (cp == 0x00D7 || cp == 0x00F7) return false;
    if (cp >= 0x2000 && cp <= 0x206F) return false;
    if (cp >= 0x20A0 && cp <= 0x20CF) return false;
    if (cp == 0xFFFD) return false;
    return true;
}

}  // namespace

std::string lower_utf8(std::string_view text, Locale locale) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        encode_utf8(lower_codepoint(decode_utf8(text, i), locale), out);
    }
    return out;
}

TokenSequence tokenize(std::string_view title, Locale locale) {
    TokenSequence seq;
    std::string current;
    std::size_t i = 0;
    while (i < title.size()) {
        char32_t cp = decode_utf8(title, i);
        if (is_token_char(cp)) {
            encode_utf8(lower_codepoint(cp, locale), current);
        } else if (!current.empty()) {
            seq.tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) seq.tokens.push_back(std::move(current));
    return seq;
}

std::string canonicalize_label(std::string_view label, Locale locale) {
    std::size_t b = 0, e = label.size();
    while (b < e && std::isspace(static_cast<unsigned char>(label[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(label[e - 1]))) --e;
    return lower_utf8(label.substr(b, e - b), locale);
}

Locale parse_locale(std::string_view name) {
    if (name == "turkish") return Locale::turkish;
    if (name == "generic") return Locale::generic;
    throw ConfigError("unknown locale: " + std::string(name) + " (expected turkish|generic)");
}

std::string locale_name(Locale locale) {
    return locale == Locale::turkish ? "turkish" : "generic";
}

}  // namespace titlecat::features
