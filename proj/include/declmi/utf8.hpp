#pragma once

#include <string>
#include <vector>

namespace declmi::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws std::runtime_error on
// malformed input (overlong sequences, stray continuation bytes, surrogates).
std::vector<char32_t> decode(const std::string& s);

// Encodes scalar values back to UTF-8.
std::string encode(const std::vector<char32_t>& cps);
std::string encode_one(char32_t cp);

// Canonically composes base + combining-mark pairs into precomposed forms
// for the Latin diacritics used by the orthographies this tool targets
// (acute, grave, circumflex, diaeresis, ring, caron). Sequences outside the
// table are left as-is. Input that is already precomposed passes through
// unchanged, so NFC text is a fixed point.
std::vector<char32_t> compose(const std::vector<char32_t>& cps);

// decode + compose.
std::vector<char32_t> decode_nfc(const std::string& s);

}  // namespace declmi::utf8
