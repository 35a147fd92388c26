#include "declmi/utf8.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>

namespace declmi::utf8 {

namespace {

[[noreturn]] void bad(const char* what) {
  throw std::runtime_error(std::string("invalid UTF-8: ") + what);
}

// (base, combining mark) -> precomposed scalar. Covers the Latin letters
// with acute (U+0301), grave (U+0300), circumflex (U+0302), diaeresis
// (U+0308), ring above (U+030A) and caron (U+030C) that occur in Czech,
// German and neighbouring orthographies.
const std::map<std::pair<char32_t, char32_t>, char32_t>& composition_table() {
  static const std::map<std::pair<char32_t, char32_t>, char32_t> table = {
      // acute
      {{U'a', 0x301}, U'á'}, {{U'e', 0x301}, U'é'},
      {{U'i', 0x301}, U'í'}, {{U'o', 0x301}, U'ó'},
      {{U'u', 0x301}, U'ú'}, {{U'y', 0x301}, U'ý'},
      {{U'c', 0x301}, U'ć'}, {{U's', 0x301}, U'ś'},
      {{U'z', 0x301}, U'ź'}, {{U'n', 0x301}, U'ń'},
      {{U'A', 0x301}, U'Á'}, {{U'E', 0x301}, U'É'},
      {{U'I', 0x301}, U'Í'}, {{U'O', 0x301}, U'Ó'},
      {{U'U', 0x301}, U'Ú'}, {{U'Y', 0x301}, U'Ý'},
      // grave
      {{U'a', 0x300}, U'à'}, {{U'e', 0x300}, U'è'},
      {{U'i', 0x300}, U'ì'}, {{U'o', 0x300}, U'ò'},
      {{U'u', 0x300}, U'ù'},
      // circumflex
      {{U'a', 0x302}, U'â'}, {{U'e', 0x302}, U'ê'},
      {{U'i', 0x302}, U'î'}, {{U'o', 0x302}, U'ô'},
      {{U'u', 0x302}, U'û'},
      // diaeresis
      {{U'a', 0x308}, U'ä'}, {{U'e', 0x308}, U'ë'},
      {{U'i', 0x308}, U'ï'}, {{U'o', 0x308}, U'ö'},
      {{U'u', 0x308}, U'ü'}, {{U'y', 0x308}, U'ÿ'},
      {{U'A', 0x308}, U'Ä'}, {{U'O', 0x308}, U'Ö'},
      {{U'U', 0x308}, U'Ü'},
      // ring above
      {{U'u', 0x30a}, U'ů'}, {{U'a', 0x30a}, U'å'},
      {{U'U', 0x30a}, U'Ů'},
      // caron
      {{U'c', 0x30c}, U'č'}, {{U'd', 0x30c}, U'ď'},
      {{U'e', 0x30c}, U'ě'}, {{U'n', 0x30c}, U'ň'},
      {{U'r', 0x30c}, U'ř'}, {{U's', 0x30c}, U'š'},
      {{U't', 0x30c}, U'ť'}, {{U'z', 0x30c}, U'ž'},
      {{U'C', 0x30c}, U'Č'}, {{U'D', 0x30c}, U'Ď'},
      {{U'E', 0x30c}, U'Ě'}, {{U'N', 0x30c}, U'Ň'},
      {{U'R', 0x30c}, U'Ř'}, {{U'S', 0x30c}, U'Š'},
      {{U'T', 0x30c}, U'Ť'}, {{U'Z', 0x30c}, U'Ž'},
  };
  return table;
}

}  // namespace

std::vector<char32_t> decode(const std::string& s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<std::uint8_t>(s[i]);
    char32_t cp = 0;
    std::size_t extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xe0) == 0xc0) {
      cp = b0 & 0x1f;
      extra = 1;
    } else if ((b0 & 0xf0) == 0xe0) {
      cp = b0 & 0x0f;
      extra = 2;
    } else if ((b0 & 0xf8) == 0xf0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      bad("stray continuation or invalid lead byte");
    }
    if (extra > 0 && i + extra >= s.size()) bad("truncated sequence");
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto bk = static_cast<std::uint8_t>(s[i + k]);
      if ((bk & 0xc0) != 0x80) bad("missing continuation byte");
      cp = (cp << 6) | (bk & 0x3f);
    }
    static const char32_t min_for_len[4] = {0x0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[extra]) bad("overlong encoding");
    if (cp >= 0xd800 && cp <= 0xdfff) bad("surrogate code point");
    if (cp > 0x10ffff) bad("code point out of range");
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_one(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xc0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xe0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  }
  return out;
}

std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) out += encode_one(cp);
  return out;
}

std::vector<char32_t> compose(const std::vector<char32_t>& cps) {
  const auto& table = composition_table();
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (!out.empty()) {
      auto it = table.find({out.back(), cp});
      if (it != table.end()) {
        out.back() = it->second;
        continue;
      }
    }
    out.push_back(cp);
  }
  return out;
}

std::vector<char32_t> decode_nfc(const std::string& s) { return compose(decode(s)); }

}  // namespace declmi::utf8
