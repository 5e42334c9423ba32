#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace reasonforge {

namespace detail {

// Decodes one UTF-8 code point starting at i; advances i. Bytes that do not
// form a valid sequence are taken verbatim as single-byte code points so the
// tokenizer never throws on dirty input.
inline std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = 0;
  std::uint32_t cp = 0;
  if ((c & 0xe0) == 0xc0) {
    extra = 1;
    cp = c & 0x1f;
  } else if ((c & 0xf0) == 0xe0) {
    extra = 2;
    cp = c & 0x0f;
  } else if ((c & 0xf8) == 0xf0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    ++i;
    return c;
  }
  if (i + static_cast<std::size_t>(extra) >= s.size()) {
    // truncated sequence
    ++i;
    return c;
  }
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xc0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  i += 1 + extra;
  return cp;
}

inline bool is_unicode_space(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

inline bool is_ascii_punct(std::uint32_t cp) {
  return (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) ||
         (cp >= 0x5b && cp <= 0x60) || (cp >= 0x7b && cp <= 0x7e);
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

}  // namespace detail

/// Deterministic whitespace tokenizer used for dataset statistics, BM25, and
/// the contamination audit: ASCII-lowercase, split on Unicode whitespace,
/// strip leading/trailing ASCII punctuation from each token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<std::uint32_t> current;
  auto flush = [&]() {
    if (current.empty()) return;
    std::size_t lo = 0;
    std::size_t hi = current.size();
    while (lo < hi && detail::is_ascii_punct(current[lo])) ++lo;
    while (hi > lo && detail::is_ascii_punct(current[hi - 1])) --hi;
    if (hi > lo) {
      std::string tok;
      for (std::size_t k = lo; k < hi; ++k) detail::append_utf8(tok, current[k]);
      tokens.push_back(std::move(tok));
    }
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    std::uint32_t cp = detail::decode_utf8(text, i);
    if (detail::is_unicode_space(cp)) {
      flush();
      continue;
    }
    if (cp >= 'A' && cp <= 'Z') cp += 32;
    current.push_back(cp);
  }
  flush();
  return tokens;
}

inline std::size_t token_count(std::string_view text) { return tokenize(text).size(); }

/// Term-frequency bag. std::map keeps iteration order deterministic.
using TokenBag = std::map<std::string, double>;

inline TokenBag token_bag(std::string_view text) {
  TokenBag bag;
  for (auto& t : tokenize(text)) bag[t] += 1.0;
  return bag;
}

}  // namespace reasonforge
