#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

namespace ursa {

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDocumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// UTF-8

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto fail = [&](const char* why) {
    throw EncodingError(std::string("invalid UTF-8 at byte ") + std::to_string(i) + ": " + why);
  };
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len;
    char32_t cp;
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
      fail("bad lead byte");
    }
    if (i + len > s.size()) fail("truncated sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) fail("bad continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[len]) fail("overlong encoding");
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid code point");
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
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

inline std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size() * 2);
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

/// Canonical composition (NFC).
inline std::u32string nfc(const std::u32string& cps) {
  UErrorCode err = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(err);
  if (U_FAILURE(err)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(cps.data()), static_cast<int32_t>(cps.size()));
  icu::UnicodeString dst = n->normalize(src, err);
  if (U_FAILURE(err)) throw std::runtime_error("NFC normalization failed");
  std::u32string out(static_cast<std::size_t>(dst.countChar32()), U'\0');
  dst.toUTF32(reinterpret_cast<UChar32*>(out.data()), static_cast<int32_t>(out.size()), err);
  if (U_FAILURE(err)) throw std::runtime_error("NFC conversion failed");
  return out;
}

// ---------------------------------------------------------------------------
// Character classes

namespace chars {

inline constexpr char32_t zwnj = 0x200C;
inline constexpr char32_t zwj = 0x200D;

inline bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

inline bool is_whitespace(char32_t c) {
  return in(c, 0x09, 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 || in(c, 0x2000, 0x200B) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

// Latin letters in every block, plus the combining marks that decorate them.
inline bool is_latin(char32_t c) {
  return in(c, 'A', 'Z') || in(c, 'a', 'z') || in(c, 0xC0, 0xD6) || in(c, 0xD8, 0xF6) || in(c, 0xF8, 0x2AF) ||
         in(c, 0x300, 0x36F) || in(c, 0x1D00, 0x1DFF) || in(c, 0x1E00, 0x1EFF) || in(c, 0x2C60, 0x2C7F) ||
         in(c, 0xA720, 0xA7FF) || in(c, 0xAB30, 0xAB6F) || in(c, 0xFB00, 0xFB06) || in(c, 0xFF21, 0xFF3A) ||
         in(c, 0xFF41, 0xFF5A);
}

// ASCII, Arabic-Indic, Extended Arabic-Indic (Urdu) and fullwidth digits.
inline bool is_digit(char32_t c) {
  return in(c, '0', '9') || in(c, 0x660, 0x669) || in(c, 0x6F0, 0x6F9) || in(c, 0xFF10, 0xFF19);
}

inline bool is_punctuation(char32_t c) {
  return in(c, 0x21, 0x2F) || in(c, 0x3A, 0x40) || in(c, 0x5B, 0x60) || in(c, 0x7B, 0x7E) ||
         in(c, 0xA1, 0xBF) || c == 0xD7 || c == 0xF7 || in(c, 0x2010, 0x2027) || in(c, 0x2030, 0x205E) ||
         in(c, 0x609, 0x60D) || c == 0x61B || c == 0x61E || c == 0x61F || in(c, 0x66A, 0x66D) ||
         c == 0x6D4 || c == 0xFD3E || c == 0xFD3F || in(c, 0x3001, 0x3003) || in(c, 0xFF01, 0xFF0F) ||
         in(c, 0xFF1A, 0xFF20) || in(c, 0xFF3B, 0xFF40) || in(c, 0xFF5B, 0xFF65);
}

inline bool is_control(char32_t c) { return in(c, 0x00, 0x1F) || in(c, 0x7F, 0x9F); }

// Invisible format characters other than the joiners.
inline bool is_format(char32_t c) {
  return c == 0xAD || c == 0x61C || c == 0x200E || c == 0x200F || in(c, 0x202A, 0x202E) ||
         in(c, 0x2060, 0x2064) || in(c, 0x2066, 0x206F) || c == 0xFEFF || in(c, 0xFFF9, 0xFFFB);
}

inline bool is_arabic_diacritic(char32_t c) { return in(c, 0x64B, 0x65F); }

inline bool is_joiner(char32_t c) { return c == zwnj || c == zwj; }

}  // namespace chars

struct NormalizeOptions {
  bool strip_diacritics = false;
};

namespace detail {

inline bool ascii_iequal_prefix(const std::u32string& s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char32_t c = s[pos + k];
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
    if (c != static_cast<char32_t>(prefix[k])) return false;
  }
  return true;
}

// Drops every span starting at a URL prefix up to the next whitespace.
inline std::u32string strip_urls(const std::u32string& s) {
  static constexpr std::string_view prefixes[] = {"https://", "http://", "ftp://", "www."};
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    bool url = false;
    for (std::string_view p : prefixes)
      if (ascii_iequal_prefix(s, i, p)) {
        url = true;
        break;
      }
    if (url) {
      while (i < s.size() && !chars::is_whitespace(s[i])) ++i;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

}  // namespace detail

/// Cleans raw text: URLs first, then Latin letters, digits, punctuation,
/// control and invisible format characters. Punctuation and control
/// characters act as word separators; the other classes are deleted in
/// place. The result is NFC, single-space separated and trimmed.
inline std::string normalize(std::string_view text, const NormalizeOptions& opts = {}) {
  std::u32string cps = nfc(decode_utf8(text));
  cps = detail::strip_urls(cps);

  std::u32string kept;
  kept.reserve(cps.size());
  for (char32_t c : cps) {
    if (chars::is_whitespace(c) || chars::is_punctuation(c) || chars::is_control(c)) {
      kept.push_back(U' ');
    } else if (chars::is_latin(c) || chars::is_digit(c) || chars::is_format(c)) {
      continue;
    } else if (opts.strip_diacritics && chars::is_arabic_diacritic(c)) {
      continue;
    } else {
      kept.push_back(c);
    }
  }
  // Deletions can bring a base letter next to a combining mark.
  kept = nfc(kept);

  std::u32string out;
  out.reserve(kept.size());
  std::size_t i = 0;
  while (i < kept.size()) {
    while (i < kept.size() && kept[i] == U' ') ++i;
    std::size_t j = i;
    while (j < kept.size() && kept[j] != U' ') ++j;
    std::size_t b = i, e = j;
    while (b < e && chars::is_joiner(kept[b])) ++b;
    while (e > b && chars::is_joiner(kept[e - 1])) --e;
    if (b < e) {
      if (!out.empty()) out.push_back(U' ');
      out.append(kept, b, e - b);
    }
    i = j;
  }
  return encode_utf8(out);
}

/// Whitespace split. ZWNJ is not whitespace, so it stays inside tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && is_ws(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ws(text[j])) ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

using StopwordSet = std::unordered_set<std::string>;

/// One token per line; blank lines and '#' comment lines skipped. Entries are
/// normalized the same way document text is, so they match cleaned tokens.
inline StopwordSet parse_stopwords(std::istream& in) {
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    for (auto& tok : tokenize(normalize(line))) set.insert(std::move(tok));
  }
  return set;
}

inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  return parse_stopwords(in);
}

inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopwordSet& stop) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (!stop.contains(t)) out.push_back(t);
  return out;
}

/// normalize -> tokenize -> stopword filter.
struct TextPipeline {
  NormalizeOptions options;
  StopwordSet stopwords;

  std::vector<std::string> operator()(std::string_view text) const {
    return remove_stopwords(tokenize(normalize(text, options)), stopwords);
  }
};

// ---------------------------------------------------------------------------
// Vocabulary and encoding

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  static constexpr TokenId pad = 0;
  static constexpr TokenId unk = 1;

  Vocabulary() {
    add("<pad>", 0);
    add("<unk>", 0);
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk : it->second;
  }

  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t frequency(TokenId id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId add(const std::string& token, std::size_t count) {
    if (index_.contains(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
    const auto id = static_cast<TokenId>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(token);
    counts_.push_back(count);
    return id;
  }

  /// Tab-separated `id token frequency`, one row per id including the reserved rows.
  void save(std::ostream& os) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) os << i << '\t' << tokens_[i] << '\t' << counts_[i] << '\n';
  }

  static Vocabulary load(std::istream& in) {
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::size_t id = 0, count = 0;
      std::string tok;
      if (!(ls >> id >> tok >> count)) throw std::runtime_error("vocabulary line " + std::to_string(lineno) + " is malformed");
      if (id < 2) continue;
      if (id != v.size()) throw std::runtime_error("vocabulary line " + std::to_string(lineno) + " has out-of-order id");
      v.add(tok, count);
    }
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
};

/// Tokens with frequency >= min_freq, most frequent first; equal counts are
/// ordered by code point (byte order of UTF-8 matches code point order).
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_freq = 1) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : items)
    if (n >= min_freq) v.add(tok, n);
  return v;
}

struct TokenizedDoc {
  std::vector<TokenId> ids;  // length max_len
  std::size_t true_len = 0;
  int label = 0;

  friend bool operator==(const TokenizedDoc&, const TokenizedDoc&) = default;
};

inline TokenizedDoc encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len,
                           int label = 0) {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  if (tokens.empty()) throw EmptyDocumentError("document has no tokens after preprocessing");
  TokenizedDoc doc;
  doc.label = label;
  doc.true_len = std::min(tokens.size(), max_len);
  doc.ids.assign(max_len, Vocabulary::pad);
  for (std::size_t i = 0; i < doc.true_len; ++i) doc.ids[i] = vocab.id(tokens[i]);
  return doc;
}

inline std::vector<std::string> decode(const TokenizedDoc& doc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(doc.true_len);
  for (std::size_t i = 0; i < doc.true_len; ++i) out.push_back(vocab.token(doc.ids[i]));
  return out;
}

}  // namespace ursa
