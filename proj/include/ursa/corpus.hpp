#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ursa/rng.hpp"

namespace ursa {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawDocument {
  std::string text;
  int label = 0;  // 0 = negative / unsatisfied, 1 = positive / satisfied

  friend bool operator==(const RawDocument&, const RawDocument&) = default;
};

using LabelMap = std::map<std::string, int>;

inline LabelMap default_label_map() {
  return {{"positive", 1}, {"negative", 0}, {"1", 1}, {"0", 0}, {"satisfied", 1}, {"unsatisfied", 0}};
}

struct Dataset {
  std::string name;
  std::vector<RawDocument> documents;
  LabelMap label_map = default_label_map();

  std::size_t size() const { return documents.size(); }
  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(documents.size());
    for (const auto& d : documents) out.push_back(d.label);
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV (comma separated, double-quote quoting with "" escapes, quoted fields
// may span lines)

struct CsvRecord {
  std::size_t line = 0;  // line on which the record starts
  std::vector<std::string> fields;
};

inline std::vector<CsvRecord> parse_csv(std::istream& in) {
  std::vector<CsvRecord> out;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() >= 3 && data.compare(0, 3, "\xEF\xBB\xBF") == 0) data.erase(0, 3);
  std::size_t i = 0, line = 1;
  while (i < data.size()) {
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool done = false;
    while (!done) {
      field.clear();
      if (i < data.size() && data[i] == '"') {
        ++i;
        bool closed = false;
        while (i < data.size()) {
          if (data[i] == '"') {
            if (i + 1 < data.size() && data[i + 1] == '"') {
              field.push_back('"');
              i += 2;
            } else {
              ++i;
              closed = true;
              break;
            }
          } else {
            if (data[i] == '\n') ++line;
            field.push_back(data[i++]);
          }
        }
        if (!closed) throw CorpusError("CSV line " + std::to_string(rec.line) + ": unterminated quoted field");
        if (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r')
          throw CorpusError("CSV line " + std::to_string(line) + ": unexpected character after closing quote");
      } else {
        while (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r') {
          if (data[i] == '"') throw CorpusError("CSV line " + std::to_string(line) + ": stray quote in unquoted field");
          field.push_back(data[i++]);
        }
      }
      rec.fields.push_back(field);
      if (i >= data.size()) {
        done = true;
      } else if (data[i] == ',') {
        ++i;
      } else {
        if (data[i] == '\r') ++i;
        if (i < data.size() && data[i] == '\n') ++i;
        ++line;
        done = true;
      }
    }
    // Skip blank lines.
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty()) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_escape(fields[i]);
  os << '\n';
}

inline Dataset load_csv(std::istream& in, const std::string& text_column, const std::string& label_column,
                        const LabelMap& label_map, std::string name = "dataset") {
  auto records = parse_csv(in);
  if (records.empty()) throw CorpusError("CSV file is empty");
  const auto& header = records.front().fields;
  auto column = [&](const std::string& col) {
    auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw CorpusError("CSV header has no column '" + col + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t tcol = column(text_column), lcol = column(label_column);
  Dataset ds;
  ds.name = std::move(name);
  ds.label_map = label_map;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& rec = records[r];
    if (rec.fields.size() != header.size())
      throw CorpusError("CSV line " + std::to_string(rec.line) + ": expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(rec.fields.size()));
    auto it = label_map.find(rec.fields[lcol]);
    if (it == label_map.end())
      throw CorpusError("CSV line " + std::to_string(rec.line) + ": label '" + rec.fields[lcol] + "' is not mapped");
    if (it->second != 0 && it->second != 1)
      throw CorpusError("label map must send labels to 0 or 1");
    ds.documents.push_back({rec.fields[tcol], it->second});
  }
  if (ds.documents.empty()) throw CorpusError("CSV file has a header but no rows");
  return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& text_column, const std::string& label_column,
                        const LabelMap& label_map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open CSV file: " + path);
  std::string name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name.erase(dot);
  return load_csv(in, text_column, label_column, label_map, name);
}

/// Writes `text,label` with labels rendered through the inverse of the
/// dataset's label map (first key per class in map order).
inline void write_csv(std::ostream& os, const Dataset& ds, const std::string& text_column = "text",
                      const std::string& label_column = "label") {
  std::array<std::string, 2> names{"0", "1"};
  std::array<bool, 2> set{false, false};
  for (const auto& [k, v] : ds.label_map)
    if ((v == 0 || v == 1) && !set[v]) {
      names[v] = k;
      set[v] = true;
    }
  write_csv_row(os, {text_column, label_column});
  for (const auto& d : ds.documents) write_csv_row(os, {d.text, names[d.label]});
}

// ---------------------------------------------------------------------------
// Statistics and sampling

struct ClassReport {
  std::size_t negatives = 0, positives = 0;
  double imbalance_ratio = 1.0;  // max / min; infinite when a class is absent
};

inline ClassReport class_report(const Dataset& ds) {
  ClassReport r;
  for (const auto& d : ds.documents) (d.label == 1 ? r.positives : r.negatives)++;
  const auto lo = std::min(r.positives, r.negatives), hi = std::max(r.positives, r.negatives);
  r.imbalance_ratio = lo == 0 ? INFINITY : static_cast<double>(hi) / static_cast<double>(lo);
  return r;
}

namespace detail {

inline std::array<std::vector<std::size_t>, 2> indices_by_class(const std::vector<int>& labels) {
  std::array<std::vector<std::size_t>, 2> by;
  for (std::size_t i = 0; i < labels.size(); ++i) by[labels[i] == 1].push_back(i);
  return by;
}

// Largest-remainder allocation of n across the two classes.
inline std::array<std::size_t, 2> proportional_counts(std::size_t n, std::size_t neg, std::size_t pos) {
  const std::size_t total = neg + pos;
  std::array<std::size_t, 2> cnt{n * neg / total, n * pos / total};
  std::size_t left = n - cnt[0] - cnt[1];
  const std::size_t rem0 = n * neg % total, rem1 = n * pos % total;
  while (left--) {
    const std::size_t c = rem1 > rem0 ? 1 : 0;
    if (cnt[c] < (c ? pos : neg)) ++cnt[c];
    else ++cnt[1 - c];
  }
  return cnt;
}

}  // namespace detail

/// Stratified random subset of n documents, returned in shuffled order.
inline Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size())
    throw std::invalid_argument("subsample of " + std::to_string(n) + " from " + std::to_string(ds.size()) +
                                " documents");
  auto by = detail::indices_by_class(ds.labels());
  Rng rng(seed);
  std::vector<std::size_t> picked;
  if (n > 0) {
    const auto cnt = detail::proportional_counts(n, by[0].size(), by[1].size());
    for (int c = 0; c < 2; ++c) {
      rng.shuffle(by[c]);
      picked.insert(picked.end(), by[c].begin(), by[c].begin() + static_cast<std::ptrdiff_t>(cnt[c]));
    }
  }
  rng.shuffle(picked);
  Dataset out;
  out.name = ds.name + "-" + std::to_string(n);
  out.label_map = ds.label_map;
  for (std::size_t i : picked) out.documents.push_back(ds.documents[i]);
  return out;
}

struct IndexSplit {
  std::vector<std::size_t> train, test;
};

/// Stratified train/test split of indices; each class contributes
/// round(fraction * class size) test items.
inline IndexSplit stratified_split(const std::vector<int>& labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test fraction must be in [0, 1)");
  auto by = detail::indices_by_class(labels);
  Rng rng(seed);
  IndexSplit s;
  for (int c = 0; c < 2; ++c) {
    rng.shuffle(by[c]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(by[c].size())));
    s.test.insert(s.test.end(), by[c].begin(), by[c].begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), by[c].begin() + static_cast<std::ptrdiff_t>(n_test), by[c].end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

struct SynthSpec {
  std::size_t filler_vocab = 200;
  std::size_t keywords_per_class = 5;
  std::size_t min_len = 8;
  std::size_t max_len = 24;
  std::size_t max_keywords_per_doc = 2;
};

namespace detail {

// Arabic-script pseudo-words: a fixed prefix letter (distinct per role) and
// a base-20 spelling of the index. None are real Urdu words.
inline std::string synth_token(char32_t prefix, std::size_t index) {
  static constexpr char32_t letters[] = {0x628, 0x67E, 0x62A, 0x62C, 0x686, 0x62D, 0x62E, 0x62F, 0x631, 0x632,
                                         0x633, 0x634, 0x635, 0x637, 0x639, 0x63A, 0x641, 0x642, 0x644, 0x645};
  std::u32string s{prefix};
  do {
    s.push_back(letters[index % 20]);
    index /= 20;
  } while (index);
  s.push_back(letters[(s.size() * 7) % 20]);
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

}  // namespace detail

inline std::string synth_filler(std::size_t i) { return detail::synth_token(0x698, i); }          // ژ
inline std::string synth_positive_keyword(std::size_t i) { return detail::synth_token(0x6BA, i); }  // ں
inline std::string synth_negative_keyword(std::size_t i) { return detail::synth_token(0x6C1, i); }  // ہ

/// n/2 positive then n/2 negative documents (interleaved) of random filler
/// with 1..max_keywords_per_doc class keywords at random positions. The two
/// keyword sets are disjoint, so keyword lookup separates the classes.
inline Dataset synth_corpus(std::size_t n, const SynthSpec& spec, std::uint64_t seed) {
  if (n % 2 != 0) throw std::invalid_argument("synthetic corpus size must be even");
  if (spec.min_len < 1 || spec.min_len > spec.max_len || spec.keywords_per_class < 1 || spec.filler_vocab < 1 ||
      spec.max_keywords_per_doc < 1)
    throw std::invalid_argument("invalid synthetic corpus spec");
  Rng rng(seed);
  Dataset ds;
  ds.name = "synthetic";
  for (std::size_t d = 0; d < n; ++d) {
    const int label = d % 2 == 0 ? 1 : 0;
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    std::vector<std::string> words(len);
    for (auto& w : words) w = synth_filler(rng.below(spec.filler_vocab));
    const std::size_t nkw = 1 + rng.below(std::min(spec.max_keywords_per_doc, len));
    for (std::size_t k = 0; k < nkw; ++k) {
      const std::size_t pos = rng.below(len);
      const std::size_t which = rng.below(spec.keywords_per_class);
      words[pos] = label ? synth_positive_keyword(which) : synth_negative_keyword(which);
    }
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) text += (i ? " " : "") + words[i];
    ds.documents.push_back({std::move(text), label});
  }
  return ds;
}

}  // namespace ursa
