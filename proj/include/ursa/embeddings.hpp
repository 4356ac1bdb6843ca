#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ursa/param.hpp"
#include "ursa/textproc.hpp"

namespace ursa {

class EmbeddingParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double default_oov_scale = 0.25;

struct EmbeddingMatrix {
  Param weights;  // [V x d], row 0 = PAD, always zero
  bool trainable = true;
  double coverage = 0.0;

  std::size_t vocab_size() const { return weights.value.rows(); }
  std::size_t dim() const { return weights.value.dim(1); }
};

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace detail

/// Random rows on [-scale, scale), PAD row zero, coverage 0.
inline EmbeddingMatrix random_embeddings(std::size_t vocab_size, std::size_t dim, Rng& rng,
                                         double scale = default_oov_scale) {
  if (vocab_size < 2 || dim < 1) throw DimensionError("embedding table needs at least the reserved rows and dim >= 1");
  EmbeddingMatrix emb;
  Tensor w = rand_uniform(rng, {vocab_size, dim}, -scale, scale);
  for (std::size_t c = 0; c < dim; ++c) w(0, c) = 0.0;
  emb.weights = Param("embedding", std::move(w), /*weight_decay=*/true, /*sparse=*/true);
  return emb;
}

/// Reads a word2vec-style text file: optional "<count> <dim>" header, then
/// `token v1 ... vd` per line. Rows for vocabulary tokens found in the file
/// are copied verbatim (first occurrence wins); the rest stay randomly
/// initialized.
///
/// `expected_dim` of 0 accepts whatever dimension the file declares. A header
/// that disagrees with `expected_dim` is a DimensionError; a data line with
/// the wrong number of values is an EmbeddingParseError naming the line.
inline EmbeddingMatrix load_embeddings(std::istream& in, const Vocabulary& vocab, Rng& rng,
                                       std::size_t expected_dim = 0, double oov_scale = default_oov_scale) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = expected_dim;
  bool first = true;
  std::vector<std::uint8_t> found(vocab.size(), 0);
  std::vector<std::pair<TokenId, std::vector<double>>> rows;
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_spaces(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      std::size_t count = 0, hdim = 0;
      if (fields.size() == 2 && detail::parse_number(fields[0], count) && detail::parse_number(fields[1], hdim)) {
        if (expected_dim != 0 && hdim != expected_dim)
          throw DimensionError("embedding file dimension " + std::to_string(hdim) + " does not match configured " +
                               std::to_string(expected_dim));
        dim = hdim;
        continue;
      }
      if (dim == 0) dim = fields.size() - 1;
    }
    if (fields.size() - 1 != dim || dim == 0)
      throw EmbeddingParseError("embedding line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                " values, found " + std::to_string(fields.size() - 1));
    values.resize(dim);
    for (std::size_t c = 0; c < dim; ++c)
      if (!detail::parse_number(fields[c + 1], values[c]))
        throw EmbeddingParseError("embedding line " + std::to_string(lineno) + ": bad number '" +
                                  std::string(fields[c + 1]) + "'");
    const TokenId id = vocab.id(fields[0]);
    if (id < 2 || found[id]) continue;
    found[id] = 1;
    rows.emplace_back(id, values);
  }
  if (dim == 0) throw EmbeddingParseError("embedding file has no vectors");

  EmbeddingMatrix emb = random_embeddings(vocab.size(), dim, rng, oov_scale);
  for (const auto& [id, v] : rows) std::copy(v.begin(), v.end(), emb.weights.value.row_ptr(id));
  emb.coverage = vocab.size() > 2 ? static_cast<double>(rows.size()) / static_cast<double>(vocab.size() - 2) : 0.0;
  return emb;
}

inline EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab, Rng& rng,
                                       std::size_t expected_dim = 0, double oov_scale = default_oov_scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  return load_embeddings(in, vocab, rng, expected_dim, oov_scale);
}

/// Row gather of the first `rows` ids (defaults to the whole document).
inline Tensor lookup(const EmbeddingMatrix& emb, const std::vector<TokenId>& ids, std::size_t rows) {
  const std::size_t d = emb.dim();
  Tensor out({rows, d});
  for (std::size_t t = 0; t < rows; ++t) {
    const TokenId id = t < ids.size() ? ids[t] : Vocabulary::pad;
    if (id >= emb.vocab_size())
      throw std::out_of_range("token id " + std::to_string(id) + " outside embedding table of " +
                              std::to_string(emb.vocab_size()) + " rows");
    const double* src = emb.weights.value.row_ptr(id);
    std::copy(src, src + d, out.row_ptr(t));
  }
  return out;
}

inline Tensor lookup(const EmbeddingMatrix& emb, const TokenizedDoc& doc) { return lookup(emb, doc.ids, doc.ids.size()); }

/// Scatter-add of `dout` rows into the table gradient. PAD positions and
/// frozen tables receive nothing.
inline void lookup_backward(EmbeddingMatrix& emb, const std::vector<TokenId>& ids, const Tensor& dout) {
  if (!emb.trainable) return;
  const std::size_t d = emb.dim();
  for (std::size_t t = 0; t < dout.rows(); ++t) {
    const TokenId id = t < ids.size() ? ids[t] : Vocabulary::pad;
    if (id == Vocabulary::pad) continue;
    double* g = emb.weights.grad.row_ptr(id);
    const double* src = dout.row_ptr(t);
    for (std::size_t c = 0; c < d; ++c) g[c] += src[c];
    emb.weights.touch(id);
  }
}

}  // namespace ursa
