#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "test_util.hpp"
#include "ursa/embeddings.hpp"
#include "ursa/layers.hpp"
#include "ursa/train.hpp"

using namespace ursa;

namespace {

Vocabulary four_tokens() {
  Vocabulary v;
  for (const char* t : {"فلم", "اچھی", "بری", "کہانی"}) v.add(t, 1);
  return v;
}

EmbeddingMatrix load_text(const std::string& text, const Vocabulary& v, std::uint64_t seed = 1,
                          std::size_t expected_dim = 0) {
  std::istringstream in(text);
  Rng rng(seed);
  return load_embeddings(in, v, rng, expected_dim);
}

}  // namespace

TEST(LoadEmbeddings, CoverageCountsFoundRows) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("فلم 0.1 0.2 0.3\nاچھی 1 2 3\nبری -1 -2 -3\nنامعلوم 9 9 9\n", v);
  EXPECT_DOUBLE_EQ(e.coverage, 0.75);
  EXPECT_EQ(e.vocab_size(), v.size());
  EXPECT_EQ(e.dim(), 3u);
  EXPECT_TRUE(e.trainable);
}

TEST(LoadEmbeddings, FoundRowsCopiedVerbatim) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("3 3\nفلم 0.1 0.2 0.3\nاچھی 1e-3 -2.5 3\n", v);
  const double* r = e.weights.value.row_ptr(v.id("فلم"));
  EXPECT_EQ(r[0], 0.1);
  EXPECT_EQ(r[1], 0.2);
  EXPECT_EQ(r[2], 0.3);
  const double* q = e.weights.value.row_ptr(v.id("اچھی"));
  EXPECT_EQ(q[0], 1e-3);
  EXPECT_EQ(q[1], -2.5);
  EXPECT_EQ(q[2], 3.0);
}

TEST(LoadEmbeddings, NoOverlapLeavesEverythingRandom) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("x 0.9 0.9\ny 0.9 0.9\n", v);
  EXPECT_EQ(e.coverage, 0.0);
  for (std::size_t r = 2; r < v.size(); ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_GE(e.weights.value(r, c), -0.25);
      EXPECT_LT(e.weights.value(r, c), 0.25);
    }
}

TEST(LoadEmbeddings, PadRowIsZero) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("<pad> 5 5\nفلم 1 1\n", v);
  EXPECT_EQ(e.weights.value(0, 0), 0.0);
  EXPECT_EQ(e.weights.value(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(e.coverage, 0.25);
}

TEST(LoadEmbeddings, WrongArityNamesLine) {
  const Vocabulary v = four_tokens();
  try {
    (void)load_text("فلم 0.1 0.2 0.3\nx 0.1 0.2\n", v);
    FAIL() << "expected EmbeddingParseError";
  } catch (const EmbeddingParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_text("x 0.1 0.2\n", v, 1, 3), EmbeddingParseError);
  EXPECT_THROW(load_text("فلم 0.1 abc\n", v), EmbeddingParseError);
  EXPECT_THROW(load_text("", v), EmbeddingParseError);
}

TEST(LoadEmbeddings, HeaderDimensionMismatch) {
  const Vocabulary v = four_tokens();
  EXPECT_THROW(load_text("2 5\nفلم 1 2 3 4 5\n", v, 1, 3), DimensionError);
  const EmbeddingMatrix e = load_text("2 3\nفلم 1 2 3\n", v, 1, 3);
  EXPECT_EQ(e.dim(), 3u);
}

TEST(LoadEmbeddings, HeaderAutoDetected) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix with = load_text("1 2\nفلم 4 5\n", v);
  EXPECT_EQ(with.dim(), 2u);
  EXPECT_EQ(with.weights.value(v.id("فلم"), 0), 4.0);
  // A two-field first line that is not two integers is a 1-d vector.
  const EmbeddingMatrix one = load_text("فلم 7\n", v);
  EXPECT_EQ(one.dim(), 1u);
  EXPECT_EQ(one.weights.value(v.id("فلم"), 0), 7.0);
}

TEST(LoadEmbeddings, FirstOccurrenceWins) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("فلم 1 1\nفلم 2 2\n", v);
  EXPECT_EQ(e.weights.value(v.id("فلم"), 0), 1.0);
  EXPECT_DOUBLE_EQ(e.coverage, 0.25);
}

TEST(LoadEmbeddings, CrlfAndTabsAccepted) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("فلم\t1 2\r\nبری 3  4\r\n", v);
  EXPECT_EQ(e.weights.value(v.id("بری"), 1), 4.0);
  EXPECT_DOUBLE_EQ(e.coverage, 0.5);
}

TEST(LoadEmbeddings, BitExactDecimalParse) {
  const Vocabulary v = four_tokens();
  const EmbeddingMatrix e = load_text("فلم 0.30000000000000004 -1.7976931348623157e308\n", v);
  EXPECT_EQ(e.weights.value(v.id("فلم"), 0), 0.30000000000000004);
  EXPECT_EQ(e.weights.value(v.id("فلم"), 1), -1.7976931348623157e308);
}

TEST(LoadEmbeddings, DeterministicForSeed) {
  const Vocabulary v = four_tokens();
  const std::string text = "فلم 0.1 0.2\n";
  EXPECT_EQ(load_text(text, v, 7).weights.value, load_text(text, v, 7).weights.value);
  EXPECT_NE(load_text(text, v, 7).weights.value, load_text(text, v, 8).weights.value);
}

TEST(LoadEmbeddings, MissingFileThrows) {
  Rng rng(1);
  EXPECT_THROW(load_embeddings("/nonexistent/vectors.txt", four_tokens(), rng), std::runtime_error);
}

TEST(RandomEmbeddings, RangeAndPad) {
  Rng rng(3);
  const EmbeddingMatrix e = random_embeddings(50, 8, rng);
  EXPECT_EQ(e.coverage, 0.0);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(e.weights.value(0, c), 0.0);
  for (double x : e.weights.value.values()) {
    EXPECT_GE(x, -0.25);
    EXPECT_LT(x, 0.25);
  }
  EXPECT_THROW(random_embeddings(1, 8, rng), DimensionError);
}

TEST(Lookup, AllPadGivesZeroMatrix) {
  Rng rng(1);
  const EmbeddingMatrix e = random_embeddings(6, 4, rng);
  const Tensor out = lookup(e, std::vector<TokenId>(5, Vocabulary::pad), 5);
  EXPECT_EQ(out, Tensor({5, 4}));
}

TEST(Lookup, SingleTokenGathersRow) {
  Rng rng(1);
  const EmbeddingMatrix e = random_embeddings(6, 4, rng);
  TokenizedDoc doc{{3, 0, 0}, 1, 0};
  const Tensor out = lookup(e, doc);
  EXPECT_EQ(out.shape(), (Shape{3, 4}));
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(out(0, c), e.weights.value(3, c));
    EXPECT_EQ(out(1, c), 0.0);
  }
}

TEST(Lookup, OutOfRangeIdThrows) {
  Rng rng(1);
  const EmbeddingMatrix e = random_embeddings(6, 4, rng);
  EXPECT_THROW(lookup(e, std::vector<TokenId>{2, 6}, 2), std::out_of_range);
}

TEST(Lookup, GradientOfSumConcentratesOnLookedUpRows) {
  Rng rng(5);
  EmbeddingMatrix e = random_embeddings(7, 3, rng);
  const std::vector<TokenId> ids{4, 2, 4, 0, 0};
  const Tensor w = test::random_tensor(rng, {5, 3});
  e.weights.zero_grad();
  lookup_backward(e, ids, w);
  // The PAD row is pinned at zero, so finite differences skip it.
  Tensor& table = e.weights.value;
  for (std::size_t i = 3; i < table.size(); ++i) {
    const double orig = table[i];
    table[i] = orig + test::fd_eps;
    const double up = test::weighted_sum(lookup(e, ids, ids.size()), w);
    table[i] = orig - test::fd_eps;
    const double down = test::weighted_sum(lookup(e, ids, ids.size()), w);
    table[i] = orig;
    EXPECT_LE(test::rel_err(e.weights.grad[i], (up - down) / (2 * test::fd_eps)), test::grad_tol) << "entry " << i;
  }
  for (std::size_t r : {0u, 1u, 3u, 5u, 6u})
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(e.weights.grad(r, c), 0.0) << "row " << r;
  EXPECT_EQ(e.weights.touched, (std::vector<std::uint8_t>{0, 0, 1, 0, 1, 0, 0}));
}

TEST(Lookup, FrozenTableReceivesNoGradient) {
  Rng rng(5);
  EmbeddingMatrix e = random_embeddings(7, 3, rng);
  e.trainable = false;
  e.weights.zero_grad();
  lookup_backward(e, {2, 3}, Tensor({2, 3}, 1.0));
  EXPECT_EQ(e.weights.grad, Tensor({7, 3}));
}

TEST(Lookup, UpdatesTouchOnlyBatchRowsAndKeepPadZero) {
  Rng rng(11);
  EmbeddingMatrix e = random_embeddings(10, 4, rng);
  const Tensor before = e.weights.value;
  std::vector<Param*> params{&e.weights};
  OptimizerState opt(params);
  std::vector<std::uint8_t> seen(10, 0);
  for (int step = 0; step < 50; ++step) {
    std::vector<TokenId> ids;
    for (int t = 0; t < 4; ++t) ids.push_back(static_cast<TokenId>(rng.below(6)));
    ids.push_back(Vocabulary::pad);
    for (TokenId id : ids) seen[id] = 1;
    e.weights.zero_grad();
    lookup_backward(e, ids, test::random_tensor(rng, {ids.size(), 4}));
    l2_penalty(params, 0.01);
    adam_step(params, opt, 0.05);
    for (std::size_t c = 0; c < 4; ++c) ASSERT_EQ(e.weights.value(0, c), 0.0);
  }
  for (std::size_t r = 1; r < 10; ++r) {
    const bool changed = std::memcmp(e.weights.value.row_ptr(r), before.row_ptr(r), 4 * sizeof(double)) != 0;
    EXPECT_EQ(changed, r < 6 && seen[r] != 0) << "row " << r;
  }
}
