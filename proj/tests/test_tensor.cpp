#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "ursa/rng.hpp"
#include "ursa/tensor.hpp"

using namespace ursa;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor a = Tensor::mat({{1, 0}, {0, 1}});
  const Tensor b = Tensor::mat({{3, 4}, {5, 6}});
  EXPECT_EQ(matmul(a, b), b);
}

TEST(Matmul, RowTimesColumn) {
  const Tensor c = matmul(Tensor::mat({{1, 2}}), Tensor::mat({{3}, {4}}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Matmul, MismatchNamesBothShapes) {
  const Tensor a({2, 3}), b({4, 2});
  try {
    (void)matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, AssociativeOnRandomChains) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(6), k = 1 + rng.below(6), n = 1 + rng.below(6), p = 1 + rng.below(6);
    const Tensor a = rand_uniform(rng, {m, k}, -1, 1);
    const Tensor b = rand_uniform(rng, {k, n}, -1, 1);
    const Tensor c = rand_uniform(rng, {n, p}, -1, 1);
    const Tensor left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i)
      EXPECT_LE(test::rel_err(left[i], right[i]), 1e-9);
  }
}

TEST(Elementwise, ActivationFixedPoints) {
  const Tensor zero = Tensor::vec({0.0});
  EXPECT_EQ(elementwise(ElementwiseOp::sigmoid, zero)[0], 0.5);
  EXPECT_EQ(elementwise(ElementwiseOp::tanh, zero)[0], 0.0);
  EXPECT_EQ(elementwise(ElementwiseOp::relu, Tensor::vec({-1, 2})), Tensor::vec({0, 2}));
}

TEST(Elementwise, BinaryKinds) {
  const Tensor a = Tensor::vec({1, 2, 3}), b = Tensor::vec({4, 5, 6});
  EXPECT_EQ(elementwise(ElementwiseOp::add, a, &b), Tensor::vec({5, 7, 9}));
  EXPECT_EQ(elementwise(ElementwiseOp::sub, a, &b), Tensor::vec({-3, -3, -3}));
  EXPECT_EQ(elementwise(ElementwiseOp::hadamard, a, &b), Tensor::vec({4, 10, 18}));
  EXPECT_EQ(elementwise(ElementwiseOp::scale, a, nullptr, 2.0), Tensor::vec({2, 4, 6}));
}

TEST(Elementwise, ShapeMismatchThrows) {
  const Tensor a({2}), b({3});
  EXPECT_THROW(elementwise(ElementwiseOp::add, a, &b), ShapeError);
  EXPECT_THROW(hadamard(Tensor({2, 3}), Tensor({3, 2})), ShapeError);
}

TEST(Elementwise, SigmoidIsStableForLargeMagnitudes) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(Softmax, Examples) {
  EXPECT_EQ(softmax(Tensor::vec({0, 0})), Tensor::vec({0.5, 0.5}));
  const Tensor big = softmax(Tensor::vec({1000, 0}));
  EXPECT_TRUE(big.all_finite());
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);
  const Tensor p = softmax(Tensor::vec({std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, SumsToOneForRandomLogits) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const Tensor p = softmax(rand_uniform(rng, {n}, -1000, 1000));
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    for (double v : p.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Concat, Examples) {
  const Tensor a({100}, 1.0), b({100}, 2.0), c({100}, 3.0);
  const Tensor abc = concat({a, b, c});
  EXPECT_EQ(abc.shape(), (Shape{300}));
  EXPECT_EQ(abc[0], 1.0);
  EXPECT_EQ(abc[100], 2.0);
  EXPECT_EQ(abc[299], 3.0);
  EXPECT_EQ(concat({a}), a);
  const Tensor m = concat({Tensor({2, 3}, 1.0), Tensor({4, 3}, 2.0)}, 0);
  EXPECT_EQ(m.shape(), (Shape{6, 3}));
  EXPECT_EQ(m(1, 2), 1.0);
  EXPECT_EQ(m(2, 0), 2.0);
}

TEST(Concat, IncompatibleShapesThrow) {
  EXPECT_THROW(concat({Tensor({2, 3}), Tensor({2, 4})}, 0), ShapeError);
  EXPECT_THROW(concat({}), ShapeError);
}

TEST(Concat, SecondAxisPreservesRowOrder) {
  const Tensor m = concat({Tensor::mat({{1}, {2}}), Tensor::mat({{3, 4}, {5, 6}})}, 1);
  EXPECT_EQ(m, Tensor::mat({{1, 3, 4}, {2, 5, 6}}));
}

TEST(RandUniform, DeterministicPerSeed) {
  Rng a(42), b(42);
  const Tensor x = rand_uniform(a, {4}, -0.25, 0.25);
  const Tensor y = rand_uniform(b, {4}, -0.25, 0.25);
  EXPECT_EQ(x, y);
  for (double v : x.values()) {
    EXPECT_GE(v, -0.25);
    EXPECT_LT(v, 0.25);
  }
}

TEST(RandUniform, DegenerateRangeThrows) {
  Rng rng(1);
  EXPECT_THROW(rand_uniform(rng, {3}, 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(rand_uniform(rng, {3}, 1.0, 0.0), std::invalid_argument);
}

TEST(RandUniform, SampleMeanNearHalf) {
  Rng rng(42);
  const Tensor x = rand_uniform(rng, {100000}, 0.0, 1.0);
  EXPECT_NEAR(x.sum() / 100000.0, 0.5, 0.01);
}

TEST(NumericGradient, Examples) {
  auto sq = [](const Tensor& x) {
    double s = 0;
    for (double v : x.values()) s += v * v;
    return s;
  };
  const Tensor g = numeric_gradient(sq, Tensor::vec({1, 2}), 1e-4);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);

  const Tensor z = numeric_gradient([](const Tensor&) { return 7.0; }, Tensor::vec({1, 2, 3}), 1e-4);
  EXPECT_EQ(z, Tensor({3}));

  const Tensor p = numeric_gradient([](const Tensor& x) { return x[0] * x[1]; }, Tensor::vec({3, 5}), 1e-4);
  EXPECT_NEAR(p[0], 5.0, 1e-8);
  EXPECT_NEAR(p[1], 3.0, 1e-8);
}

TEST(NumericGradient, NonPositiveEpsThrows) {
  EXPECT_THROW(numeric_gradient([](const Tensor&) { return 0.0; }, Tensor({1}), 0.0), std::invalid_argument);
}

TEST(TensorShape, DataLengthMatchesShape) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  const Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
}

TEST(TensorShape, SliceRowsCopies) {
  Tensor m = Tensor::mat({{1, 2}, {3, 4}, {5, 6}});
  Tensor s = m.slice_rows(1, 3);
  EXPECT_EQ(s, Tensor::mat({{3, 4}, {5, 6}}));
  s(0, 0) = 100;
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_THROW(m.slice_rows(2, 2), ShapeError);
  EXPECT_THROW(m.slice_rows(1, 4), ShapeError);
}

TEST(TensorShape, IndexedAccess) {
  Tensor t({2, 3, 4});
  t.at({1, 2, 3}) = 9.0;
  EXPECT_EQ(t[23], 9.0);
  EXPECT_THROW(t.at({2, 0, 0}), ShapeError);
  EXPECT_THROW(t.at({0, 0}), ShapeError);
}

TEST(Rng, IdenticalSeedsGiveIdenticalStreams) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, KnownFirstOutputs) {
  // xoshiro256** seeded through splitmix64 from seed 0.
  Rng r(0);
  std::uint64_t state = 0;
  std::uint64_t s[4];
  for (auto& v : s) v = splitmix64(state);
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  for (int i = 0; i < 5; ++i) {
    const std::uint64_t expect = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    EXPECT_EQ(r.next_u64(), expect);
  }
}

TEST(Rng, SplitmixReferenceValue) {
  // First output of the reference splitmix64 for seed 0.
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xE220A8397B1DCDAFull);
}

TEST(Rng, ChildStreamsAreDistinct) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 64; ++s) firsts.insert(Rng::child(42, s).next_u64());
  EXPECT_EQ(firsts.size(), 64u);
  EXPECT_EQ(Rng::child(42, 3).next_u64(), Rng::child(42, 3).next_u64());
}

TEST(Rng, BelowAndShuffle) {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}
