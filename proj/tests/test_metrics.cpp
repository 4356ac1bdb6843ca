#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ursa/metrics.hpp"
#include "ursa/rng.hpp"

using namespace ursa;

namespace {

ConfusionCounts cc(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) { return {tp, tn, fp, fn}; }

// Exhaustive pair counting, ties worth one half.
double auc_pairs(const std::vector<double>& s, const std::vector<int>& l) {
  std::uint64_t twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[i] != 1 || l[j] != 0) continue;
      ++pairs;
      twice += s[i] > s[j] ? 2 : s[i] == s[j] ? 1 : 0;
    }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Random scored set with both classes; half the draws use a coarse score grid to force ties.
Instance random_instance(Rng& rng) {
  Instance x;
  const std::size_t n = 2 + rng.below(199);
  const bool coarse = rng.below(2) == 0;
  for (std::size_t i = 0; i < n; ++i) {
    x.scores.push_back(coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform());
    x.labels.push_back(static_cast<int>(rng.below(2)));
  }
  x.labels[0] = 0;
  x.labels[1] = 1;
  return x;
}

}  // namespace

TEST(Confusion, Examples) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<int> l{1, 0};
  EXPECT_EQ(confusion(s, l), cc(1, 1, 0, 0));
  const std::vector<double> half{0.5};
  const std::vector<int> neg{0};
  EXPECT_EQ(confusion(half, neg), cc(0, 0, 1, 0));
  std::vector<int> vtc(405, 1);
  vtc.resize(505, 0);
  const std::vector<double> ones(505, 1.0);
  const ConfusionCounts all = confusion(ones, vtc);
  EXPECT_EQ(all.tp, 405u);
  EXPECT_EQ(all.fp, 100u);
  EXPECT_EQ(all.tn + all.fn, 0u);
}

TEST(Confusion, Errors) {
  const std::vector<double> s{0.2, 0.4};
  const std::vector<int> l{1};
  EXPECT_THROW(confusion(s, l), std::invalid_argument);
  EXPECT_THROW(confusion({}, {}), std::invalid_argument);
}

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(cc(8, 6, 3, 3)), 0.70);
  EXPECT_EQ(accuracy(cc(5, 7, 0, 0)), 1.0);
  EXPECT_EQ(accuracy(cc(0, 0, 2, 3)), 0.0);
  EXPECT_THROW(accuracy(cc(0, 0, 0, 0)), std::invalid_argument);
}

TEST(F1, Examples) {
  const F1Result half = f1(cc(1, 0, 1, 1));
  EXPECT_EQ(half.precision, 0.5);
  EXPECT_EQ(half.recall, 0.5);
  EXPECT_EQ(half.f1, 0.5);
  const F1Result r = f1(cc(93, 0, 10, 3));
  EXPECT_NEAR(r.precision, 0.9029, 5e-5);
  EXPECT_NEAR(r.recall, 0.9688, 5e-5);
  EXPECT_NEAR(r.f1, 0.9347, 5e-5);
  EXPECT_EQ(f1(cc(0, 5, 2, 3)).f1, 0.0);
  EXPECT_EQ(f1(cc(0, 5, 0, 0)).precision, 0.0);
}

TEST(Sensitivity, Examples) {
  EXPECT_EQ(sensitivity(cc(4, 1, 1, 0)), 1.0);
  EXPECT_EQ(sensitivity(cc(3, 0, 0, 1)), 0.75);
  EXPECT_EQ(sensitivity(cc(0, 2, 0, 5)), 0.0);
  EXPECT_THROW(sensitivity(cc(0, 2, 2, 0)), std::invalid_argument);
}

TEST(FprEq4, Examples) {
  EXPECT_EQ(fpr_eq4(cc(1, 4, 0, 0)), 0.0);
  EXPECT_EQ(fpr_eq4(cc(0, 3, 1, 0)), 0.25);
  EXPECT_EQ(fpr_eq4(cc(2, 0, 3, 0)), 1.0);
  EXPECT_EQ(specificity(cc(0, 3, 1, 0)), 0.75);
  EXPECT_THROW(fpr_eq4(cc(2, 0, 0, 1)), std::invalid_argument);
  EXPECT_THROW(specificity(cc(2, 0, 0, 1)), std::invalid_argument);
}

TEST(Formulas, MatchDirectArithmeticOnRandomTallies) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const ConfusionCounts c = cc(rng.below(500), rng.below(500), rng.below(500), rng.below(500));
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    if (c.total() > 0) {
      EXPECT_EQ(accuracy(c), (tp + tn) / (tp + tn + fp + fn));
    }
    const double p = c.tp + c.fp ? tp / (tp + fp) : 0.0, r = c.tp + c.fn ? tp / (tp + fn) : 0.0;
    const F1Result got = f1(c);
    EXPECT_EQ(got.precision, p);
    EXPECT_EQ(got.recall, r);
    EXPECT_EQ(got.f1, p + r == 0 ? 0.0 : 2 * p * r / (p + r));
    if (c.tp + c.fn) {
      EXPECT_EQ(sensitivity(c), tp / (tp + fn));
    }
    if (c.tn + c.fp) {
      EXPECT_EQ(fpr_eq4(c), fp / (tn + fp));
    }
  }
}

TEST(Formulas, ValuesLieInUnitInterval) {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const ConfusionCounts c = cc(rng.below(20), rng.below(20), rng.below(20), rng.below(20));
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (c.total()) {
      EXPECT_TRUE(in01(accuracy(c)));
    }
    const F1Result r = f1(c);
    EXPECT_TRUE(in01(r.f1) && in01(r.precision) && in01(r.recall));
    if (c.tp + c.fn) {
      EXPECT_TRUE(in01(sensitivity(c)));
    }
    if (c.tn + c.fp) {
      EXPECT_TRUE(in01(fpr_eq4(c)));
    }
  }
}

TEST(Roc, HandExample) {
  const std::vector<double> s{0.8, 0.4, 0.6, 0.2};
  const std::vector<int> l{1, 1, 0, 0};
  const auto pts = roc_curve(s, l);
  const std::vector<std::pair<double, double>> expect{{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}, {1, 1}};
  ASSERT_EQ(pts.size(), expect.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].fpr, expect[i].first) << i;
    EXPECT_EQ(pts[i].tpr, expect[i].second) << i;
  }
  EXPECT_EQ(pts.front().threshold, INFINITY);
  EXPECT_EQ(pts.back().threshold, -INFINITY);
  EXPECT_DOUBLE_EQ(auc(pts), 0.75);
  EXPECT_DOUBLE_EQ(auc_rank(s, l), 0.75);
}

TEST(Roc, PerfectSeparationPassesThroughTopLeft) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<int> l{1, 1, 0, 0};
  const auto pts = roc_curve(s, l);
  bool corner = false;
  for (const auto& p : pts) corner = corner || (p.fpr == 0.0 && p.tpr == 1.0);
  EXPECT_TRUE(corner);
  EXPECT_EQ(auc(pts), 1.0);
}

TEST(Roc, IdenticalScoresGiveDiagonal) {
  const std::vector<double> s(6, 0.4);
  const std::vector<int> l{1, 0, 1, 0, 0, 1};
  const auto pts = roc_curve(s, l);
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& p : pts) EXPECT_EQ(p.fpr, p.tpr);
  EXPECT_EQ(auc(pts), 0.5);
  EXPECT_EQ(auc_rank(s, l), 0.5);
}

TEST(Roc, MonotoneAndSorted) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Instance x = random_instance(rng);
    const auto pts = roc_curve(x.scores, x.labels);
    EXPECT_EQ(pts.front().fpr, 0.0);
    EXPECT_EQ(pts.back().tpr, 1.0);
    for (std::size_t k = 1; k < pts.size(); ++k) {
      EXPECT_GT(pts[k - 1].threshold, pts[k].threshold);
      EXPECT_LE(pts[k - 1].fpr, pts[k].fpr);
      EXPECT_LE(pts[k - 1].tpr, pts[k].tpr);
    }
  }
}

TEST(Roc, Errors) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> one_class{1, 1};
  EXPECT_THROW(roc_curve(s, one_class), std::invalid_argument);
  EXPECT_THROW(auc_rank(s, one_class), std::invalid_argument);
  const std::vector<RocPoint> single{{0, 0, 0}};
  EXPECT_THROW(auc(single), std::invalid_argument);
}

TEST(Auc, TrapezoidEqualsPairCounting) {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const Instance x = random_instance(rng);
    const double oracle = auc_pairs(x.scores, x.labels);
    EXPECT_NEAR(auc(roc_curve(x.scores, x.labels)), oracle, 1e-12) << "instance " << i;
    EXPECT_NEAR(auc_rank(x.scores, x.labels), oracle, 1e-12) << "instance " << i;
  }
}

TEST(Auc, LabelSwapDuality) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    Instance x = random_instance(rng);
    const double a = auc(roc_curve(x.scores, x.labels));
    for (auto& s : x.scores) s = 1.0 - s;
    for (auto& l : x.labels) l = 1 - l;
    EXPECT_NEAR(auc(roc_curve(x.scores, x.labels)), a, 1e-12);
  }
}

TEST(Evaluate, TallyAdditivity) {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Instance a = random_instance(rng), b = random_instance(rng);
    Instance ab = a;
    ab.scores.insert(ab.scores.end(), b.scores.begin(), b.scores.end());
    ab.labels.insert(ab.labels.end(), b.labels.begin(), b.labels.end());
    const ConfusionCounts sum = confusion(a.scores, a.labels) + confusion(b.scores, b.labels);
    const EvaluationSummary joint = evaluate(ab.scores, ab.labels);
    EXPECT_EQ(joint.confusion, sum);
    EXPECT_EQ(joint.accuracy, accuracy(sum));
    EXPECT_EQ(joint.f1, f1(sum).f1);
    EXPECT_EQ(joint.sensitivity, sensitivity(sum));
    EXPECT_EQ(joint.fpr_eq4, fpr_eq4(sum));
  }
}

TEST(Evaluate, SingleClassFallbacks) {
  const std::vector<double> s{0.9, 0.2};
  const std::vector<int> l{1, 1};
  const EvaluationSummary e = evaluate(s, l);
  EXPECT_EQ(e.auc, 0.5);
  EXPECT_EQ(e.fpr_eq4, 0.0);
  EXPECT_EQ(e.sensitivity, 0.5);
  EXPECT_EQ(e.accuracy, 0.5);
}

TEST(RocCsv, HeaderAndRoundTripPrecision) {
  const std::vector<double> s{0.1 + 0.2, 1.0 / 3.0, 0.7};
  const std::vector<int> l{1, 0, 1};
  const auto pts = roc_curve(s, l);
  std::ostringstream os;
  write_roc_csv(os, pts);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "threshold,fpr,tpr");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ASSERT_LT(row, pts.size());
    std::istringstream fields(line);
    std::string t, f, p;
    std::getline(fields, t, ',');
    std::getline(fields, f, ',');
    std::getline(fields, p, ',');
    EXPECT_EQ(std::strtod(t.c_str(), nullptr), pts[row].threshold);
    EXPECT_EQ(std::strtod(f.c_str(), nullptr), pts[row].fpr);
    EXPECT_EQ(std::strtod(p.c_str(), nullptr), pts[row].tpr);
    ++row;
  }
  EXPECT_EQ(row, pts.size());
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
}
