#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ursa {

/// Tallies with class 1 (positive / satisfied) as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                                std::to_string(labels.size()) + ")");
  if (scores.empty()) throw std::invalid_argument("no predictions to evaluate");
}

/// Predicts class 1 iff score >= threshold.
inline ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  check_scores(scores, labels);
  ConfusionCounts cc;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++cc.tp;
    else if (pred) ++cc.fp;
    else if (pos) ++cc.fn;
    else ++cc.tn;
  }
  return cc;
}

inline double accuracy(const ConfusionCounts& cc) {
  if (cc.total() == 0) throw std::invalid_argument("accuracy of an empty tally");
  return static_cast<double>(cc.tp + cc.tn) / static_cast<double>(cc.total());
}

struct F1Result {
  double precision = 0, recall = 0, f1 = 0;
};

// A zero denominator makes the affected quantity 0.
inline F1Result f1(const ConfusionCounts& cc) {
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  F1Result r;
  r.precision = ratio(cc.tp, cc.tp + cc.fp);
  r.recall = ratio(cc.tp, cc.tp + cc.fn);
  const double s = r.precision + r.recall;
  r.f1 = s == 0 ? 0.0 : 2 * r.precision * r.recall / s;
  return r;
}

inline double sensitivity(const ConfusionCounts& cc) {
  if (cc.tp + cc.fn == 0) throw std::invalid_argument("sensitivity undefined: no positive examples");
  return static_cast<double>(cc.tp) / static_cast<double>(cc.tp + cc.fn);
}

/// FP / (TN + FP): the false-positive rate, which the source text labels
/// "specificity".
inline double fpr_eq4(const ConfusionCounts& cc) {
  if (cc.tn + cc.fp == 0) throw std::invalid_argument("false-positive rate undefined: no negative examples");
  return static_cast<double>(cc.fp) / static_cast<double>(cc.tn + cc.fp);
}

/// Textbook specificity TN / (TN + FP).
inline double specificity(const ConfusionCounts& cc) {
  if (cc.tn + cc.fp == 0) throw std::invalid_argument("specificity undefined: no negative examples");
  return static_cast<double>(cc.tn) / static_cast<double>(cc.tn + cc.fp);
}

struct RocPoint {
  double threshold = 0, fpr = 0, tpr = 0;
};

/// Sweeps +inf, every distinct score in descending order, then -inf.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t P = 0;
  for (int l : labels) P += l == 1;
  const std::size_t N = labels.size() - P;
  if (P == 0 || N == 0) throw std::invalid_argument("ROC needs both classes present");

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<RocPoint> pts{{inf, 0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    pts.push_back({s, static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  pts.push_back({-inf, 1.0, 1.0});
  return pts;
}

/// Trapezoidal area under a ROC curve.
inline double auc(std::span<const RocPoint> pts) {
  if (pts.size() < 2) throw std::invalid_argument("AUC needs at least two ROC points");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
  return area;
}

/// P(score of a random positive > score of a random negative), ties counting
/// one half. Computed from ranks in O(n log n).
inline double auc_rank(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U statistic, kept integral.
  std::uint64_t twice_u = 0, neg_below = 0;
  std::size_t P = 0, N = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg)++;
      ++j;
    }
    twice_u += pos * (2 * neg_below + neg);
    neg_below += neg;
    P += pos;
    N += neg;
    i = j;
  }
  if (P == 0 || N == 0) throw std::invalid_argument("AUC needs both classes present");
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

inline constexpr double auc_agreement_tolerance = 1e-12;

struct EvaluationSummary {
  ConfusionCounts confusion;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  double sensitivity = 0, specificity = 0, fpr_eq4 = 0;
  double auc = 0;
};

/// All metrics for one set of predictions. AUC is computed both ways and
/// the two must agree. Single-class inputs get AUC 0.5 (no ranking exists)
/// and 0 for any undefined rate.
inline EvaluationSummary evaluate(std::span<const double> scores, std::span<const int> labels,
                                  double threshold = 0.5) {
  EvaluationSummary s;
  s.confusion = confusion(scores, labels, threshold);
  const ConfusionCounts& cc = s.confusion;
  s.accuracy = accuracy(cc);
  const F1Result fr = f1(cc);
  s.precision = fr.precision;
  s.recall = fr.recall;
  s.f1 = fr.f1;
  const bool has_pos = cc.tp + cc.fn > 0, has_neg = cc.tn + cc.fp > 0;
  s.sensitivity = has_pos ? sensitivity(cc) : 0.0;
  s.specificity = has_neg ? specificity(cc) : 0.0;
  s.fpr_eq4 = has_neg ? fpr_eq4(cc) : 0.0;
  if (has_pos && has_neg) {
    const auto pts = roc_curve(scores, labels);
    s.auc = auc(pts);
    const double check = auc_rank(scores, labels);
    if (std::abs(s.auc - check) > auc_agreement_tolerance)
      throw std::logic_error("trapezoidal and rank AUC disagree: " + std::to_string(s.auc) + " vs " +
                             std::to_string(check));
  } else {
    s.auc = 0.5;
  }
  return s;
}

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// `threshold,fpr,tpr` rows with round-trip precision.
inline void write_roc_csv(std::ostream& os, std::span<const RocPoint> pts) {
  os << "threshold,fpr,tpr\n";
  for (const RocPoint& p : pts)
    os << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
}

}  // namespace ursa
