#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "ursa/corpus.hpp"
#include "ursa/metrics.hpp"
#include "ursa/models.hpp"

namespace ursa {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double probability_floor = 1e-12;

struct LossResult {
  double loss = 0;
  Tensor grad_logits;
};

/// -w·ln p[label] with p floored at 1e-12; gradient w.r.t. the logits is
/// w·(p - onehot(label)).
inline LossResult cross_entropy(const Tensor& probs, int label, double weight = 1.0) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  LossResult r;
  r.loss = -weight * std::log(std::max(probs[static_cast<std::size_t>(label)], probability_floor));
  r.grad_logits = probs;
  r.grad_logits[static_cast<std::size_t>(label)] -= 1.0;
  if (weight != 1.0)
    for (double& g : r.grad_logits.storage()) g *= weight;
  return r;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class OptimizerState {
 public:
  OptimizerState() = default;
  explicit OptimizerState(std::span<Param* const> params, AdamConfig cfg = {}) : cfg_(cfg) {
    for (const Param* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  std::uint64_t step() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  /// One bias-corrected update from the accumulated gradients. Row-sparse
  /// parameters update (and advance the moments of) touched rows only.
  void apply(std::span<Param* const> params, double lr) {
    if (params.size() != m_.size()) throw ShapeError("adam: parameter list does not match optimizer state");
    ++step_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param& p = *params[k];
      if (p.value.shape() != m_[k].shape() || p.grad.shape() != p.value.shape())
        throw ShapeError("adam: shape mismatch for " + p.name + " " + shape_str(p.value.shape()));
      auto update = [&](std::size_t begin, std::size_t end) {
        double* w = p.value.data();
        const double* g = p.grad.data();
        double* m = m_[k].data();
        double* v = v_[k].data();
        for (std::size_t i = begin; i < end; ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
      };
      if (p.row_sparse) {
        const std::size_t c = p.value.cols();
        for (std::size_t r = 1; r < p.value.rows(); ++r)
          if (p.touched[r]) update(r * c, (r + 1) * c);
      } else {
        update(0, p.value.size());
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::uint64_t step_ = 0;
};

inline void adam_step(std::span<Param* const> params, OptimizerState& state, double lr) { state.apply(params, lr); }

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // epoch whose weights the model holds
  bool stopped_early = false;
};

struct FitOptions {
  /// Stop as soon as eval-mode training accuracy reaches this value (> 1 disables).
  double stop_at_train_accuracy = 2.0;
};

struct SetMetrics {
  double loss = 0, accuracy = 0;
};

/// Eval-mode mean cross-entropy (no L2) and accuracy at threshold 0.5.
inline SetMetrics measure(const Model& model, std::span<const TokenizedDoc> docs) {
  SetMetrics m;
  if (docs.empty()) return m;
  std::size_t correct = 0;
  for (const auto& d : docs) {
    const Tensor p = predict(model, d);
    m.loss += cross_entropy(p, d.label).loss;
    correct += ((p[1] >= 0.5) ? 1 : 0) == d.label;
  }
  m.loss /= static_cast<double>(docs.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(docs.size());
  return m;
}

inline std::vector<double> positive_scores(const Model& model, std::span<const TokenizedDoc> docs) {
  std::vector<double> s;
  s.reserve(docs.size());
  for (const auto& d : docs) s.push_back(predict(model, d)[1]);
  return s;
}

inline std::vector<int> labels_of(std::span<const TokenizedDoc> docs) {
  std::vector<int> l;
  l.reserve(docs.size());
  for (const auto& d : docs) l.push_back(d.label);
  return l;
}

/// Shuffles `order` and cuts it into consecutive batches of `batch_size`;
/// the last batch keeps the remainder.
inline std::vector<std::span<const std::size_t>> epoch_batches(std::vector<std::size_t>& order, std::size_t batch_size,
                                                               Rng& rng) {
  rng.shuffle(order);
  std::vector<std::span<const std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size)
    batches.emplace_back(order.data() + start, std::min(batch_size, order.size() - start));
  return batches;
}

/// Mini-batch Adam on mean batch cross-entropy plus L2. With a non-empty
/// validation set and patience > 0, stops after `patience` epochs without a
/// lower validation loss and restores the best weights.
inline TrainHistory fit(Model& model, std::span<const TokenizedDoc> train, std::span<const TokenizedDoc> val,
                        const HyperParams& hp, Rng& rng, const FitOptions& opts = {}) {
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  if (!(hp.learning_rate >= 0.0)) throw std::invalid_argument("fit: learning rate must be nonnegative");
  if (hp.batch_size < 1) throw std::invalid_argument("fit: batch_size must be >= 1");
  if (!(hp.dropout_rate >= 0.0 && hp.dropout_rate < 1.0)) throw std::invalid_argument("fit: dropout_rate must be in [0, 1)");

  const std::vector<Param*> params = model.parameters();
  OptimizerState opt(params);

  double class_weight[2] = {1.0, 1.0};
  if (hp.class_weights) {
    std::size_t n[2] = {0, 0};
    for (const auto& d : train) ++n[d.label == 1];
    for (int c = 0; c < 2; ++c)
      class_weight[c] = n[c] ? static_cast<double>(train.size()) / (2.0 * static_cast<double>(n[c])) : 1.0;
  }

  TrainHistory hist;
  const bool early = !val.empty() && hp.patience > 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Model::Trace trace;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = epoch_batches(order, hp.batch_size, rng);
    for (std::size_t batch_index = 0; batch_index < batches.size(); ++batch_index) {
      const auto batch = batches[batch_index];
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      model.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i : batch) {
        const TokenizedDoc& doc = train[i];
        const Tensor probs = model.forward(doc, true, &rng, &trace);
        LossResult lr = cross_entropy(probs, doc.label, class_weight[doc.label == 1]);
        batch_loss += lr.loss;
        for (double& g : lr.grad_logits.storage()) g *= inv_b;
        model.backward(doc, trace, lr.grad_logits);
      }
      loss_sum += batch_loss;
      const double objective = batch_loss * inv_b + l2_penalty(params, hp.l2_lambda);
      if (!std::isfinite(objective))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                              std::to_string(batch_index + 1));
      adam_step(params, opt, hp.learning_rate);
    }

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = measure(model, train).accuracy;
    if (!val.empty()) {
      const SetMetrics v = measure(model, val);
      rec.val_loss = v.loss;
      rec.val_accuracy = v.accuracy;
    }
    hist.epochs.push_back(rec);
    hist.best_epoch = epoch;

    if (early) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best_weights.clear();
        for (Param* p : model.all_parameters()) best_weights.push_back(p->value);
        since_best = 0;
      } else if (++since_best >= hp.patience) {
        hist.stopped_early = true;
        break;
      }
    }
    if (rec.train_accuracy >= opts.stop_at_train_accuracy) break;
  }

  if (early && !best_weights.empty()) {
    auto all = model.all_parameters();
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_weights[i];
    hist.best_epoch = 0;
    for (std::size_t e = 0; e < hist.epochs.size(); ++e)
      if (hist.epochs[e].val_loss == best_val) {
        hist.best_epoch = e;
        break;
      }
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;  // sorted index lists
};

/// Stratified: each class is shuffled, then dealt round-robin across folds,
/// continuing from where the previous class stopped.
inline FoldSplit kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  auto by = detail::indices_by_class(labels);
  for (int c = 0; c < 2; ++c)
    if (by[c].size() < k)
      throw std::invalid_argument("kfold_split: class " + std::to_string(c) + " has " + std::to_string(by[c].size()) +
                                  " members, fewer than k = " + std::to_string(k));
  Rng rng(seed);
  FoldSplit split;
  split.folds.resize(k);
  std::size_t next = 0;
  for (int c = 0; c < 2; ++c) {
    rng.shuffle(by[c]);
    for (std::size_t idx : by[c]) {
      split.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

struct FoldOutcome {
  EvaluationSummary summary;
  TrainHistory history;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct CrossValidationResult {
  std::vector<FoldOutcome> folds;
  EvaluationSummary mean;  // arithmetic mean over folds; confusion is the sum
};

inline EvaluationSummary mean_summary(const std::vector<FoldOutcome>& folds) {
  EvaluationSummary m;
  const double n = static_cast<double>(folds.size());
  for (const auto& f : folds) {
    const EvaluationSummary& s = f.summary;
    m.confusion += s.confusion;
    m.accuracy += s.accuracy / n;
    m.precision += s.precision / n;
    m.recall += s.recall / n;
    m.f1 += s.f1 / n;
    m.sensitivity += s.sensitivity / n;
    m.specificity += s.specificity / n;
    m.fpr_eq4 += s.fpr_eq4 / n;
    m.auc += s.auc / n;
  }
  return m;
}

struct CvOptions {
  std::size_t k = 3;
  std::uint64_t split_seed = 42;
  std::uint64_t train_seed = 42;
  /// Fraction of each training portion held out for early stopping (0 = none).
  double validation_fraction = 0.1;
  FitOptions fit;
};

template <typename T>
std::vector<T> gather(std::span<const T> items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

/// Trains one model per fold on the other k-1 folds and scores it on the
/// held-out fold. Each fold starts from a copy of `embedding`.
inline CrossValidationResult cross_validate(Architecture arch, const HyperParams& hp,
                                            std::span<const TokenizedDoc> docs, const EmbeddingMatrix& embedding,
                                            const CvOptions& opts) {
  const FoldSplit split = kfold_split(labels_of(docs), opts.k, opts.split_seed);
  CrossValidationResult res;
  for (std::size_t f = 0; f < opts.k; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < opts.k; ++g)
      if (g != f) train_idx.insert(train_idx.end(), split.folds[g].begin(), split.folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<TokenizedDoc> train = gather(docs, train_idx);
    std::vector<TokenizedDoc> val;
    if (opts.validation_fraction > 0) {
      const IndexSplit hold = stratified_split(labels_of(train), opts.validation_fraction,
                                               derive_seed(opts.split_seed, 1000 + f));
      std::span<const TokenizedDoc> tr(train);
      val = gather(tr, hold.test);
      train = gather(tr, hold.train);
    }
    const std::vector<TokenizedDoc> test = gather(docs, split.folds[f]);

    Rng rng = Rng::child(opts.train_seed, f);
    Model model = build_model(arch, hp, embedding, rng);
    FoldOutcome out;
    out.history = fit(model, train, val, hp, rng, opts.fit);
    out.scores = positive_scores(model, test);
    out.labels = labels_of(test);
    out.summary = evaluate(out.scores, out.labels);
    res.folds.push_back(std::move(out));
  }
  res.mean = mean_summary(res.folds);
  return res;
}

inline CrossValidationResult cross_validate(Architecture arch, const HyperParams& hp,
                                            std::span<const TokenizedDoc> docs, const EmbeddingMatrix& embedding,
                                            std::uint64_t seed, std::size_t k = 3) {
  CvOptions o;
  o.k = k;
  o.split_seed = o.train_seed = seed;
  return cross_validate(arch, hp, docs, embedding, o);
}

// ---------------------------------------------------------------------------
// Grid search

struct GridAxis {
  std::string name;
  std::vector<nlohmann::json> values;
};

using Grid = std::vector<GridAxis>;

/// Dropout, batch size, activation and learning rate candidates covering
/// every tuned value reported for the optimized model.
inline Grid default_grid() {
  return {{"dropout_rate", {0.5, 0.6, 0.8}},
          {"batch_size", {32}},
          {"activation", {"softmax"}},
          {"learning_rate", {2e-05, 1e-4, 1e-3}}};
}

/// A JSON object mapping hyperparameter names to candidate arrays; key order
/// is preserved and defines the combination order (last key varies fastest).
inline Grid parse_grid(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.empty()) throw UsageError("grid must be a non-empty object of candidate lists");
  Grid g;
  HyperParams probe;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      throw UsageError("grid entry '" + it.key() + "' must be a non-empty array");
    GridAxis axis{it.key(), {}};
    for (const auto& v : it.value()) {
      axis.values.push_back(nlohmann::json::parse(v.dump()));
      set_hyperparam(probe, axis.name, axis.values.back());
    }
    g.push_back(std::move(axis));
  }
  return g;
}

inline std::size_t grid_size(const Grid& g) {
  std::size_t n = 1;
  for (const auto& a : g) n *= a.values.size();
  return n;
}

/// Assignment for combination `index` in row-major order.
inline nlohmann::ordered_json grid_point(const Grid& g, std::size_t index) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::vector<std::size_t> pick(g.size());
  for (std::size_t a = g.size(); a-- > 0;) {
    pick[a] = index % g[a].values.size();
    index /= g[a].values.size();
  }
  for (std::size_t a = 0; a < g.size(); ++a) j[g[a].name] = nlohmann::ordered_json::parse(g[a].values[pick[a]].dump());
  return j;
}

struct GridRow {
  std::size_t index = 0;
  nlohmann::ordered_json assignment;
  HyperParams hp;
  CrossValidationResult cv;
};

struct GridSearchResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;
  const HyperParams& best_params() const { return rows.at(best).hp; }
};

/// Highest mean accuracy; ties go to higher mean F1, then the lower index.
inline std::size_t best_candidate(const std::vector<GridRow>& rows) {
  if (rows.empty()) throw UsageError("no grid candidates");
  std::size_t best = 0;
  for (std::size_t t = 1; t < rows.size(); ++t) {
    const auto& a = rows[t].cv.mean;
    const auto& b = rows[best].cv.mean;
    if (a.accuracy > b.accuracy || (a.accuracy == b.accuracy && a.f1 > b.f1)) best = t;
  }
  return best;
}

struct GridOptions {
  std::size_t k = 3;
  std::uint64_t seed = 42;
  double validation_fraction = 0.1;
  std::size_t jobs = 1;
  FitOptions fit;
};

/// Exhaustive search scored by mean CV accuracy (ties: higher mean F1, then
/// lower index). Every trial uses the same folds; trial t trains from the
/// stream derived from (seed, t), so any `jobs` value gives the same table.
inline GridSearchResult grid_search(Architecture arch, const HyperParams& base, const Grid& grid,
                                    std::span<const TokenizedDoc> docs, const EmbeddingMatrix& embedding,
                                    const GridOptions& opts) {
  if (grid.empty()) throw UsageError("grid_search: empty grid");
  const std::size_t n = grid_size(grid);
  if (n == 0) throw UsageError("grid_search: empty candidate list");
  GridSearchResult res;
  res.rows.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    res.rows[t].index = t;
    res.rows[t].assignment = grid_point(grid, t);
    res.rows[t].hp = base;
    for (auto it = res.rows[t].assignment.begin(); it != res.rows[t].assignment.end(); ++it)
      set_hyperparam(res.rows[t].hp, it.key(), nlohmann::json::parse(it.value().dump()));
    res.rows[t].hp.validate();
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < n;) {
      try {
        CvOptions cv;
        cv.k = opts.k;
        cv.split_seed = opts.seed;
        cv.train_seed = derive_seed(opts.seed, t);
        cv.validation_fraction = opts.validation_fraction;
        cv.fit = opts.fit;
        res.rows[t].cv = cross_validate(arch, res.rows[t].hp, docs, embedding, cv);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  res.best = best_candidate(res.rows);
  return res;
}

}  // namespace ursa
