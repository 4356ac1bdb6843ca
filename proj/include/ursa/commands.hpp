#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ursa/checkpoint.hpp"
#include "ursa/corpus.hpp"
#include "ursa/embeddings.hpp"
#include "ursa/metrics.hpp"
#include "ursa/models.hpp"
#include "ursa/textproc.hpp"
#include "ursa/train.hpp"

#ifndef URSA_DEFAULT_STOPWORDS
#define URSA_DEFAULT_STOPWORDS ""
#endif

namespace ursa {

// ---------------------------------------------------------------------------
// Run configuration

struct DataConfig {
  std::string path;
  std::string text_column = "text";
  std::string label_column = "label";
  std::string name;  // empty: derived from the file name
  LabelMap label_map = default_label_map();
};

struct PreprocessConfig {
  bool strip_diacritics = false;
  std::string stopwords = URSA_DEFAULT_STOPWORDS;  // empty: keep every token
  std::size_t min_freq = 1;
};

struct RunConfig {
  DataConfig data;
  std::string embeddings;  // empty: random initialization
  Architecture arch = Architecture::bilstm_slmfcnn;
  HyperParams hp;
  PreprocessConfig preprocess;
  std::uint64_t seed = 42;
  std::string out = "out";
  std::size_t folds = 3;
  double test_fraction = 0.2;
  double validation_fraction = 0.1;
  std::size_t jobs = 1;
  std::string grid;        // gridsearch: candidate file, empty for the built-in grid
  std::string checkpoint;  // evaluate: model to score
  std::vector<std::string> inputs;  // report: metrics files
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw UsageError("unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.data.label_map) labels[k] = v;
  j["data"] = {{"path", c.data.path},
               {"text_column", c.data.text_column},
               {"label_column", c.data.label_column},
               {"name", c.data.name},
               {"label_map", labels}};
  j["embeddings"] = c.embeddings;
  j["arch"] = to_string(c.arch);
  j["hyperparams"] = nlohmann::ordered_json::parse(nlohmann::json(c.hp).dump());
  j["preprocess"] = {{"strip_diacritics", c.preprocess.strip_diacritics},
                     {"stopwords", c.preprocess.stopwords},
                     {"min_freq", c.preprocess.min_freq}};
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["folds"] = c.folds;
  j["test_fraction"] = c.test_fraction;
  j["validation_fraction"] = c.validation_fraction;
  j["jobs"] = c.jobs;
  j["grid"] = c.grid;
  j["checkpoint"] = c.checkpoint;
  j["inputs"] = c.inputs;
  return j;
}

/// Missing keys keep their defaults; unknown keys are an error.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    detail::reject_unknown(j,
                           {"data", "embeddings", "arch", "hyperparams", "preprocess", "seed", "out", "folds",
                            "test_fraction", "validation_fraction", "jobs", "grid", "checkpoint", "inputs"},
                           "");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::reject_unknown(d, {"path", "text_column", "label_column", "name", "label_map"}, "data");
      detail::read(d, "path", c.data.path);
      detail::read(d, "text_column", c.data.text_column);
      detail::read(d, "label_column", c.data.label_column);
      detail::read(d, "name", c.data.name);
      if (d.contains("label_map")) {
        c.data.label_map.clear();
        for (auto it = d.at("label_map").begin(); it != d.at("label_map").end(); ++it) {
          const int v = it.value().get<int>();
          if (v != 0 && v != 1) throw UsageError("data.label_map values must be 0 or 1");
          c.data.label_map[it.key()] = v;
        }
      }
    }
    detail::read(j, "embeddings", c.embeddings);
    if (j.contains("arch")) c.arch = parse_architecture(j.at("arch").get<std::string>());
    if (j.contains("hyperparams")) {
      nlohmann::json merged = c.hp;
      for (auto it = j.at("hyperparams").begin(); it != j.at("hyperparams").end(); ++it) merged[it.key()] = it.value();
      c.hp = merged.get<HyperParams>();
    }
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      detail::reject_unknown(p, {"strip_diacritics", "stopwords", "min_freq"}, "preprocess");
      detail::read(p, "strip_diacritics", c.preprocess.strip_diacritics);
      detail::read(p, "stopwords", c.preprocess.stopwords);
      detail::read(p, "min_freq", c.preprocess.min_freq);
    }
    detail::read(j, "seed", c.seed);
    detail::read(j, "out", c.out);
    detail::read(j, "folds", c.folds);
    detail::read(j, "test_fraction", c.test_fraction);
    detail::read(j, "validation_fraction", c.validation_fraction);
    detail::read(j, "jobs", c.jobs);
    detail::read(j, "grid", c.grid);
    detail::read(j, "checkpoint", c.checkpoint);
    detail::read(j, "inputs", c.inputs);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

/// Applies `key=value`. Keys are dotted paths into the config
/// ("hyperparams.dropout_rate", "data.text_column"); a bare hyperparameter
/// name is accepted as shorthand. Values are JSON, falling back to a string.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json j = nlohmann::json::parse(to_json(cfg).dump());
  if (key.find('.') == std::string::npos && !j.contains(key) && j["hyperparams"].contains(key))
    key = "hyperparams." + key;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw UsageError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  cfg = run_config_from_json(j);
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!std::filesystem::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

inline void validate_paths(const RunConfig& cfg, bool needs_data) {
  if (needs_data) require_file(cfg.data.path, "data file");
  if (!cfg.embeddings.empty()) require_file(cfg.embeddings, "embedding file");
  if (!cfg.preprocess.stopwords.empty()) require_file(cfg.preprocess.stopwords, "stopword file");
  if (!cfg.grid.empty()) require_file(cfg.grid, "grid file");
}

// ---------------------------------------------------------------------------
// Shared pipeline steps

enum SeedStream : std::uint64_t { embedding_stream = 1, holdout_stream = 2, validation_stream = 3, model_stream = 4 };

struct PreparedCorpus {
  Dataset dataset;  // documents with at least one token left
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::size_t> dropped_rows;  // 1-based data rows that preprocessed to nothing
};

inline TextPipeline make_pipeline(const PreprocessConfig& p) {
  TextPipeline pipe;
  pipe.options.strip_diacritics = p.strip_diacritics;
  if (!p.stopwords.empty()) pipe.stopwords = load_stopwords(p.stopwords);
  return pipe;
}

inline PreparedCorpus prepare_corpus(const RunConfig& cfg) {
  Dataset raw = load_csv(cfg.data.path, cfg.data.text_column, cfg.data.label_column, cfg.data.label_map);
  if (!cfg.data.name.empty()) raw.name = cfg.data.name;
  const TextPipeline pipe = make_pipeline(cfg.preprocess);
  PreparedCorpus pc;
  pc.dataset.name = raw.name;
  pc.dataset.label_map = raw.label_map;
  for (std::size_t i = 0; i < raw.documents.size(); ++i) {
    auto toks = pipe(raw.documents[i].text);
    if (toks.empty()) {
      pc.dropped_rows.push_back(i + 1);
      continue;
    }
    pc.dataset.documents.push_back(raw.documents[i]);
    pc.tokens.push_back(std::move(toks));
  }
  if (pc.tokens.empty()) throw CorpusError("no document in " + cfg.data.path + " has tokens after preprocessing");
  return pc;
}

inline std::vector<TokenizedDoc> encode_corpus(const PreparedCorpus& pc, const Vocabulary& vocab, std::size_t max_len) {
  std::vector<TokenizedDoc> docs;
  docs.reserve(pc.tokens.size());
  for (std::size_t i = 0; i < pc.tokens.size(); ++i)
    docs.push_back(encode(pc.tokens[i], vocab, max_len, pc.dataset.documents[i].label));
  return docs;
}

inline EmbeddingMatrix make_embeddings(const RunConfig& cfg, const Vocabulary& vocab) {
  Rng rng = Rng::child(cfg.seed, embedding_stream);
  if (cfg.embeddings.empty()) return random_embeddings(vocab.size(), cfg.hp.embedding_dim, rng);
  return load_embeddings(cfg.embeddings, vocab, rng, cfg.hp.embedding_dim);
}

inline void require_both_classes(const std::vector<int>& labels, const std::string& what) {
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  if (pos == 0 || pos == labels.size()) throw CorpusError(what + " needs documents of both classes");
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

inline nlohmann::ordered_json json_number(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json summary_json(const EvaluationSummary& s) {
  nlohmann::ordered_json j;
  j["f1"] = s.f1;
  j["accuracy"] = s.accuracy;
  j["auc"] = s.auc;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["sensitivity"] = s.sensitivity;
  j["specificity"] = s.specificity;
  j["fpr_eq4"] = s.fpr_eq4;
  j["confusion"] = {{"tp", s.confusion.tp}, {"tn", s.confusion.tn}, {"fp", s.confusion.fp}, {"fn", s.confusion.fn}};
  return j;
}

inline nlohmann::ordered_json metrics_json(Architecture arch, const std::string& dataset, const std::string& split,
                                           const EvaluationSummary& s, const std::vector<double>& scores,
                                           const std::vector<int>& labels) {
  nlohmann::ordered_json j;
  j["arch"] = to_string(arch);
  j["dataset"] = dataset;
  j["split"] = split;
  j["n"] = labels.size();
  const auto summary = summary_json(s);
  for (auto it = summary.begin(); it != summary.end(); ++it) j[it.key()] = it.value();
  j["per_fold"] = nlohmann::ordered_json::array();
  j["scores"] = scores;
  j["labels"] = labels;
  return j;
}

inline std::string roc_csv(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::ostringstream os;
  write_roc_csv(os, roc_curve(scores, labels));
  return os.str();
}

inline bool has_both_classes(const std::vector<int>& labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return pos > 0 && pos < labels.size();
}

inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const auto& r = h.epochs[e];
    os << e + 1 << ',' << num(r.train_loss) << ',' << num(r.train_accuracy) << ',' << num(r.val_loss) << ','
       << num(r.val_accuracy) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

struct PreprocessResult {
  nlohmann::ordered_json stats;
};

/// Writes cleaned.csv (space-joined tokens), vocab.txt and stats.json.
inline PreprocessResult cmd_preprocess(const RunConfig& cfg) {
  validate_paths(cfg, true);
  const PreparedCorpus pc = prepare_corpus(cfg);
  const Vocabulary vocab = build_vocab(pc.tokens, cfg.preprocess.min_freq);
  const auto dir = ensure_dir(cfg.out);

  Dataset cleaned = pc.dataset;
  std::size_t total = 0, longest = 0, truncated = 0, unknown = 0;
  for (std::size_t i = 0; i < pc.tokens.size(); ++i) {
    std::string joined;
    for (const auto& t : pc.tokens[i]) {
      joined += (joined.empty() ? "" : " ") + t;
      unknown += vocab.id(t) == Vocabulary::unk;
    }
    cleaned.documents[i].text = joined;
    total += pc.tokens[i].size();
    longest = std::max(longest, pc.tokens[i].size());
    truncated += pc.tokens[i].size() > cfg.hp.max_len;
  }
  std::ostringstream csv;
  write_csv(csv, cleaned, cfg.data.text_column, cfg.data.label_column);
  write_file(dir / "cleaned.csv", csv.str());
  std::ostringstream vs;
  vocab.save(vs);
  write_file(dir / "vocab.txt", vs.str());

  PreprocessResult r;
  auto& s = r.stats;
  s["dataset"] = pc.dataset.name;
  s["documents"] = pc.dataset.size();
  s["dropped_empty"] = pc.dropped_rows.size();
  s["dropped_rows"] = pc.dropped_rows;
  s["tokens_total"] = total;
  s["tokens_mean"] = static_cast<double>(total) / static_cast<double>(pc.tokens.size());
  s["tokens_max"] = longest;
  s["truncated_documents"] = truncated;
  s["max_len"] = cfg.hp.max_len;
  s["unknown_tokens"] = unknown;
  s["vocab_size"] = vocab.size();
  if (cfg.embeddings.empty()) {
    s["embedding_coverage"] = nullptr;
  } else {
    s["embedding_coverage"] = make_embeddings(cfg, vocab).coverage;
  }
  const ClassReport cr = class_report(pc.dataset);
  s["classes"] = {{"negatives", cr.negatives},
                  {"positives", cr.positives},
                  {"imbalance_ratio", json_number(cr.imbalance_ratio)}};
  write_file(dir / "stats.json", s.dump(2) + "\n");
  return r;
}

struct TrainResult {
  nlohmann::ordered_json metrics;
  TrainHistory history;
};

/// Stratified train/test split, optional validation carve-out from the
/// training part, fit, then held-out evaluation. Writes model.ckpt.json,
/// history.csv, metrics.json and roc.csv.
inline TrainResult cmd_train(const RunConfig& cfg) {
  validate_paths(cfg, true);
  cfg.hp.validate();
  const PreparedCorpus pc = prepare_corpus(cfg);
  const Vocabulary vocab = build_vocab(pc.tokens, cfg.preprocess.min_freq);
  const std::vector<TokenizedDoc> docs = encode_corpus(pc, vocab, cfg.hp.max_len);
  const std::vector<int> labels = labels_of(docs);
  require_both_classes(labels, "training");

  const IndexSplit outer = stratified_split(labels, cfg.test_fraction, derive_seed(cfg.seed, holdout_stream));
  std::span<const TokenizedDoc> all(docs);
  std::vector<TokenizedDoc> train = gather(all, outer.train), test = gather(all, outer.test), val;
  if (cfg.validation_fraction > 0) {
    const IndexSplit inner =
        stratified_split(labels_of(train), cfg.validation_fraction, derive_seed(cfg.seed, validation_stream));
    std::span<const TokenizedDoc> tr(train);
    val = gather(tr, inner.test);
    train = gather(tr, inner.train);
  }
  if (test.empty()) throw CorpusError("test split is empty; raise test_fraction or supply more documents");

  Rng rng = Rng::child(cfg.seed, model_stream);
  Model model = build_model(cfg.arch, cfg.hp, make_embeddings(cfg, vocab), rng);
  TrainResult r;
  r.history = fit(model, train, val, cfg.hp, rng);

  const std::vector<double> scores = positive_scores(model, test);
  const std::vector<int> test_labels = labels_of(test);
  const EvaluationSummary s = evaluate(scores, test_labels);
  r.metrics = metrics_json(cfg.arch, pc.dataset.name, "holdout", s, scores, test_labels);
  r.metrics["n_train"] = train.size();
  r.metrics["n_validation"] = val.size();
  r.metrics["epochs_run"] = r.history.epochs.size();
  r.metrics["best_epoch"] = r.history.best_epoch + 1;
  r.metrics["embedding_coverage"] = model.embedding.coverage;

  const auto dir = ensure_dir(cfg.out);
  save_checkpoint((dir / "model.ckpt.json").string(), model, vocab);
  write_file(dir / "history.csv", history_csv(r.history));
  write_file(dir / "metrics.json", r.metrics.dump(2) + "\n");
  if (has_both_classes(test_labels)) write_file(dir / "roc.csv", roc_csv(scores, test_labels));
  return r;
}

/// Scores every document of the data file with a saved checkpoint.
inline nlohmann::ordered_json cmd_evaluate(const RunConfig& cfg) {
  validate_paths(cfg, true);
  require_file(cfg.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const PreparedCorpus pc = prepare_corpus(cfg);
  const std::vector<TokenizedDoc> docs = encode_corpus(pc, ck.vocab, ck.model.hp.max_len);
  const std::vector<double> scores = positive_scores(ck.model, docs);
  const std::vector<int> labels = labels_of(docs);
  const auto m = metrics_json(ck.model.arch, pc.dataset.name, "full", evaluate(scores, labels), scores, labels);
  const auto dir = ensure_dir(cfg.out);
  write_file(dir / "metrics.json", m.dump(2) + "\n");
  if (has_both_classes(labels)) write_file(dir / "roc.csv", roc_csv(scores, labels));
  return m;
}

inline const std::vector<std::pair<std::string, double EvaluationSummary::*>>& summary_fields() {
  static const std::vector<std::pair<std::string, double EvaluationSummary::*>> fields{
      {"accuracy", &EvaluationSummary::accuracy},       {"precision", &EvaluationSummary::precision},
      {"recall", &EvaluationSummary::recall},           {"f1", &EvaluationSummary::f1},
      {"sensitivity", &EvaluationSummary::sensitivity}, {"specificity", &EvaluationSummary::specificity},
      {"fpr_eq4", &EvaluationSummary::fpr_eq4},         {"auc", &EvaluationSummary::auc}};
  return fields;
}

inline std::string crossval_csv(const CrossValidationResult& cv) {
  std::ostringstream os;
  os << "metric";
  for (std::size_t f = 0; f < cv.folds.size(); ++f) os << ",fold_" << f + 1;
  os << ",mean\n";
  for (const auto& [name, field] : summary_fields()) {
    os << name;
    for (const auto& f : cv.folds) os << ',' << format_double(f.summary.*field);
    os << ',' << format_double(cv.mean.*field) << '\n';
  }
  return os.str();
}

struct CrossValResult {
  CrossValidationResult cv;
  nlohmann::ordered_json metrics;
};

/// k-fold CV; writes crossval.csv, metrics.json (fold means, per_fold,
/// pooled out-of-fold scores) and roc.csv over the pooled scores.
inline CrossValResult cmd_crossval(const RunConfig& cfg) {
  validate_paths(cfg, true);
  cfg.hp.validate();
  const PreparedCorpus pc = prepare_corpus(cfg);
  const Vocabulary vocab = build_vocab(pc.tokens, cfg.preprocess.min_freq);
  const std::vector<TokenizedDoc> docs = encode_corpus(pc, vocab, cfg.hp.max_len);
  require_both_classes(labels_of(docs), "cross-validation");

  CvOptions o;
  o.k = cfg.folds;
  o.split_seed = cfg.seed;
  o.train_seed = derive_seed(cfg.seed, model_stream);
  o.validation_fraction = cfg.validation_fraction;
  CrossValResult r;
  r.cv = cross_validate(cfg.arch, cfg.hp, docs, make_embeddings(cfg, vocab), o);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& f : r.cv.folds) {
    scores.insert(scores.end(), f.scores.begin(), f.scores.end());
    labels.insert(labels.end(), f.labels.begin(), f.labels.end());
  }
  r.metrics = metrics_json(cfg.arch, pc.dataset.name, "cv", r.cv.mean, scores, labels);
  r.metrics["folds"] = cfg.folds;
  for (const auto& f : r.cv.folds) r.metrics["per_fold"].push_back(summary_json(f.summary));

  const auto dir = ensure_dir(cfg.out);
  write_file(dir / "crossval.csv", crossval_csv(r.cv));
  write_file(dir / "metrics.json", r.metrics.dump(2) + "\n");
  write_file(dir / "roc.csv", roc_csv(scores, labels));
  return r;
}

inline Grid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open grid file " + path);
  try {
    return parse_grid(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("grid file " + path + " is invalid: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError("grid file " + path + ": " + e.what());
  }
}

inline std::string grid_cell(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

struct GridSearchCommandResult {
  GridSearchResult search;
  RunConfig best;
};

/// Writes gridsearch.csv (one row per combination) and best_config.json, a
/// complete run config that `train` accepts.
inline GridSearchCommandResult cmd_gridsearch(const RunConfig& cfg) {
  validate_paths(cfg, true);
  const Grid grid = cfg.grid.empty() ? default_grid() : load_grid(cfg.grid);
  const PreparedCorpus pc = prepare_corpus(cfg);
  const Vocabulary vocab = build_vocab(pc.tokens, cfg.preprocess.min_freq);
  const std::vector<TokenizedDoc> docs = encode_corpus(pc, vocab, cfg.hp.max_len);
  require_both_classes(labels_of(docs), "grid search");

  GridOptions o;
  o.k = cfg.folds;
  o.seed = cfg.seed;
  o.validation_fraction = cfg.validation_fraction;
  o.jobs = cfg.jobs;
  GridSearchCommandResult r;
  r.search = grid_search(cfg.arch, cfg.hp, grid, docs, make_embeddings(cfg, vocab), o);
  r.best = cfg;
  r.best.hp = r.search.best_params();
  r.best.grid.clear();

  std::ostringstream os;
  std::vector<std::string> header{"index"};
  for (const auto& a : grid) header.push_back(a.name);
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    header.push_back("fold_" + std::to_string(f + 1) + "_accuracy");
    header.push_back("fold_" + std::to_string(f + 1) + "_f1");
  }
  for (const char* h : {"mean_accuracy", "mean_f1", "mean_auc", "best"}) header.emplace_back(h);
  write_csv_row(os, header);
  for (const GridRow& row : r.search.rows) {
    std::vector<std::string> cells{std::to_string(row.index)};
    for (const auto& a : grid) cells.push_back(grid_cell(row.assignment.at(a.name)));
    for (const auto& f : row.cv.folds) {
      cells.push_back(format_double(f.summary.accuracy));
      cells.push_back(format_double(f.summary.f1));
    }
    cells.push_back(format_double(row.cv.mean.accuracy));
    cells.push_back(format_double(row.cv.mean.f1));
    cells.push_back(format_double(row.cv.mean.auc));
    cells.push_back(row.index == r.search.best ? "1" : "0");
    write_csv_row(os, cells);
  }
  const auto dir = ensure_dir(cfg.out);
  write_file(dir / "gridsearch.csv", os.str());
  write_file(dir / "best_config.json", to_json(r.best).dump(2) + "\n");
  return r;
}

struct ReportRow {
  std::string model, dataset;
  double f1 = 0, accuracy = 0, auc = 0;
  std::string roc_file;  // empty when the run lacks one of the classes
};

inline std::string file_safe(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += (std::isalnum(c) || c == '-' || c == '_') ? static_cast<char>(c) : '_';
  return out.empty() ? "_" : out;
}

inline std::string report_table(const std::vector<ReportRow>& rows) {
  std::size_t wm = 5, wd = 7;
  for (const auto& r : rows) {
    wm = std::max(wm, r.model.size());
    wd = std::max(wd, r.dataset.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(wm)) << "Model" << "  " << std::setw(static_cast<int>(wd)) << "Dataset"
     << "  " << std::right << std::setw(6) << "F1" << "  " << std::setw(6) << "A" << "  " << std::setw(6) << "AUC"
     << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(wm)) << r.model << "  " << std::setw(static_cast<int>(wd))
       << r.dataset << "  " << std::right << std::setw(6) << r.f1 << "  " << std::setw(6) << r.accuracy << "  "
       << std::setw(6) << r.auc << '\n';
  return os.str();
}

/// Collects metrics files into report.csv / report.txt and writes one
/// roc_<model>_<dataset>.csv per run.
inline std::vector<ReportRow> cmd_report(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw UsageError("report needs at least one metrics file");
  const auto dir = ensure_dir(cfg.out);
  std::vector<ReportRow> rows;
  std::set<std::string> used;
  for (const auto& path : cfg.inputs) {
    require_file(path, "metrics file");
    std::ifstream in(path, std::ios::binary);
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(in);
      ReportRow row{m.at("arch").get<std::string>(), m.at("dataset").get<std::string>(), m.at("f1").get<double>(),
                    m.at("accuracy").get<double>(), m.at("auc").get<double>(), {}};
      const auto scores = m.at("scores").get<std::vector<double>>();
      const auto labels = m.at("labels").get<std::vector<int>>();
      if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
      if (has_both_classes(labels)) {
        std::string base = "roc_" + file_safe(row.model) + "_" + file_safe(row.dataset);
        std::string name = base + ".csv";
        for (int n = 2; used.contains(name); ++n) name = base + "_" + std::to_string(n) + ".csv";
        used.insert(name);
        write_file(dir / name, roc_csv(scores, labels));
        row.roc_file = name;
      }
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError("malformed metrics file " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw CorpusError("malformed metrics file " + path + ": " + e.what());
    }
  }
  std::ostringstream csv;
  write_csv_row(csv, {"model", "dataset", "F1", "A", "AUC"});
  for (const auto& r : rows)
    write_csv_row(csv, {r.model, r.dataset, format_double(r.f1), format_double(r.accuracy), format_double(r.auc)});
  write_file(dir / "report.csv", csv.str());
  write_file(dir / "report.txt", report_table(rows));
  return rows;
}

/// Writes a synthetic, separable corpus as `text,label` CSV.
inline void cmd_synth(std::size_t n, std::uint64_t seed, const std::string& path, const SynthSpec& spec = {}) {
  const Dataset ds = synth_corpus(n, spec, seed);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ostringstream os;
  write_csv(os, ds);
  write_file(path, os.str());
}

}  // namespace ursa
