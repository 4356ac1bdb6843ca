#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ursa/embeddings.hpp"
#include "ursa/layers.hpp"
#include "ursa/textproc.hpp"

namespace ursa {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Architecture { bilstm, cnn, cnn_bilstm, bilstm_slmfcnn };

inline constexpr std::array<std::string_view, 4> architecture_tags = {"bilstm", "cnn", "cnn-bilstm",
                                                                      "bilstm-slmfcnn"};
inline constexpr std::array<Architecture, 4> all_architectures = {Architecture::bilstm, Architecture::cnn,
                                                                  Architecture::cnn_bilstm,
                                                                  Architecture::bilstm_slmfcnn};

inline std::string_view to_string(Architecture a) { return architecture_tags[static_cast<std::size_t>(a)]; }

inline Architecture parse_architecture(std::string_view tag) {
  for (std::size_t i = 0; i < architecture_tags.size(); ++i)
    if (architecture_tags[i] == tag) return static_cast<Architecture>(i);
  std::string msg = "unknown architecture '" + std::string(tag) + "'; valid tags:";
  for (auto t : architecture_tags) msg += " " + std::string(t);
  throw UsageError(msg);
}

struct HyperParams {
  double dropout_rate = 0.5;
  std::size_t batch_size = 32;
  double learning_rate = 2e-5;
  std::string activation = "softmax";
  std::vector<std::size_t> filter_widths{3, 4, 5};
  std::size_t filters_per_width = 100;
  std::size_t hidden_units = 150;
  double l2_lambda = 1e-4;
  std::size_t max_len = 400;
  std::size_t epochs = 20;
  std::size_t embedding_dim = 300;
  std::size_t cnn_width = 5;  // single width of the CNN and CNN-BiLSTM baselines
  Pooling pooling = Pooling::max;
  Activation conv_activation = Activation::relu;
  bool freeze_embeddings = false;
  std::size_t patience = 3;
  bool class_weights = false;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("hyperparameters: " + m); };
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (filter_widths.empty()) fail("filter_widths must be non-empty");
    if (!std::is_sorted(filter_widths.begin(), filter_widths.end())) fail("filter_widths must be sorted");
    if (filter_widths.front() < 1 || cnn_width < 1) fail("filter widths must be positive");
    if (filters_per_width < 1 || hidden_units < 1 || embedding_dim < 1) fail("layer sizes must be positive");
    if (max_len < 1) fail("max_len must be >= 1");
    if (l2_lambda < 0) fail("l2_lambda must be nonnegative");
    if (activation != "softmax") fail("only the softmax output activation is supported");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(Pooling, {{Pooling::max, "max"}, {Pooling::mean, "mean"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::relu, "relu"}, {Activation::identity, "identity"}})

inline void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = nlohmann::json{{"dropout_rate", hp.dropout_rate},
                     {"batch_size", hp.batch_size},
                     {"learning_rate", hp.learning_rate},
                     {"activation", hp.activation},
                     {"filter_widths", hp.filter_widths},
                     {"filters_per_width", hp.filters_per_width},
                     {"hidden_units", hp.hidden_units},
                     {"l2_lambda", hp.l2_lambda},
                     {"max_len", hp.max_len},
                     {"epochs", hp.epochs},
                     {"embedding_dim", hp.embedding_dim},
                     {"cnn_width", hp.cnn_width},
                     {"pooling", hp.pooling},
                     {"conv_activation", hp.conv_activation},
                     {"freeze_embeddings", hp.freeze_embeddings},
                     {"patience", hp.patience},
                     {"class_weights", hp.class_weights}};
}

/// Missing keys keep their current value; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, HyperParams& hp) {
  if (!j.is_object()) throw UsageError("hyperparameters must be an object");
  nlohmann::json known;
  to_json(known, hp);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw UsageError("unknown hyperparameter '" + it.key() + "'");
    // Enum mappings silently fall back to the first entry; check the string explicitly.
    if (it.key() == "pooling" && !(it.value() == "max" || it.value() == "mean"))
      throw UsageError("pooling must be 'max' or 'mean'");
    if (it.key() == "conv_activation" && !(it.value() == "relu" || it.value() == "identity"))
      throw UsageError("conv_activation must be 'relu' or 'identity'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("dropout_rate", hp.dropout_rate);
  get("batch_size", hp.batch_size);
  get("learning_rate", hp.learning_rate);
  get("activation", hp.activation);
  get("filter_widths", hp.filter_widths);
  get("filters_per_width", hp.filters_per_width);
  get("hidden_units", hp.hidden_units);
  get("l2_lambda", hp.l2_lambda);
  get("max_len", hp.max_len);
  get("epochs", hp.epochs);
  get("embedding_dim", hp.embedding_dim);
  get("cnn_width", hp.cnn_width);
  get("pooling", hp.pooling);
  get("conv_activation", hp.conv_activation);
  get("freeze_embeddings", hp.freeze_embeddings);
  get("patience", hp.patience);
  get("class_weights", hp.class_weights);
}

/// Sets one knob by name, e.g. set_hyperparam(hp, "dropout_rate", 0.6).
inline void set_hyperparam(HyperParams& hp, const std::string& name, const nlohmann::json& value) {
  from_json(nlohmann::json{{name, value}}, hp);
}

struct StageShape {
  std::string stage;
  Shape shape;
};

/// One of the four classifiers, with its parameters and a per-document
/// forward/backward pass. All sequence stages see only the valid prefix of a
/// document; conv windows that run past the last real token are dropped from
/// pooling, so trailing PAD never changes the output.
class Model {
 public:
  Architecture arch = Architecture::bilstm_slmfcnn;
  HyperParams hp;
  EmbeddingMatrix embedding;
  std::optional<LstmParams> fwd, bwd;
  std::optional<ConvFilterBank> conv;
  DenseParams dense;

  struct Trace {
    std::size_t rows = 0;  // embedded positions
    std::size_t valid = 0;
    std::optional<BiLstmCache> lstm;
    std::size_t lstm_rows = 0;
    std::size_t lstm_valid = 0;
    std::optional<ConvCache> conv;
    std::vector<PoolResult> pools;
    Tensor features;  // pooled or readout vector before dropout
    Tensor mask;
    Tensor dense_in;
    Tensor logits;
    Tensor probs;
  };

  std::size_t dense_inputs() const { return dense.inputs(); }

  /// Parameters the optimizer updates.
  std::vector<Param*> parameters() {
    std::vector<Param*> out;
    if (embedding.trainable) out.push_back(&embedding.weights);
    append_layers(out);
    return out;
  }

  /// Every tensor, frozen or not (for checkpoints).
  std::vector<Param*> all_parameters() {
    std::vector<Param*> out{&embedding.weights};
    append_layers(out);
    return out;
  }

  std::size_t parameter_count() const {
    auto& self = const_cast<Model&>(*this);
    std::size_t n = 0;
    for (Param* p : self.all_parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (Param* p : all_parameters()) p->zero_grad();
  }

  std::size_t min_doc_len() const {
    switch (arch) {
      case Architecture::bilstm_slmfcnn: return conv->max_width();
      case Architecture::cnn:
      case Architecture::cnn_bilstm: return hp.cnn_width;
      case Architecture::bilstm: return 1;
    }
    return 1;
  }

  /// Class probabilities for one document. Dropout is applied only when
  /// `training`, drawing from `rng`.
  Tensor forward(const TokenizedDoc& doc, bool training, Rng* rng, Trace* trace = nullptr) const {
    Trace local;
    Trace& tr = trace ? *trace : local;
    tr = Trace{};
    check_doc(doc);
    const std::size_t L = doc.true_len;
    const std::size_t h = hp.hidden_units;
    tr.valid = L;

    switch (arch) {
      case Architecture::bilstm_slmfcnn: {
        tr.rows = std::max(L, conv->max_width());
        Tensor x = lookup(embedding, doc.ids, tr.rows);
        BiLstmOutput bi = bilstm_forward(*fwd, *bwd, x, L);
        tr.lstm_rows = tr.rows;
        tr.lstm_valid = L;
        tr.conv = conv_over_time(*conv, bi.states);
        tr.lstm = std::move(bi.cache);
        std::vector<Tensor> pooled;
        for (std::size_t w = 0; w < conv->widths.size(); ++w) {
          const std::size_t k = conv->widths[w];
          const std::size_t windows = L >= k ? L - k + 1 : 1;
          tr.pools.push_back(pool_over_time(hp.pooling, tr.conv->maps[w], windows));
          pooled.push_back(tr.pools.back().pooled);
        }
        tr.features = concat(pooled);  // flatten is the identity on this vector
        break;
      }
      case Architecture::cnn: {
        const std::size_t k = hp.cnn_width;
        tr.rows = std::max(L, k);
        tr.conv = conv_over_time(*conv, lookup(embedding, doc.ids, tr.rows));
        tr.pools.push_back(pool_over_time(hp.pooling, tr.conv->maps[0], L >= k ? L - k + 1 : 1));
        tr.features = tr.pools.back().pooled;
        break;
      }
      case Architecture::cnn_bilstm: {
        const std::size_t k = hp.cnn_width;
        tr.rows = std::max(L, k);
        tr.conv = conv_over_time(*conv, lookup(embedding, doc.ids, tr.rows));
        const Tensor& map = tr.conv->maps[0];
        tr.lstm_rows = map.rows();
        tr.lstm_valid = map.rows();
        BiLstmOutput bi = bilstm_forward(*fwd, *bwd, map, tr.lstm_valid);
        tr.features = readout(bi.states, tr.lstm_valid, h);
        tr.lstm = std::move(bi.cache);
        break;
      }
      case Architecture::bilstm: {
        tr.rows = L;
        BiLstmOutput bi = bilstm_forward(*fwd, *bwd, lookup(embedding, doc.ids, tr.rows), L);
        tr.lstm_rows = L;
        tr.lstm_valid = L;
        tr.features = readout(bi.states, L, h);
        tr.lstm = std::move(bi.cache);
        break;
      }
    }

    if (training) {
      if (!rng) throw std::invalid_argument("training forward pass needs an Rng for dropout");
      tr.dense_in = dropout(tr.features, hp.dropout_rate, *rng, true, &tr.mask);
    } else {
      tr.dense_in = tr.features;
      tr.mask = Tensor(tr.features.shape(), 1.0);
    }
    tr.logits = dense_logits(dense, tr.dense_in);
    tr.probs = softmax(tr.logits);
    return tr.probs;
  }

  /// Accumulates parameter gradients for d(loss)/d(logits).
  void backward(const TokenizedDoc& doc, const Trace& tr, const Tensor& dlogits) {
    Tensor dfeat = dense_backward(dense, tr.dense_in, dlogits);
    for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] *= tr.mask[i];
    const std::size_t h = hp.hidden_units;

    Tensor dx;
    switch (arch) {
      case Architecture::bilstm_slmfcnn: {
        std::vector<Tensor> dmaps;
        std::size_t off = 0;
        for (const PoolResult& r : tr.pools) {
          Tensor dp({r.pooled.size()});
          std::copy(dfeat.data() + off, dfeat.data() + off + dp.size(), dp.data());
          off += dp.size();
          dmaps.push_back(pool_backward(r, dp));
        }
        Tensor dstates = conv_backward(*conv, *tr.conv, dmaps);
        dx = bilstm_backward(*fwd, *bwd, *tr.lstm, dstates);
        break;
      }
      case Architecture::cnn: {
        dx = conv_backward(*conv, *tr.conv, {pool_backward(tr.pools[0], dfeat)});
        break;
      }
      case Architecture::cnn_bilstm: {
        Tensor dstates = readout_backward(dfeat, tr.lstm_rows, tr.lstm_valid, h);
        Tensor dmap = bilstm_backward(*fwd, *bwd, *tr.lstm, dstates);
        dx = conv_backward(*conv, *tr.conv, {dmap});
        break;
      }
      case Architecture::bilstm: {
        Tensor dstates = readout_backward(dfeat, tr.lstm_rows, tr.lstm_valid, h);
        dx = bilstm_backward(*fwd, *bwd, *tr.lstm, dstates);
        break;
      }
    }
    lookup_backward(embedding, doc.ids, dx);
  }

  /// Nominal output shape of every stage for a full-length document.
  std::vector<StageShape> stage_shapes() const {
    const std::size_t T = hp.max_len, d = embedding.dim(), h = hp.hidden_units, F = hp.filters_per_width;
    std::vector<StageShape> s{{"embedding", {T, d}}};
    auto conv_chain = [&](std::size_t len) {
      std::size_t total = 0;
      for (std::size_t k : conv->widths) s.push_back({"conv.k" + std::to_string(k), {len - k + 1, F}});
      for (std::size_t k : conv->widths) {
        s.push_back({"pool.k" + std::to_string(k), {F}});
        total += F;
      }
      return total;
    };
    std::size_t width = 0;
    switch (arch) {
      case Architecture::bilstm_slmfcnn:
        s.push_back({"bilstm", {T, 2 * h}});
        width = conv_chain(T);
        s.push_back({"concat", {width}});
        s.push_back({"flatten", {width}});
        break;
      case Architecture::cnn:
        width = conv_chain(T);
        break;
      case Architecture::cnn_bilstm:
        s.push_back({"conv.k" + std::to_string(hp.cnn_width), {T - hp.cnn_width + 1, F}});
        s.push_back({"bilstm", {T - hp.cnn_width + 1, 2 * h}});
        width = 2 * h;
        s.push_back({"readout", {width}});
        break;
      case Architecture::bilstm:
        s.push_back({"bilstm", {T, 2 * h}});
        width = 2 * h;
        s.push_back({"readout", {width}});
        break;
    }
    s.push_back({"dropout", {width}});
    s.push_back({"dense", {dense.classes()}});
    return s;
  }

 private:
  void append_layers(std::vector<Param*>& out) {
    if (fwd) {
      for (Param* p : fwd->parameters()) out.push_back(p);
      for (Param* p : bwd->parameters()) out.push_back(p);
    }
    if (conv)
      for (Param* p : conv->parameters()) out.push_back(p);
    for (Param* p : dense.parameters()) out.push_back(p);
  }

  void check_doc(const TokenizedDoc& doc) const {
    if (doc.true_len < 1 || doc.true_len > doc.ids.size())
      throw ShapeError("document true_len " + std::to_string(doc.true_len) + " outside [1, " +
                       std::to_string(doc.ids.size()) + "]");
    if (doc.ids.size() < min_doc_len())
      throw ShapeError("document of " + std::to_string(doc.ids.size()) + " positions is shorter than the " +
                       std::to_string(min_doc_len()) + " the model needs");
  }

  // [last valid forward state ; first backward state]
  static Tensor readout(const Tensor& states, std::size_t valid, std::size_t h) {
    Tensor out({2 * h});
    std::copy(states.row_ptr(valid - 1), states.row_ptr(valid - 1) + h, out.data());
    std::copy(states.row_ptr(0) + h, states.row_ptr(0) + 2 * h, out.data() + h);
    return out;
  }

  static Tensor readout_backward(const Tensor& dfeat, std::size_t rows, std::size_t valid, std::size_t h) {
    Tensor d({rows, 2 * h});
    std::copy(dfeat.data(), dfeat.data() + h, d.row_ptr(valid - 1));
    std::copy(dfeat.data() + h, dfeat.data() + 2 * h, d.row_ptr(0) + h);
    return d;
  }
};

namespace detail {

inline void check_build(const HyperParams& hp, const EmbeddingMatrix& emb, std::size_t min_len) {
  hp.validate();
  if (emb.dim() != hp.embedding_dim)
    throw DimensionError("embedding dimension " + std::to_string(emb.dim()) + " does not match embedding_dim " +
                         std::to_string(hp.embedding_dim));
  if (hp.max_len < min_len)
    throw std::invalid_argument("max_len " + std::to_string(hp.max_len) + " is shorter than the widest filter (" +
                                std::to_string(min_len) + ")");
}

inline Model make_model(Architecture arch, const HyperParams& hp, EmbeddingMatrix emb) {
  Model m;
  m.arch = arch;
  m.hp = hp;
  m.embedding = std::move(emb);
  m.embedding.trainable = !hp.freeze_embeddings;
  return m;
}

}  // namespace detail

/// embedding -> BiLSTM -> parallel conv banks -> max-pool each -> concat ->
/// flatten -> dropout -> dense softmax.
inline Model build_bilstm_slmfcnn(const HyperParams& hp, EmbeddingMatrix emb, Rng& rng) {
  detail::check_build(hp, emb, hp.filter_widths.empty() ? 1 : hp.filter_widths.back());
  Model m = detail::make_model(Architecture::bilstm_slmfcnn, hp, std::move(emb));
  const std::size_t d = hp.embedding_dim, h = hp.hidden_units;
  m.fwd = LstmParams::init(d, h, rng, "bilstm.fwd");
  m.bwd = LstmParams::init(d, h, rng, "bilstm.bwd");
  m.conv = ConvFilterBank::init(hp.filter_widths, 2 * h, hp.filters_per_width, rng, hp.conv_activation, "conv");
  m.dense = DenseParams::init(hp.filter_widths.size() * hp.filters_per_width, 2, rng);
  m.dense.l2_lambda = hp.l2_lambda;
  return m;
}

/// embedding -> BiLSTM -> [h_fwd(last) ; h_bwd(first)] -> dropout -> dense softmax.
inline Model build_bilstm(const HyperParams& hp, EmbeddingMatrix emb, Rng& rng) {
  detail::check_build(hp, emb, 1);
  Model m = detail::make_model(Architecture::bilstm, hp, std::move(emb));
  m.fwd = LstmParams::init(hp.embedding_dim, hp.hidden_units, rng, "bilstm.fwd");
  m.bwd = LstmParams::init(hp.embedding_dim, hp.hidden_units, rng, "bilstm.bwd");
  m.dense = DenseParams::init(2 * hp.hidden_units, 2, rng);
  m.dense.l2_lambda = hp.l2_lambda;
  return m;
}

/// embedding -> conv(cnn_width) -> max-pool -> dropout -> dense softmax.
inline Model build_cnn(const HyperParams& hp, EmbeddingMatrix emb, Rng& rng) {
  detail::check_build(hp, emb, hp.cnn_width);
  Model m = detail::make_model(Architecture::cnn, hp, std::move(emb));
  m.conv = ConvFilterBank::init({hp.cnn_width}, hp.embedding_dim, hp.filters_per_width, rng, hp.conv_activation,
                                "conv");
  m.dense = DenseParams::init(hp.filters_per_width, 2, rng);
  m.dense.l2_lambda = hp.l2_lambda;
  return m;
}

/// embedding -> conv(cnn_width) -> BiLSTM over the feature map -> readout ->
/// dropout -> dense softmax.
inline Model build_cnn_bilstm(const HyperParams& hp, EmbeddingMatrix emb, Rng& rng) {
  detail::check_build(hp, emb, hp.cnn_width);
  Model m = detail::make_model(Architecture::cnn_bilstm, hp, std::move(emb));
  m.conv = ConvFilterBank::init({hp.cnn_width}, hp.embedding_dim, hp.filters_per_width, rng, hp.conv_activation,
                                "conv");
  m.fwd = LstmParams::init(hp.filters_per_width, hp.hidden_units, rng, "bilstm.fwd");
  m.bwd = LstmParams::init(hp.filters_per_width, hp.hidden_units, rng, "bilstm.bwd");
  m.dense = DenseParams::init(2 * hp.hidden_units, 2, rng);
  m.dense.l2_lambda = hp.l2_lambda;
  return m;
}

inline Model build_model(Architecture arch, const HyperParams& hp, EmbeddingMatrix emb, Rng& rng) {
  switch (arch) {
    case Architecture::bilstm: return build_bilstm(hp, std::move(emb), rng);
    case Architecture::cnn: return build_cnn(hp, std::move(emb), rng);
    case Architecture::cnn_bilstm: return build_cnn_bilstm(hp, std::move(emb), rng);
    case Architecture::bilstm_slmfcnn: return build_bilstm_slmfcnn(hp, std::move(emb), rng);
  }
  throw UsageError("unknown architecture");
}

/// Eval-mode class probabilities.
inline Tensor predict(const Model& model, const TokenizedDoc& doc) { return model.forward(doc, false, nullptr); }

}  // namespace ursa
