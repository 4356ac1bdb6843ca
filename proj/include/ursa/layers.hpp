#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ursa/param.hpp"
#include "ursa/tensor.hpp"

namespace ursa {

/// Glorot-uniform init: U[-s, s], s = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rand_uniform(rng, std::move(shape), -s, s);
}

// ---------------------------------------------------------------------------
// LSTM

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, cell = 3 };

/// Gate weights are stored fused: column block g of `w`, `u` and `b` holds
/// gate g in the order input, forget, output, cell candidate.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Param w;  // [d_in x 4h]
  Param u;  // [h x 4h]
  Param b;  // [4h]

  static LstmParams init(std::size_t input_dim, std::size_t hidden, Rng& rng, const std::string& prefix = "lstm") {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    Tensor w({input_dim, 4 * hidden});
    Tensor u({hidden, 4 * hidden});
    // Each gate block is its own d_in x h (resp. h x h) matrix for the fan computation.
    for (std::size_t g = 0; g < 4; ++g) {
      Tensor wg = glorot_uniform(rng, {input_dim, hidden}, input_dim, hidden);
      Tensor ug = glorot_uniform(rng, {hidden, hidden}, hidden, hidden);
      for (std::size_t r = 0; r < input_dim; ++r)
        for (std::size_t c = 0; c < hidden; ++c) w(r, g * hidden + c) = wg(r, c);
      for (std::size_t r = 0; r < hidden; ++r)
        for (std::size_t c = 0; c < hidden; ++c) u(r, g * hidden + c) = ug(r, c);
    }
    Tensor b({4 * hidden});
    for (std::size_t c = 0; c < hidden; ++c) b[hidden + c] = 1.0;
    p.w = Param(prefix + ".w", std::move(w));
    p.u = Param(prefix + ".u", std::move(u));
    p.b = Param(prefix + ".b", std::move(b), /*weight_decay=*/false);
    return p;
  }

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden, const std::string& prefix = "lstm") {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.w = Param(prefix + ".w", Tensor({input_dim, 4 * hidden}));
    p.u = Param(prefix + ".u", Tensor({hidden, 4 * hidden}));
    p.b = Param(prefix + ".b", Tensor({4 * hidden}), false);
    return p;
  }

  Tensor input_weights(Gate g) const { return block(w.value, g); }
  Tensor recurrent_weights(Gate g) const { return block(u.value, g); }

  std::vector<Param*> parameters() { return {&w, &u, &b}; }

 private:
  Tensor block(const Tensor& m, Gate g) const {
    Tensor out({m.rows(), hidden});
    const std::size_t off = static_cast<std::size_t>(g) * hidden;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < hidden; ++c) out(r, c) = m(r, off + c);
    return out;
  }
};

struct LstmCache {
  Tensor x;                 // [T x d_in]
  std::size_t valid_len = 0;
  bool reverse = false;
  // Indexed by processing step s (position of step s is pos(s)).
  std::vector<double> gates;  // [L x 4h] post-activation i, f, o, g
  std::vector<double> cells;  // [L x h]
  std::vector<double> tanh_cells;
  std::vector<double> hs;     // [L x h]

  std::size_t pos(std::size_t s) const { return reverse ? valid_len - 1 - s : s; }
};

struct LstmOutput {
  Tensor states;  // [T x h]
  LstmCache cache;
};

/// Runs the recurrence over positions [0, valid_len) (reversed when
/// `reverse`). Rows at and past valid_len repeat row valid_len - 1.
inline LstmOutput lstm_forward(const LstmParams& p, const Tensor& x, std::size_t valid_len, bool reverse = false) {
  if (x.rank() != 2 || x.dim(1) != p.input_dim)
    throw ShapeError("lstm_forward: input " + shape_str(x.shape()) + " does not match input_dim " +
                     std::to_string(p.input_dim));
  const std::size_t T = x.rows(), h = p.hidden, H4 = 4 * h, d = p.input_dim;
  if (valid_len < 1 || valid_len > T) throw std::invalid_argument("lstm_forward: valid_len must be in [1, T]");

  LstmOutput out{Tensor({T, h}), LstmCache{}};
  LstmCache& c = out.cache;
  c.x = x;
  c.valid_len = valid_len;
  c.reverse = reverse;
  c.gates.assign(valid_len * H4, 0.0);
  c.cells.assign(valid_len * h, 0.0);
  c.tanh_cells.assign(valid_len * h, 0.0);
  c.hs.assign(valid_len * h, 0.0);

  const double* W = p.w.value.data();
  const double* U = p.u.value.data();
  const double* B = p.b.value.data();
  std::vector<double> a(H4);
  for (std::size_t s = 0; s < valid_len; ++s) {
    const std::size_t t = c.pos(s);
    std::copy(B, B + H4, a.begin());
    const double* xt = x.row_ptr(t);
    for (std::size_t k = 0; k < d; ++k) {
      const double xv = xt[k];
      if (xv == 0.0) continue;
      const double* wr = W + k * H4;
      for (std::size_t j = 0; j < H4; ++j) a[j] += xv * wr[j];
    }
    if (s > 0) {
      const double* hp = &c.hs[(s - 1) * h];
      for (std::size_t k = 0; k < h; ++k) {
        const double hv = hp[k];
        const double* ur = U + k * H4;
        for (std::size_t j = 0; j < H4; ++j) a[j] += hv * ur[j];
      }
    }
    double* g = &c.gates[s * H4];
    for (std::size_t j = 0; j < 3 * h; ++j) g[j] = sigmoid(a[j]);
    for (std::size_t j = 3 * h; j < H4; ++j) g[j] = std::tanh(a[j]);
    double* cs = &c.cells[s * h];
    double* tc = &c.tanh_cells[s * h];
    double* hs = &c.hs[s * h];
    const double* cprev = s > 0 ? &c.cells[(s - 1) * h] : nullptr;
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = g[j], fg = g[h + j], og = g[2 * h + j], cg = g[3 * h + j];
      cs[j] = ig * cg + (cprev ? fg * cprev[j] : 0.0);
      tc[j] = std::tanh(cs[j]);
      hs[j] = og * tc[j];
    }
    std::copy(hs, hs + h, out.states.row_ptr(t));
  }
  for (std::size_t t = valid_len; t < T; ++t)
    std::copy(out.states.row_ptr(valid_len - 1), out.states.row_ptr(valid_len - 1) + h, out.states.row_ptr(t));
  return out;
}

/// BPTT. Accumulates into p's gradients and returns d(loss)/d(x).
inline Tensor lstm_backward(LstmParams& p, const LstmCache& c, const Tensor& dstates) {
  const std::size_t T = c.x.rows(), h = p.hidden, H4 = 4 * h, d = p.input_dim, L = c.valid_len;
  if (dstates.rank() != 2 || dstates.rows() != T || dstates.dim(1) != h)
    throw ShapeError("lstm_backward: gradient " + shape_str(dstates.shape()) + " does not match states");
  std::vector<double> dH(dstates.storage());
  for (std::size_t t = L; t < T; ++t)
    for (std::size_t j = 0; j < h; ++j) dH[(L - 1) * h + j] += dH[t * h + j];

  Tensor dx({T, d});
  const double* W = p.w.value.data();
  const double* U = p.u.value.data();
  double* dW = p.w.grad.data();
  double* dU = p.u.grad.data();
  double* dB = p.b.grad.data();
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(H4), dh(h);
  for (std::size_t s = L; s-- > 0;) {
    const std::size_t t = c.pos(s);
    const double* g = &c.gates[s * H4];
    const double* tc = &c.tanh_cells[s * h];
    const double* cprev = s > 0 ? &c.cells[(s - 1) * h] : nullptr;
    const double* hprev = s > 0 ? &c.hs[(s - 1) * h] : nullptr;
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = g[j], fg = g[h + j], og = g[2 * h + j], cg = g[3 * h + j];
      const double dhj = dH[t * h + j] + dh_next[j];
      const double dgo = dhj * tc[j];
      const double dc = dhj * og * (1.0 - tc[j] * tc[j]) + dc_next[j];
      const double dgi = dc * cg;
      const double dgf = cprev ? dc * cprev[j] : 0.0;
      const double dgc = dc * ig;
      dc_next[j] = dc * fg;
      da[j] = dgi * ig * (1.0 - ig);
      da[h + j] = dgf * fg * (1.0 - fg);
      da[2 * h + j] = dgo * og * (1.0 - og);
      da[3 * h + j] = dgc * (1.0 - cg * cg);
    }
    const double* xt = c.x.row_ptr(t);
    double* dxt = dx.row_ptr(t);
    for (std::size_t k = 0; k < d; ++k) {
      const double xv = xt[k];
      double* dwr = dW + k * H4;
      const double* wr = W + k * H4;
      double acc = 0.0;
      for (std::size_t j = 0; j < H4; ++j) {
        dwr[j] += xv * da[j];
        acc += wr[j] * da[j];
      }
      dxt[k] = acc;
    }
    for (std::size_t j = 0; j < H4; ++j) dB[j] += da[j];
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    if (hprev) {
      for (std::size_t k = 0; k < h; ++k) {
        const double hv = hprev[k];
        double* dur = dU + k * H4;
        const double* ur = U + k * H4;
        double acc = 0.0;
        for (std::size_t j = 0; j < H4; ++j) {
          dur[j] += hv * da[j];
          acc += ur[j] * da[j];
        }
        dh_next[k] = acc;
      }
    }
  }
  return dx;
}

struct BiLstmCache {
  LstmCache fwd, bwd;
};

struct BiLstmOutput {
  Tensor states;  // [T x 2h], row t = [h_fwd_t ; h_bwd_t]
  BiLstmCache cache;
};

inline BiLstmOutput bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Tensor& x,
                                   std::size_t valid_len) {
  if (fwd.hidden != bwd.hidden)
    throw ShapeError("bilstm_forward: hidden sizes differ (" + std::to_string(fwd.hidden) + " vs " +
                     std::to_string(bwd.hidden) + ")");
  LstmOutput f = lstm_forward(fwd, x, valid_len, false);
  LstmOutput b = lstm_forward(bwd, x, valid_len, true);
  const std::size_t T = x.rows(), h = fwd.hidden;
  Tensor out({T, 2 * h});
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(f.states.row_ptr(t), f.states.row_ptr(t) + h, out.row_ptr(t));
    std::copy(b.states.row_ptr(t), b.states.row_ptr(t) + h, out.row_ptr(t) + h);
  }
  return {std::move(out), {std::move(f.cache), std::move(b.cache)}};
}

inline BiLstmOutput bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Tensor& x) {
  return bilstm_forward(fwd, bwd, x, x.rows());
}

inline Tensor bilstm_backward(LstmParams& fwd, LstmParams& bwd, const BiLstmCache& c, const Tensor& dstates) {
  const std::size_t T = dstates.rows(), h = fwd.hidden;
  Tensor df({T, h}), db({T, h});
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(dstates.row_ptr(t), dstates.row_ptr(t) + h, df.row_ptr(t));
    std::copy(dstates.row_ptr(t) + h, dstates.row_ptr(t) + 2 * h, db.row_ptr(t));
  }
  Tensor dx = lstm_backward(fwd, c.fwd, df);
  Tensor dxb = lstm_backward(bwd, c.bwd, db);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Convolution over time

enum class Activation { relu, identity };

/// Parallel 1-D filter banks, one per width. A width-k kernel spans k
/// consecutive rows and the full feature dimension.
struct ConvFilterBank {
  std::vector<std::size_t> widths;
  std::size_t input_dim = 0;
  std::size_t filters = 0;
  Activation activation = Activation::relu;
  std::vector<Param> kernels;  // per width: [k x D x F]
  std::vector<Param> biases;   // per width: [F]

  static ConvFilterBank init(std::vector<std::size_t> widths, std::size_t input_dim, std::size_t filters, Rng& rng,
                             Activation act = Activation::relu, const std::string& prefix = "conv") {
    if (widths.empty() || filters == 0) throw std::invalid_argument("conv bank needs at least one width and filter");
    ConvFilterBank bank;
    bank.widths = std::move(widths);
    bank.input_dim = input_dim;
    bank.filters = filters;
    bank.activation = act;
    for (std::size_t k : bank.widths) {
      if (k == 0) throw std::invalid_argument("filter widths must be positive");
      const std::string tag = prefix + ".k" + std::to_string(k);
      bank.kernels.emplace_back(tag + ".w", glorot_uniform(rng, {k, input_dim, filters}, k * input_dim, filters));
      bank.biases.emplace_back(tag + ".b", Tensor({filters}), false);
    }
    return bank;
  }

  std::size_t max_width() const { return *std::max_element(widths.begin(), widths.end()); }

  std::vector<Param*> parameters() {
    std::vector<Param*> out;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out.push_back(&kernels[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }
};

struct ConvCache {
  Tensor x;
  std::vector<Tensor> maps;  // post-activation, per width
};

/// Feature maps [(T - k + 1) x F] per width. `max_windows` (0 = all) limits
/// how many leading window positions are evaluated.
inline ConvCache conv_over_time(const ConvFilterBank& bank, const Tensor& x, std::size_t max_windows = 0) {
  if (x.rank() != 2 || x.dim(1) != bank.input_dim)
    throw ShapeError("conv_over_time: input " + shape_str(x.shape()) + " does not match input_dim " +
                     std::to_string(bank.input_dim));
  const std::size_t T = x.rows(), D = bank.input_dim, F = bank.filters;
  ConvCache cache;
  cache.x = x;
  for (std::size_t w = 0; w < bank.widths.size(); ++w) {
    const std::size_t k = bank.widths[w];
    if (T < k)
      throw ShapeError("conv_over_time: sequence length " + std::to_string(T) + " shorter than filter width " +
                       std::to_string(k));
    std::size_t rows = T - k + 1;
    if (max_windows) rows = std::min(rows, max_windows);
    Tensor map({rows, F});
    const double* K = bank.kernels[w].value.data();
    const double* B = bank.biases[w].value.data();
    const std::size_t span = k * D;
    for (std::size_t p = 0; p < rows; ++p) {
      double* o = map.row_ptr(p);
      std::copy(B, B + F, o);
      const double* win = x.data() + p * D;
      for (std::size_t q = 0; q < span; ++q) {
        const double xv = win[q];
        if (xv == 0.0) continue;
        const double* kr = K + q * F;
        for (std::size_t f = 0; f < F; ++f) o[f] += xv * kr[f];
      }
      if (bank.activation == Activation::relu)
        for (std::size_t f = 0; f < F; ++f) o[f] = relu(o[f]);
    }
    cache.maps.push_back(std::move(map));
  }
  return cache;
}

inline Tensor conv_backward(ConvFilterBank& bank, const ConvCache& cache, const std::vector<Tensor>& dmaps) {
  const std::size_t D = bank.input_dim, F = bank.filters;
  Tensor dx(cache.x.shape());
  std::vector<double> dz(F);
  for (std::size_t w = 0; w < bank.widths.size(); ++w) {
    const std::size_t k = bank.widths[w], span = k * D;
    const Tensor& map = cache.maps[w];
    const Tensor& dmap = dmaps.at(w);
    require_same_shape(map, dmap, "conv_backward");
    const double* K = bank.kernels[w].value.data();
    double* dK = bank.kernels[w].grad.data();
    double* dB = bank.biases[w].grad.data();
    for (std::size_t p = 0; p < map.rows(); ++p) {
      bool any = false;
      for (std::size_t f = 0; f < F; ++f) {
        double g = dmap(p, f);
        if (bank.activation == Activation::relu && map(p, f) <= 0.0) g = 0.0;
        dz[f] = g;
        any = any || g != 0.0;
      }
      if (!any) continue;
      for (std::size_t f = 0; f < F; ++f) dB[f] += dz[f];
      const double* win = cache.x.data() + p * D;
      double* dwin = dx.data() + p * D;
      for (std::size_t q = 0; q < span; ++q) {
        const double xv = win[q];
        const double* kr = K + q * F;
        double* dkr = dK + q * F;
        double acc = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
          dkr[f] += xv * dz[f];
          acc += kr[f] * dz[f];
        }
        dwin[q] += acc;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

enum class Pooling { max, mean };

struct PoolResult {
  Tensor pooled;                    // [F]
  std::vector<std::size_t> argmax;  // max mode only
  std::size_t valid_len = 0;
  std::size_t map_rows = 0;
  Pooling mode = Pooling::max;
};

/// Per-filter maximum over the first valid_len rows; ties go to the
/// smallest index.
inline PoolResult max_pool_over_time(const Tensor& map, std::size_t valid_len) {
  if (valid_len < 1) throw std::invalid_argument("max_pool_over_time: valid_len must be >= 1");
  if (valid_len > map.rows()) throw ShapeError("max_pool_over_time: valid_len exceeds map rows");
  const std::size_t F = map.dim(1);
  PoolResult r{Tensor({F}), std::vector<std::size_t>(F, 0), valid_len, map.rows(), Pooling::max};
  for (std::size_t f = 0; f < F; ++f) {
    r.pooled[f] = map(0, f);
    for (std::size_t p = 1; p < valid_len; ++p)
      if (map(p, f) > r.pooled[f]) {
        r.pooled[f] = map(p, f);
        r.argmax[f] = p;
      }
  }
  return r;
}

inline PoolResult mean_pool_over_time(const Tensor& map, std::size_t valid_len) {
  if (valid_len < 1) throw std::invalid_argument("mean_pool_over_time: valid_len must be >= 1");
  if (valid_len > map.rows()) throw ShapeError("mean_pool_over_time: valid_len exceeds map rows");
  const std::size_t F = map.dim(1);
  PoolResult r{Tensor({F}), {}, valid_len, map.rows(), Pooling::mean};
  for (std::size_t p = 0; p < valid_len; ++p)
    for (std::size_t f = 0; f < F; ++f) r.pooled[f] += map(p, f);
  for (std::size_t f = 0; f < F; ++f) r.pooled[f] /= static_cast<double>(valid_len);
  return r;
}

inline PoolResult pool_over_time(Pooling mode, const Tensor& map, std::size_t valid_len) {
  return mode == Pooling::max ? max_pool_over_time(map, valid_len) : mean_pool_over_time(map, valid_len);
}

inline Tensor pool_backward(const PoolResult& r, const Tensor& dpooled) {
  const std::size_t F = r.pooled.size();
  Tensor dmap({r.map_rows, F});
  for (std::size_t f = 0; f < F; ++f) {
    if (r.mode == Pooling::max) {
      dmap(r.argmax[f], f) = dpooled[f];
    } else {
      const double g = dpooled[f] / static_cast<double>(r.valid_len);
      for (std::size_t p = 0; p < r.valid_len; ++p) dmap(p, f) = g;
    }
  }
  return dmap;
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted dropout. `mask`, when given, receives the per-element
/// multiplier (0 or 1/(1-rate); all ones outside training).
inline Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training, Tensor* mask = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask) *mask = Tensor(x.shape(), 1.0);
    return x;
  }
  const double keep = 1.0 / (1.0 - rate);
  Tensor m(x.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < rate ? 0.0 : keep;
    out[i] *= m[i];
  }
  if (mask) *mask = std::move(m);
  return out;
}

// ---------------------------------------------------------------------------
// Dense + softmax

struct DenseParams {
  Param w;  // [in x classes]
  Param b;  // [classes]
  double l2_lambda = 0.0;

  static DenseParams init(std::size_t in, std::size_t classes, Rng& rng, const std::string& prefix = "dense") {
    DenseParams p;
    p.w = Param(prefix + ".w", glorot_uniform(rng, {in, classes}, in, classes));
    p.b = Param(prefix + ".b", Tensor({classes}), false);
    return p;
  }

  static DenseParams zeros(std::size_t in, std::size_t classes, const std::string& prefix = "dense") {
    DenseParams p;
    p.w = Param(prefix + ".w", Tensor({in, classes}));
    p.b = Param(prefix + ".b", Tensor({classes}), false);
    return p;
  }

  std::size_t inputs() const { return w.value.rows(); }
  std::size_t classes() const { return w.value.dim(1); }
  std::vector<Param*> parameters() { return {&w, &b}; }
};

inline Tensor dense_logits(const DenseParams& p, const Tensor& x) {
  if (x.size() != p.inputs())
    throw ShapeError("dense: input of " + std::to_string(x.size()) + " values, layer expects " +
                     std::to_string(p.inputs()));
  const std::size_t C = p.classes();
  Tensor z = p.b.value;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xv = x[i];
    const double* wr = p.w.value.row_ptr(i);
    for (std::size_t j = 0; j < C; ++j) z[j] += xv * wr[j];
  }
  return z;
}

inline Tensor dense_softmax(const DenseParams& p, const Tensor& x) { return softmax(dense_logits(p, x)); }

inline Tensor dense_backward(DenseParams& p, const Tensor& x, const Tensor& dlogits) {
  const std::size_t C = p.classes();
  if (dlogits.size() != C) throw ShapeError("dense_backward: gradient size does not match classes");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double* wr = p.w.value.row_ptr(i);
    double* gr = p.w.grad.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      gr[j] += x[i] * dlogits[j];
      acc += wr[j] * dlogits[j];
    }
    dx[i] = acc;
  }
  for (std::size_t j = 0; j < C; ++j) p.b.grad[j] += dlogits[j];
  return dx;
}

// ---------------------------------------------------------------------------
// L2

/// Adds (lambda/2)·||W||² over decaying parameters and lambda·W to their
/// gradients. A row-sparse table contributes only its touched rows.
inline double l2_penalty(std::span<Param* const> params, double lambda) {
  if (lambda < 0) throw std::invalid_argument("l2 lambda must be nonnegative");
  if (lambda == 0) return 0.0;
  double sq = 0.0;
  for (Param* p : params) {
    if (!p->decay) continue;
    if (p->row_sparse) {
      const std::size_t c = p->value.cols();
      for (std::size_t r = 1; r < p->value.rows(); ++r) {
        if (!p->touched[r]) continue;
        const double* v = p->value.row_ptr(r);
        double* g = p->grad.row_ptr(r);
        for (std::size_t j = 0; j < c; ++j) {
          sq += v[j] * v[j];
          g[j] += lambda * v[j];
        }
      }
    } else {
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        sq += p->value[i] * p->value[i];
        p->grad[i] += lambda * p->value[i];
      }
    }
  }
  return 0.5 * lambda * sq;
}

}  // namespace ursa
