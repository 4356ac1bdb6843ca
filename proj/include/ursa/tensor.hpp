#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ursa/rng.hpp"

namespace ursa {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles. Owns its storage; slicing copies.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor vec(std::initializer_list<double> v) { return Tensor({v.size()}, std::vector<double>(v)); }

  static Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> d;
    d.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix literal");
      d.insert(d.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(d));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 element access; column count taken from the last dimension.
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

  double at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
  double& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return rank() == 1 ? 1 : size() / shape_.at(0); }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }

  /// Copy of rows [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > rows()) throw ShapeError("row slice out of range for " + shape_str(shape_));
    Shape s = shape_;
    s[0] = end - begin;
    const std::size_t c = cols();
    return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * c, data_.begin() + end * c));
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    if (shape_size(s) != size()) throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return Tensor(std::move(s), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  void check_dims() const {
    if (shape_.empty()) throw ShapeError("tensor needs at least one dimension");
    for (std::size_t d : shape_)
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) throw ShapeError("index rank does not match " + shape_str(shape_));
    std::size_t off = 0, k = 0;
    for (std::size_t i : index) {
      if (i >= shape_[k]) throw ShapeError("index out of range for " + shape_str(shape_));
      off = off * shape_[k++] + i;
    }
    return off;
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.row_ptr(i);
    const double* ar = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

enum class ElementwiseOp { add, sub, hadamard, sigmoid, tanh, relu, scale };

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) { return x > 0 ? x : 0.0; }

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out = a;
  for (double& x : out.storage()) x = f(x);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F&& f) {
  require_same_shape(a, b, what);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return zip(a, b, "add", std::plus<>()); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", std::minus<>()); }
inline Tensor hadamard(const Tensor& a, const Tensor& b) { return zip(a, b, "hadamard", std::multiplies<>()); }
inline Tensor scale(const Tensor& a, double s) { return map(a, [s](double x) { return s * x; }); }
inline Tensor sigmoid(const Tensor& a) { return map(a, [](double x) { return sigmoid(x); }); }
inline Tensor tanh(const Tensor& a) { return map(a, [](double x) { return std::tanh(x); }); }
inline Tensor relu(const Tensor& a) { return map(a, [](double x) { return relu(x); }); }

/// Dispatching form. Binary kinds read `b`; `scale` reads `factor`.
inline Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b = nullptr, double factor = 1.0) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw std::invalid_argument("elementwise: binary op requires a second operand");
    return *b;
  };
  switch (op) {
    case ElementwiseOp::add: return add(a, need_b());
    case ElementwiseOp::sub: return sub(a, need_b());
    case ElementwiseOp::hadamard: return hadamard(a, need_b());
    case ElementwiseOp::sigmoid: return sigmoid(a);
    case ElementwiseOp::tanh: return tanh(a);
    case ElementwiseOp::relu: return relu(a);
    case ElementwiseOp::scale: return scale(a, factor);
  }
  throw std::invalid_argument("elementwise: unknown op");
}

inline void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double& x : v) z += (x = std::exp(x - mx));
  for (double& x : v) x /= z;
}

inline Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  Tensor out = logits;
  softmax_inplace(out.values());
  return out;
}

/// Concatenation along `axis`; every other dimension must agree.
inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis = 0) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const Tensor& t : parts) {
    bool ok = t.rank() == ref.size();
    for (std::size_t d = 0; ok && d < ref.size(); ++d)
      if (d != axis && t.dim(d) != ref[d]) ok = false;
    if (!ok) throw ShapeError("concat: incompatible shapes " + shape_str(ref) + " and " + shape_str(t.shape()));
    out_shape[axis] += t.dim(axis);
  }
  // outer = product of dims before axis; each part contributes a contiguous block per outer index
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= ref[d];
  std::vector<double> data;
  data.reserve(shape_size(out_shape));
  for (std::size_t o = 0; o < outer; ++o)
    for (const Tensor& t : parts) {
      const std::size_t block = t.size() / outer;
      data.insert(data.end(), t.storage().begin() + o * block, t.storage().begin() + (o + 1) * block);
    }
  return Tensor(std::move(out_shape), std::move(data));
}

inline Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("rand_uniform: empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  Tensor out(std::move(shape));
  for (double& x : out.storage()) x = rng.uniform(lo, hi);
  return out;
}

/// Central finite differences of a scalar function, one coordinate at a time.
template <typename F>
Tensor numeric_gradient(F&& f, const Tensor& x, double eps = 1e-4) {
  if (!(eps > 0)) throw std::invalid_argument("numeric_gradient: eps must be positive");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(std::as_const(probe));
    probe[i] = orig - eps;
    const double down = f(std::as_const(probe));
    probe[i] = orig;
    grad[i] = (up - down) / (2 * eps);
  }
  return grad;
}

}  // namespace ursa
