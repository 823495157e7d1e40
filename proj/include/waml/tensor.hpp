#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "waml/common.hpp"

namespace waml {

// Epsilon guard for L2 / layer normalization denominators.
template <typename T>
constexpr T norm_eps() {
  if constexpr (sizeof(T) == 8) {
    return static_cast<T>(1e-12);
  } else {
    return static_cast<T>(1e-6);
  }
}

template <typename T>
struct TensorStorage {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<T> values;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
};

// Dense 2-D tensor handle with shared storage. Ops never mutate their inputs;
// gradient buffers accumulate additively across backward passes.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int64_t rows, int64_t cols, bool requires_grad = false) {
    Tensor t;
    t.s_ = std::make_shared<TensorStorage<T>>();
    t.s_->rows = rows;
    t.s_->cols = cols;
    t.s_->values.assign(static_cast<size_t>(rows * cols), T(0));
    t.s_->requires_grad = requires_grad;
    if (requires_grad) t.s_->grad.assign(static_cast<size_t>(rows * cols), T(0));
    return t;
  }

  static Tensor from(int64_t rows, int64_t cols, std::vector<T> vals, bool requires_grad = false) {
    if (static_cast<int64_t>(vals.size()) != rows * cols) {
      throw DataError("tensor data length does not match shape");
    }
    Tensor t = zeros(rows, cols, requires_grad);
    t.s_->values = std::move(vals);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from(1, 1, {v}, requires_grad);
  }

  bool defined() const { return s_ != nullptr; }
  int64_t rows() const { return s_->rows; }
  int64_t cols() const { return s_->cols; }
  int64_t size() const { return s_->rows * s_->cols; }
  bool requires_grad() const { return s_->requires_grad; }

  T* data() { return s_->values.data(); }
  const T* data() const { return s_->values.data(); }
  std::vector<T>& values() { return s_->values; }
  const std::vector<T>& values() const { return s_->values; }

  T* grad() { return s_->grad.data(); }
  const T* grad() const { return s_->grad.data(); }

  T& at(int64_t r, int64_t c) { return s_->values[static_cast<size_t>(r * cols() + c)]; }
  T at(int64_t r, int64_t c) const { return s_->values[static_cast<size_t>(r * cols() + c)]; }

  T item() const {
    if (size() != 1) throw DataError("item() requires a 1x1 tensor");
    return s_->values[0];
  }

  void zero_grad() {
    if (s_->requires_grad) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

  std::shared_ptr<TensorStorage<T>> storage() const { return s_; }

 private:
  std::shared_ptr<TensorStorage<T>> s_;
};

// Reverse-mode tape. Records one closure per op in forward order; backward
// replays them in exact reverse order, then clears the tape.
template <typename T>
class Tape {
 public:
  bool recording() const { return enabled_; }
  void set_enabled(bool enabled) { enabled_ = enabled; }

  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  void backward(Tensor<T>& loss) {
    if (loss.size() != 1) throw NumericalError("backward requires a scalar (1x1) loss");
    if (loss.requires_grad()) {
      loss.grad()[0] += T(1);
      for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }
    clear();
  }

 private:
  std::vector<std::function<void()>> ops_;
  bool enabled_ = true;
};

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite value produced by ") + op);
    }
  }
}

template <typename T>
bool wants_grad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops. Summation order is fixed ascending-index everywhere so repeated runs
// are bit-identical.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) throw DataError("matmul: inner dimensions do not match");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(m, n, rec);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      const T av = pa[i * k + l];
      if (av == T(0)) continue;
      const T* brow = pb + l * n;
      T* orow = po + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  detail::check_finite(out, "matmul");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const int64_t m = a.rows(), k = a.cols(), n = b.cols();
      const T* g = out.grad();
      if (a.requires_grad()) {
        T* ga = a.grad();
        const T* pb = b.data();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t l = 0; l < k; ++l) {
            T acc = T(0);
            for (int64_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[l * n + j];
            ga[i * k + l] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        T* gb = b.grad();
        const T* pa = a.data();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t l = 0; l < k; ++l) {
            const T av = pa[i * k + l];
            if (av == T(0)) continue;
            for (int64_t j = 0; j < n; ++j) gb[l * n + j] += av * g[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

// a[m,k] x b[n,k]^T -> [m,n]; the similarity-matrix workhorse.
template <typename T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) throw DataError("matmul_nt: inner dimensions do not match");
  const int64_t m = a.rows(), k = a.cols(), n = b.rows();
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(m, n, rec);
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc = T(0);
      for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      out.data()[i * n + j] = acc;
    }
  }
  detail::check_finite(out, "matmul_nt");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const int64_t m = a.rows(), k = a.cols(), n = b.rows();
      const T* g = out.grad();
      if (a.requires_grad()) {
        T* ga = a.grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) {
            const T gv = g[i * n + j];
            if (gv == T(0)) continue;
            const T* brow = b.data() + j * k;
            for (int64_t l = 0; l < k; ++l) ga[i * k + l] += gv * brow[l];
          }
        }
      }
      if (b.requires_grad()) {
        T* gb = b.grad();
        for (int64_t i = 0; i < m; ++i) {
          const T* arow = a.data() + i * k;
          for (int64_t j = 0; j < n; ++j) {
            const T gv = g[i * n + j];
            if (gv == T(0)) continue;
            for (int64_t l = 0; l < k; ++l) gb[j * k + l] += gv * arow[l];
          }
        }
      }
    });
  }
  return out;
}

namespace detail {

template <typename T, typename Fwd, typename Bwd>
Tensor<T> elementwise_unary(Tape<T>& tape, const Tensor<T>& a, const char* name, Fwd fwd, Bwd bwd) {
  bool rec = wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = fwd(a.data()[i]);
  check_finite(out, name);
  if (rec) {
    tape.record([a = a, out, bwd]() mutable {
      T* ga = a.grad();
      const T* g = out.grad();
      for (int64_t i = 0; i < a.size(); ++i) ga[i] += g[i] * bwd(a.data()[i], out.data()[i]);
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("add: shape mismatch");
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  detail::check_finite(out, "add");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const T* g = out.grad();
      if (a.requires_grad()) {
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (int64_t i = 0; i < b.size(); ++i) b.grad()[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("sub: shape mismatch");
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  detail::check_finite(out, "sub");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const T* g = out.grad();
      if (a.requires_grad()) {
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (int64_t i = 0; i < b.size(); ++i) b.grad()[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("mul: shape mismatch");
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  detail::check_finite(out, "mul");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const T* g = out.grad();
      if (a.requires_grad()) {
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        for (int64_t i = 0; i < b.size(); ++i) b.grad()[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

// a[m,n] + row[1,n] broadcast over rows.
template <typename T>
Tensor<T> add_row_broadcast(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DataError("add_row_broadcast: row must be 1 x cols");
  bool rec = detail::wants_grad(tape, {&a, &row});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  const int64_t n = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    for (int64_t j = 0; j < n; ++j) out.data()[i * n + j] = a.data()[i * n + j] + row.data()[j];
  }
  detail::check_finite(out, "add_row_broadcast");
  if (rec) {
    tape.record([a = a, row = row, out]() mutable {
      const T* g = out.grad();
      const int64_t n = a.cols();
      if (a.requires_grad()) {
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i];
      }
      if (row.requires_grad()) {
        for (int64_t i = 0; i < a.rows(); ++i) {
          for (int64_t j = 0; j < n; ++j) row.grad()[j] += g[i * n + j];
        }
      }
    });
  }
  return out;
}

// s*a + c with constant coefficients.
template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& a, double s, double c) {
  const T ts = static_cast<T>(s);
  const T tc = static_cast<T>(c);
  return detail::elementwise_unary(
      tape, a, "affine", [ts, tc](T x) { return ts * x + tc; },
      [ts](T, T) { return ts; });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, double s) {
  return affine(tape, a, s, 0.0);
}

// Multiply by a trainable 1x1 scalar tensor.
template <typename T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& s) {
  if (s.size() != 1) throw DataError("scale_by: scalar must be 1x1");
  bool rec = detail::wants_grad(tape, {&a, &s});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  const T sv = s.data()[0];
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = sv * a.data()[i];
  detail::check_finite(out, "scale_by");
  if (rec) {
    tape.record([a = a, s = s, out]() mutable {
      const T* g = out.grad();
      if (a.requires_grad()) {
        const T sv = s.data()[0];
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i] * sv;
      }
      if (s.requires_grad()) {
        T acc = T(0);
        for (int64_t i = 0; i < a.size(); ++i) acc += g[i] * a.data()[i];
        s.grad()[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a) {
  return detail::elementwise_unary(
      tape, a, "sigmoid", [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
  return detail::elementwise_unary(
      tape, a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

// tanh-approximate GELU; the derivative is derived from the same approximation.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& a) {
  static constexpr T kSqrt2OverPi = static_cast<T>(0.7978845608028653558798921198687637);
  static constexpr T kCubic = static_cast<T>(0.044715);
  return detail::elementwise_unary(
      tape, a, "gelu",
      [](T x) {
        const T u = kSqrt2OverPi * (x + kCubic * x * x * x);
        return T(0.5) * x * (T(1) + std::tanh(u));
      },
      [](T x, T) {
        const T u = kSqrt2OverPi * (x + kCubic * x * x * x);
        const T t = std::tanh(u);
        const T du = kSqrt2OverPi * (T(1) + T(3) * kCubic * x * x);
        return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
      });
}

// Rows scaled to unit L2 norm; rows with norm <= eps are scaled by 1/eps,
// which maps exact zero rows to zero rows.
template <typename T>
Tensor<T> row_l2_normalize(Tape<T>& tape, const Tensor<T>& a, T eps = norm_eps<T>()) {
  if (eps <= T(0)) throw DataError("row_l2_normalize: eps must be positive");
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  const int64_t n = a.cols();
  std::vector<T> norms(static_cast<size_t>(a.rows()));
  for (int64_t i = 0; i < a.rows(); ++i) {
    T sq = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T v = a.data()[i * n + j];
      sq += v * v;
    }
    const T norm = std::max(std::sqrt(sq), eps);
    norms[static_cast<size_t>(i)] = norm;
    for (int64_t j = 0; j < n; ++j) out.data()[i * n + j] = a.data()[i * n + j] / norm;
  }
  detail::check_finite(out, "row_l2_normalize");
  if (rec) {
    tape.record([a = a, out, norms = std::move(norms), eps]() mutable {
      const int64_t n = a.cols();
      T* ga = a.grad();
      const T* g = out.grad();
      for (int64_t i = 0; i < a.rows(); ++i) {
        const T r = norms[static_cast<size_t>(i)];
        if (r <= eps) {
          // Inside the eps ball the map is linear: y = x / eps.
          for (int64_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] / r;
          continue;
        }
        T dot = T(0);
        for (int64_t j = 0; j < n; ++j) dot += a.data()[i * n + j] * g[i * n + j];
        for (int64_t j = 0; j < n; ++j) {
          ga[i * n + j] += g[i * n + j] / r - a.data()[i * n + j] * dot / (r * r * r);
        }
      }
    });
  }
  return out;
}

// Per-row standardization with biased variance, then affine gain/bias.
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = norm_eps<T>()) {
  const int64_t n = a.cols();
  if (n < 2) throw DataError("layer_norm: need at least 2 columns");
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw DataError("layer_norm: gain/bias must be 1 x cols");
  }
  bool rec = detail::wants_grad(tape, {&a, &gain, &bias});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), n, rec);
  std::vector<T> xhat(static_cast<size_t>(a.size()));
  std::vector<T> inv_std(static_cast<size_t>(a.rows()));
  for (int64_t i = 0; i < a.rows(); ++i) {
    T mean = T(0);
    for (int64_t j = 0; j < n; ++j) mean += a.data()[i * n + j];
    mean /= static_cast<T>(n);
    T var = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T d = a.data()[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < n; ++j) {
      const T xh = (a.data()[i * n + j] - mean) * is;
      xhat[static_cast<size_t>(i * n + j)] = xh;
      out.data()[i * n + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  detail::check_finite(out, "layer_norm");
  if (rec) {
    tape.record([a = a, gain = gain, bias = bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
      const int64_t n = a.cols();
      const T* g = out.grad();
      for (int64_t i = 0; i < a.rows(); ++i) {
        if (gain.requires_grad()) {
          for (int64_t j = 0; j < n; ++j) {
            gain.grad()[j] += g[i * n + j] * xhat[static_cast<size_t>(i * n + j)];
          }
        }
        if (bias.requires_grad()) {
          for (int64_t j = 0; j < n; ++j) bias.grad()[j] += g[i * n + j];
        }
        if (a.requires_grad()) {
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (int64_t j = 0; j < n; ++j) {
            const T dxh = g[i * n + j] * gain.data()[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat[static_cast<size_t>(i * n + j)];
          }
          const T is = inv_std[static_cast<size_t>(i)];
          for (int64_t j = 0; j < n; ++j) {
            const T dxh = g[i * n + j] * gain.data()[j];
            a.grad()[i * n + j] += is * (dxh - sum_dxhat / static_cast<T>(n) -
                                         xhat[static_cast<size_t>(i * n + j)] * sum_dxhat_xhat /
                                             static_cast<T>(n));
          }
        }
      }
    });
  }
  return out;
}

// Output row k = sum of input rows whose segment id is k; empty segments stay zero.
template <typename T>
Tensor<T> segment_sum(Tape<T>& tape, const Tensor<T>& a, const std::vector<int64_t>& segments,
                      int64_t n_out) {
  if (static_cast<int64_t>(segments.size()) != a.rows()) {
    throw DataError("segment_sum: one segment id per row required");
  }
  for (int64_t s : segments) {
    if (s < 0 || s >= n_out) throw DataError("segment_sum: segment index out of range");
  }
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(n_out, a.cols(), rec);
  const int64_t n = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    T* orow = out.data() + segments[static_cast<size_t>(i)] * n;
    const T* arow = a.data() + i * n;
    for (int64_t j = 0; j < n; ++j) orow[j] += arow[j];
  }
  detail::check_finite(out, "segment_sum");
  if (rec) {
    tape.record([a = a, out, segments]() mutable {
      const int64_t n = a.cols();
      for (int64_t i = 0; i < a.rows(); ++i) {
        const T* grow = out.grad() + segments[static_cast<size_t>(i)] * n;
        T* garow = a.grad() + i * n;
        for (int64_t j = 0; j < n; ++j) garow[j] += grow[j];
      }
    });
  }
  return out;
}

// Row copies in idx order; backward scatter-adds (duplicate indices accumulate).
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& a, const std::vector<int64_t>& idx) {
  for (int64_t i : idx) {
    if (i < 0 || i >= a.rows()) throw DataError("gather_rows: index out of range");
  }
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(static_cast<int64_t>(idx.size()), a.cols(), rec);
  const int64_t n = a.cols();
  for (size_t k = 0; k < idx.size(); ++k) {
    const T* arow = a.data() + idx[k] * n;
    T* orow = out.data() + static_cast<int64_t>(k) * n;
    for (int64_t j = 0; j < n; ++j) orow[j] = arow[j];
  }
  if (rec) {
    tape.record([a = a, out, idx]() mutable {
      const int64_t n = a.cols();
      for (size_t k = 0; k < idx.size(); ++k) {
        const T* grow = out.grad() + static_cast<int64_t>(k) * n;
        T* garow = a.grad() + idx[k] * n;
        for (int64_t j = 0; j < n; ++j) garow[j] += grow[j];
      }
    });
  }
  return out;
}

// Each row multiplied by a constant per-row factor.
template <typename T>
Tensor<T> row_scale(Tape<T>& tape, const Tensor<T>& a, const std::vector<T>& factors) {
  if (static_cast<int64_t>(factors.size()) != a.rows()) {
    throw DataError("row_scale: one factor per row required");
  }
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols(), rec);
  const int64_t n = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    const T f = factors[static_cast<size_t>(i)];
    for (int64_t j = 0; j < n; ++j) out.data()[i * n + j] = a.data()[i * n + j] * f;
  }
  detail::check_finite(out, "row_scale");
  if (rec) {
    tape.record([a = a, out, factors]() mutable {
      const int64_t n = a.cols();
      for (int64_t i = 0; i < a.rows(); ++i) {
        const T f = factors[static_cast<size_t>(i)];
        for (int64_t j = 0; j < n; ++j) a.grad()[i * n + j] += out.grad()[i * n + j] * f;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) throw DataError("concat_rows: column mismatch");
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(a.rows() + b.rows(), a.cols(), rec);
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const T* g = out.grad();
      if (a.requires_grad()) {
        for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (int64_t i = 0; i < b.size(); ++i) b.grad()[i] += g[a.size() + i];
      }
    });
  }
  return out;
}

// out[i,0] = dot(a[i,:], b[i,:]).
template <typename T>
Tensor<T> row_dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("row_dot: shape mismatch");
  bool rec = detail::wants_grad(tape, {&a, &b});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), 1, rec);
  const int64_t n = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    T acc = T(0);
    for (int64_t j = 0; j < n; ++j) acc += a.data()[i * n + j] * b.data()[i * n + j];
    out.data()[i] = acc;
  }
  detail::check_finite(out, "row_dot");
  if (rec) {
    tape.record([a = a, b = b, out]() mutable {
      const int64_t n = a.cols();
      const T* g = out.grad();
      for (int64_t i = 0; i < a.rows(); ++i) {
        if (a.requires_grad()) {
          for (int64_t j = 0; j < n; ++j) a.grad()[i * n + j] += g[i] * b.data()[i * n + j];
        }
        if (b.requires_grad()) {
          for (int64_t j = 0; j < n; ++j) b.grad()[i * n + j] += g[i] * a.data()[i * n + j];
        }
      }
    });
  }
  return out;
}

// out[i,0] = a[i, cols[i]].
template <typename T>
Tensor<T> take_per_row(Tape<T>& tape, const Tensor<T>& a, const std::vector<int64_t>& cols) {
  if (static_cast<int64_t>(cols.size()) != a.rows()) throw DataError("take_per_row: one column per row");
  for (int64_t c : cols) {
    if (c < 0 || c >= a.cols()) throw DataError("take_per_row: column out of range");
  }
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), 1, rec);
  for (int64_t i = 0; i < a.rows(); ++i) out.data()[i] = a.at(i, cols[static_cast<size_t>(i)]);
  if (rec) {
    tape.record([a = a, out, cols]() mutable {
      for (int64_t i = 0; i < a.rows(); ++i) {
        a.grad()[i * a.cols() + cols[static_cast<size_t>(i)]] += out.grad()[i];
      }
    });
  }
  return out;
}

// Row-wise log(sum(exp)) with the max-shift identity; excluded[i] names a
// column left out of row i's sum (-1 excludes nothing).
template <typename T>
Tensor<T> row_logsumexp_excluding(Tape<T>& tape, const Tensor<T>& a,
                                  const std::vector<int64_t>& excluded) {
  if (static_cast<int64_t>(excluded.size()) != a.rows()) {
    throw DataError("row_logsumexp_excluding: one excluded column per row");
  }
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(a.rows(), 1, rec);
  const int64_t n = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    const int64_t ex = excluded[static_cast<size_t>(i)];
    if (ex >= n) throw DataError("row_logsumexp_excluding: excluded column out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (int64_t j = 0; j < n; ++j) {
      if (j != ex && a.data()[i * n + j] > mx) mx = a.data()[i * n + j];
    }
    if (!std::isfinite(mx)) throw NumericalError("row_logsumexp_excluding: empty row sum");
    T acc = T(0);
    for (int64_t j = 0; j < n; ++j) {
      if (j != ex) acc += std::exp(a.data()[i * n + j] - mx);
    }
    out.data()[i] = mx + std::log(acc);
  }
  detail::check_finite(out, "row_logsumexp_excluding");
  if (rec) {
    tape.record([a = a, out, excluded]() mutable {
      const int64_t n = a.cols();
      for (int64_t i = 0; i < a.rows(); ++i) {
        const int64_t ex = excluded[static_cast<size_t>(i)];
        const T lse = out.data()[i];
        const T g = out.grad()[i];
        for (int64_t j = 0; j < n; ++j) {
          if (j == ex) continue;
          a.grad()[i * n + j] += g * std::exp(a.data()[i * n + j] - lse);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum_all(Tape<T>& tape, const Tensor<T>& a) {
  bool rec = detail::wants_grad(tape, {&a});
  Tensor<T> out = Tensor<T>::zeros(1, 1, rec);
  T acc = T(0);
  for (int64_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  out.data()[0] = acc;
  detail::check_finite(out, "sum_all");
  if (rec) {
    tape.record([a = a, out]() mutable {
      const T g = out.grad()[0];
      for (int64_t i = 0; i < a.size(); ++i) a.grad()[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_all(Tape<T>& tape, const Tensor<T>& a) {
  if (a.size() == 0) throw DataError("mean_all: empty tensor");
  return scale(tape, sum_all(tape, a), 1.0 / static_cast<double>(a.size()));
}

}  // namespace waml
