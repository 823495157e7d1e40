#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "waml/common.hpp"
#include "waml/tensor.hpp"

namespace waml {

struct HeadConfig {
  int64_t layers = 3;
  double beta_init = 0.3;
  bool beta_trainable = true;
  double dropout_rate = 0.1;
  bool final_l2_norm = true;

  void validate() const {
    if (layers < 0) throw ConfigError("head.layers must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("head.dropout must lie in [0,1)");
    }
  }
};

// One residual feed-forward block: W1 expands d -> 4d, W2 contracts back,
// beta scales the normalized residual branch.
template <typename T>
struct FfnLayerParams {
  Tensor<T> w1;       // d x 4d
  Tensor<T> b1;       // 1 x 4d
  Tensor<T> w2;       // 4d x d
  Tensor<T> b2;       // 1 x d
  Tensor<T> ln_gain;  // 1 x d
  Tensor<T> ln_bias;  // 1 x d
  Tensor<T> beta;     // 1 x 1
};

// W1/W2 from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, gain one,
// beta at its configured start value.
template <typename T>
FfnLayerParams<T> init_ffn_layer(int64_t d, const HeadConfig& cfg, Rng& rng) {
  FfnLayerParams<T> p;
  p.w1 = Tensor<T>::zeros(d, 4 * d, true);
  p.b1 = Tensor<T>::zeros(1, 4 * d, true);
  p.w2 = Tensor<T>::zeros(4 * d, d, true);
  p.b2 = Tensor<T>::zeros(1, d, true);
  p.ln_gain = Tensor<T>::zeros(1, d, true);
  p.ln_bias = Tensor<T>::zeros(1, d, true);
  p.beta = Tensor<T>::scalar(static_cast<T>(cfg.beta_init), cfg.beta_trainable);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(4 * d));
  for (int64_t i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = static_cast<T>(rng.symmetric(s1));
  for (int64_t i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = static_cast<T>(rng.symmetric(s2));
  for (int64_t j = 0; j < d; ++j) p.ln_gain.data()[j] = T(1);
  return p;
}

namespace detail {

// Inverted dropout mask as a constant tensor; rows*cols entries drawn from
// the per-call seed so training batches are reproducible.
template <typename T>
Tensor<T> dropout_mask(int64_t rows, int64_t cols, double rate, uint64_t seed) {
  Tensor<T> mask = Tensor<T>::zeros(rows, cols);
  Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (int64_t i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.real() < rate ? T(0) : keep_scale;
  }
  return mask;
}

}  // namespace detail

// x -> x + beta * normalize(W2 gelu(LayerNorm(x) W1 + b1) + b2), with
// inverted dropout on the 4d hidden activation during training.
template <typename T>
Tensor<T> ffn_layer(Tape<T>& tape, const Tensor<T>& x, const FfnLayerParams<T>& p,
                    const HeadConfig& cfg, bool training, uint64_t dropout_seed) {
  Tensor<T> x1 = layer_norm(tape, x, p.ln_gain, p.ln_bias);
  Tensor<T> x2 = gelu(tape, add_row_broadcast(tape, matmul(tape, x1, p.w1), p.b1));
  if (training && cfg.dropout_rate > 0.0) {
    x2 = mul(tape, x2, detail::dropout_mask<T>(x2.rows(), x2.cols(), cfg.dropout_rate, dropout_seed));
  }
  Tensor<T> x3 = add_row_broadcast(tape, matmul(tape, x2, p.w2), p.b2);
  return add(tape, x, scale_by(tape, row_l2_normalize(tape, x3), p.beta));
}

// J sequential blocks, then the optional final output L2 normalization.
template <typename T>
Tensor<T> head_forward(Tape<T>& tape, const Tensor<T>& e0,
                       std::span<const FfnLayerParams<T>> layers, const HeadConfig& cfg,
                       bool training, uint64_t dropout_seed) {
  cfg.validate();
  if (static_cast<int64_t>(layers.size()) != cfg.layers) {
    throw ConfigError("head.layers does not match the parameter stack");
  }
  Tensor<T> e = e0;
  for (size_t j = 0; j < layers.size(); ++j) {
    e = ffn_layer(tape, e, layers[j], cfg, training, dropout_seed + j);
  }
  if (cfg.final_l2_norm) e = row_l2_normalize(tape, e);
  return e;
}

}  // namespace waml
