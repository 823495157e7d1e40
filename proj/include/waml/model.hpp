#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "waml/encoder.hpp"
#include "waml/ffn.hpp"
#include "waml/graph.hpp"
#include "waml/tensor.hpp"

namespace waml {

// Everything the optimizer updates: FFN stacks plus the optional trainable
// alpha logits. The convolution itself is parameter free.
template <typename T>
struct ModelParams {
  std::vector<Tensor<T>> alpha_logits;  // 1x1 each; only in trainable alpha mode
  std::vector<FfnLayerParams<T>> ffn;

  std::vector<std::pair<std::string, Tensor<T>>> named() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    for (size_t i = 0; i < alpha_logits.size(); ++i) {
      out.emplace_back("alpha_logit." + std::to_string(i), alpha_logits[i]);
    }
    for (size_t j = 0; j < ffn.size(); ++j) {
      const std::string p = "ffn." + std::to_string(j) + ".";
      out.emplace_back(p + "w1", ffn[j].w1);
      out.emplace_back(p + "b1", ffn[j].b1);
      out.emplace_back(p + "w2", ffn[j].w2);
      out.emplace_back(p + "b2", ffn[j].b2);
      out.emplace_back(p + "ln_gain", ffn[j].ln_gain);
      out.emplace_back(p + "ln_bias", ffn[j].ln_bias);
      out.emplace_back(p + "beta", ffn[j].beta);
    }
    return out;
  }

  std::vector<Tensor<T>> trainable() const {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : named()) {
      if (t.requires_grad()) out.push_back(t);
    }
    return out;
  }

  void zero_grad() {
    for (auto& [name, t] : named()) {
      Tensor<T> tt = t;
      tt.zero_grad();
    }
  }

  ModelParams clone() const {
    ModelParams out;
    for (const auto& a : alpha_logits) {
      out.alpha_logits.push_back(Tensor<T>::from(1, 1, a.values(), a.requires_grad()));
    }
    auto copy = [](const Tensor<T>& t) {
      return Tensor<T>::from(t.rows(), t.cols(), t.values(), t.requires_grad());
    };
    for (const auto& l : ffn) {
      out.ffn.push_back({copy(l.w1), copy(l.b1), copy(l.w2), copy(l.b2), copy(l.ln_gain),
                         copy(l.ln_bias), copy(l.beta)});
    }
    return out;
  }
};

template <typename T>
ModelParams<T> init_model(int64_t dim, const WamlConfig& waml_cfg, const HeadConfig& head_cfg,
                          uint64_t seed) {
  waml_cfg.validate();
  head_cfg.validate();
  ModelParams<T> params;
  Rng rng(splitmix64(seed ^ 0x6D6F64656CULL));
  if (waml_cfg.alpha_mode == AlphaMode::TrainableLogistic) {
    for (double a : waml_cfg.alphas) {
      const double clamped = std::min(std::max(a, 1e-6), 1.0 - 1e-6);
      const double logit = std::log(clamped / (1.0 - clamped));
      params.alpha_logits.push_back(Tensor<T>::scalar(static_cast<T>(logit), true));
    }
  }
  for (int64_t j = 0; j < head_cfg.layers; ++j) {
    params.ffn.push_back(init_ffn_layer<T>(dim, head_cfg, rng));
  }
  return params;
}

// Full pipeline: h0 -> WAML stack -> FFN head. Inference callers disable the
// tape and pass training=false.
template <typename T>
Tensor<T> model_forward(Tape<T>& tape, const HeteroGraph& g, const Tensor<T>& h0,
                        const ModelParams<T>& params, const WamlConfig& waml_cfg,
                        const HeadConfig& head_cfg, bool training, uint64_t dropout_seed) {
  Tensor<T> hk = waml_stack(tape, h0, g, waml_cfg,
                            std::span<const Tensor<T>>(params.alpha_logits));
  return head_forward(tape, hk, std::span<const FfnLayerParams<T>>(params.ffn), head_cfg,
                      training, dropout_seed);
}

// --- checkpoint format -------------------------------------------------------
// WAMLCKPT, version u32, config echo, then named f32 parameter blobs.

namespace detail {
inline constexpr char kCkptMagic[8] = {'W', 'A', 'M', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCkptVersion = 1;
}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ModelParams<T>& params,
                     const std::string& config_echo) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_bytes(os, detail::kCkptMagic, 8);
  write_u32(os, detail::kCkptVersion);
  write_string(os, config_echo);
  auto named = params.named();
  write_u32(os, static_cast<uint32_t>(named.size()));
  for (auto& [name, t] : named) {
    write_string(os, name);
    write_u32(os, static_cast<uint32_t>(t.rows()));
    write_u32(os, static_cast<uint32_t>(t.cols()));
    for (int64_t i = 0; i < t.size(); ++i) write_f32(os, static_cast<float>(t.data()[i]));
  }
}

// Loads into a params struct already shaped by the config (echoed in the
// file); unknown names or shape drift are data errors.
template <typename T>
void load_checkpoint_into(const std::string& path, ModelParams<T>& params,
                          std::string* config_echo = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, detail::kCkptMagic, 8) != 0) {
    throw DataError("'" + path + "' is not a checkpoint");
  }
  if (read_u32(is) != detail::kCkptVersion) throw DataError("unsupported checkpoint version");
  std::string echo = read_string(is);
  if (config_echo) *config_echo = echo;

  auto named = params.named();
  uint32_t count = read_u32(is);
  if (count != named.size()) throw DataError("checkpoint parameter count does not match config");
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    if (name != named[i].first) throw DataError("unexpected checkpoint parameter '" + name + "'");
    Tensor<T>& t = named[i].second;
    uint32_t r = read_u32(is), c = read_u32(is);
    if (r != static_cast<uint32_t>(t.rows()) || c != static_cast<uint32_t>(t.cols())) {
      throw DataError("checkpoint shape mismatch for '" + name + "'");
    }
    for (int64_t k = 0; k < t.size(); ++k) t.data()[k] = static_cast<T>(read_f32(is));
  }
}

// Reads only the embedded config echo.
std::string checkpoint_config_echo(const std::string& path);

}  // namespace waml
