#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "waml/graph.hpp"
#include "waml/tensor.hpp"

namespace waml {

enum class Aggregator : uint8_t { Waml = 0, LightGcnSum = 1 };
enum class AlphaMode : uint8_t { Fixed = 0, TrainableLogistic = 1 };

struct WamlConfig {
  int64_t layers = 5;
  std::vector<double> alphas = {0.4, 0.45, 0.5, 0.6, 0.7};
  AlphaMode alpha_mode = AlphaMode::Fixed;
  Aggregator aggregator = Aggregator::Waml;
  // Disables the self/neighbor L2 steps; exists for the ablation ladder only.
  bool l2_normalize = true;

  void validate() const {
    if (layers < 0) throw ConfigError("waml.layers must be >= 0");
    if (static_cast<int64_t>(alphas.size()) != layers) {
      throw ConfigError("waml.alphas must list exactly waml.layers values");
    }
    for (double a : alphas) {
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("waml.alphas entries must lie in [0,1]");
    }
  }
};

// Flattened neighbor gather/scatter derived once per graph.
template <typename T>
struct ConvPlan {
  std::vector<int64_t> gather_idx;  // neighbor id per adjacency entry
  std::vector<int64_t> segments;    // owning node per adjacency entry
  std::vector<T> inv_sqrt_degree;   // 0 for isolated nodes

  explicit ConvPlan(const HeteroGraph& g) {
    const auto& adj = g.csr_neighbors();
    gather_idx.reserve(adj.size());
    segments.reserve(adj.size());
    for (int64_t v = 0; v < g.node_count(); ++v) {
      for (uint32_t u : g.neighbors(v)) {
        gather_idx.push_back(static_cast<int64_t>(u));
        segments.push_back(v);
      }
    }
    inv_sqrt_degree.resize(static_cast<size_t>(g.node_count()));
    for (int64_t v = 0; v < g.node_count(); ++v) {
      const int64_t deg = g.degree(v);
      inv_sqrt_degree[static_cast<size_t>(v)] =
          deg == 0 ? T(0) : T(1) / std::sqrt(static_cast<T>(deg));
    }
  }
};

namespace detail {

// Degree-scaled neighbor sum shared by both aggregators.
template <typename T>
Tensor<T> neighbor_sum(Tape<T>& tape, const Tensor<T>& h, const ConvPlan<T>& plan) {
  Tensor<T> gathered = gather_rows(tape, h, plan.gather_idx);
  Tensor<T> summed = segment_sum(tape, gathered, plan.segments, h.rows());
  return row_scale(tape, summed, plan.inv_sqrt_degree);
}

}  // namespace detail

// One convolution layer with fixed alpha. Steps, in order: L2-normalize the
// node features, sum normalized neighbor features, scale by 1/sqrt(degree),
// L2-normalize the neighbor term, then mix with weight alpha. Isolated nodes
// get a zero neighbor term, so their output is alpha * normalized(h).
template <typename T>
Tensor<T> waml_layer(Tape<T>& tape, const Tensor<T>& h, const ConvPlan<T>& plan, double alpha,
                     bool l2_normalize = true) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  Tensor<T> self = l2_normalize ? row_l2_normalize(tape, h) : h;
  Tensor<T> nb = detail::neighbor_sum(tape, self, plan);
  if (l2_normalize) nb = row_l2_normalize(tape, nb);
  return add(tape, scale(tape, self, alpha), scale(tape, nb, 1.0 - alpha));
}

// Same layer with a trainable alpha given as a 1x1 tensor in [0,1].
template <typename T>
Tensor<T> waml_layer(Tape<T>& tape, const Tensor<T>& h, const ConvPlan<T>& plan,
                     const Tensor<T>& alpha, bool l2_normalize = true) {
  Tensor<T> self = l2_normalize ? row_l2_normalize(tape, h) : h;
  Tensor<T> nb = detail::neighbor_sum(tape, self, plan);
  if (l2_normalize) nb = row_l2_normalize(tape, nb);
  Tensor<T> one_minus = affine(tape, alpha, -1.0, 1.0);
  return add(tape, scale_by(tape, self, alpha), scale_by(tape, nb, one_minus));
}

// Neighbor sum with only the 1/sqrt(degree) scaling; no self term, no L2.
template <typename T>
Tensor<T> lightgcn_layer(Tape<T>& tape, const Tensor<T>& h, const ConvPlan<T>& plan) {
  return detail::neighbor_sum(tape, h, plan);
}

// K sequential layers; each layer consumes the previous layer's output.
// alpha_params supplies logits when alpha_mode is TrainableLogistic.
// trace, when given, retains h^0 .. h^K.
template <typename T>
Tensor<T> waml_stack(Tape<T>& tape, const Tensor<T>& h0, const HeteroGraph& g,
                     const WamlConfig& cfg, std::span<const Tensor<T>> alpha_params = {},
                     std::vector<Tensor<T>>* trace = nullptr) {
  cfg.validate();
  if (cfg.alpha_mode == AlphaMode::TrainableLogistic &&
      static_cast<int64_t>(alpha_params.size()) != cfg.layers) {
    throw ConfigError("trainable alpha mode requires one logit per layer");
  }
  if (h0.rows() != g.node_count()) throw DataError("h0 row count does not match graph");
  ConvPlan<T> plan(g);
  Tensor<T> h = h0;
  if (trace) {
    trace->clear();
    trace->push_back(h);
  }
  for (int64_t i = 0; i < cfg.layers; ++i) {
    if (cfg.aggregator == Aggregator::LightGcnSum) {
      h = lightgcn_layer(tape, h, plan);
    } else if (cfg.alpha_mode == AlphaMode::TrainableLogistic) {
      Tensor<T> alpha = sigmoid(tape, alpha_params[static_cast<size_t>(i)]);
      h = waml_layer(tape, h, plan, alpha, cfg.l2_normalize);
    } else {
      h = waml_layer(tape, h, plan, cfg.alphas[static_cast<size_t>(i)], cfg.l2_normalize);
    }
    if (trace) trace->push_back(h);
  }
  return h;
}

}  // namespace waml
