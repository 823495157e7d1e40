#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "waml/features.hpp"
#include "waml/model.hpp"

namespace waml {

// Final node embeddings, scored in double regardless of training precision.
struct EmbeddingTable {
  int64_t rows = 0;
  int64_t dim = 0;
  std::vector<double> data;  // row-major
  bool l2_normalized = false;

  std::span<const double> row(int64_t v) const {
    return {data.data() + v * dim, static_cast<size_t>(dim)};
  }
};

enum class EvalScope : uint8_t { Candidates = 0, AllProducts = 1 };

struct EvalConfig {
  int64_t k = 100;
  EvalScope scope = EvalScope::Candidates;
  bool filter_seen = false;

  void validate() const {
    if (k < 1) throw ConfigError("eval.k must be >= 1");
  }
};

struct SellerResult {
  int64_t seller;
  int64_t relevant;
  int64_t hits;
};

struct EvalReport {
  int64_t k = 0;
  double recall = 0.0;
  int64_t sellers_evaluated = 0;
  bool filter_seen = false;
  std::string scope;
  std::vector<SellerResult> per_seller;

  void save(const std::string& path, const std::string& config_echo = "") const;
};

// Inference-mode forward over every node (tape off, no dropout).
template <typename T>
EmbeddingTable encode_all(const HeteroGraph& g, const Tensor<T>& h0, const ModelParams<T>& params,
                          const WamlConfig& waml_cfg, const HeadConfig& head_cfg) {
  Tape<T> tape;
  tape.set_enabled(false);
  Tensor<T> e = model_forward(tape, g, h0, params, waml_cfg, head_cfg, false, 0);
  EmbeddingTable table;
  table.rows = e.rows();
  table.dim = e.cols();
  table.data.resize(static_cast<size_t>(e.size()));
  for (int64_t i = 0; i < e.size(); ++i) table.data[static_cast<size_t>(i)] = static_cast<double>(e.data()[i]);
  table.l2_normalized = head_cfg.final_l2_norm;
  return table;
}

// Exact top-k by dot product over the candidate list, descending score, ties
// broken by ascending product index. k beyond the candidate count returns the
// full ranking.
std::vector<int64_t> topk_products(const EmbeddingTable& table, int64_t seller,
                                   std::span<const int64_t> candidates, int64_t k);

// Mean per-seller recall:  |top-k  intersect  relevant| / |relevant|.
// Sellers without held-out edges are excluded from the aggregate.
EvalReport recall_at_k(const std::map<int64_t, std::vector<int64_t>>& predictions,
                       const std::vector<std::pair<uint32_t, uint32_t>>& held_out, int64_t k);

// Ranks products for every seller with held-out edges and scores recall.
// seen_edges, when filter_seen is set, removes a seller's known products from
// its ranking before scoring.
EvalReport evaluate_retrieval(const HeteroGraph& g, const EmbeddingTable& table,
                              const std::vector<std::pair<uint32_t, uint32_t>>& held_out,
                              const EvalConfig& cfg,
                              const std::vector<std::pair<uint32_t, uint32_t>>& seen_edges = {});

// Embedding export in the WAMLEMB1 content-vector format (raw id -> f32 row).
void export_embeddings(const std::string& path, const HeteroGraph& g, const EmbeddingTable& table);

}  // namespace waml
