#pragma once

#include <unordered_map>

#include "waml/pipeline.hpp"
#include "waml/trainer.hpp"

namespace waml::detail {

// Maps the generator's raw ground-truth pairs onto graph indices. Candidates
// and sellers always survive reduction, so every pair resolves.
inline std::vector<IndexPair> truth_to_indices(const SynthDataset& data, const HeteroGraph& g) {
  std::vector<IndexPair> out;
  out.reserve(data.truth.size());
  for (auto& [s, p] : data.truth) {
    auto si = g.find(NodeType::Seller, s);
    auto pi = g.find(NodeType::Product, p);
    if (!si || !pi) throw DataError("ground-truth pair names a node missing from the graph");
    out.push_back({static_cast<uint32_t>(*si), static_cast<uint32_t>(*pi)});
  }
  return out;
}

template <typename T>
ExperimentResult run_synthetic_experiment_impl(const SynthDataset& data, const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  cfg.reduce.candidate_set = data.candidates;

  auto [graph, report] = reduce_pipeline(data.nodes, data.edges, cfg.reduce);

  ContentTable zeros(cfg.features.dim);
  const ContentTable& content =
      cfg.features.content_source == ContentSource::Zeros ? zeros : data.content;
  Tensor<T> h0 = init_h0<T>(graph, cfg.features, content);

  EdgeSplit split = split_edges(graph.edge_set(EdgeType::SellerProduct), cfg.train.split_ratios,
                                cfg.train.seed);
  ModelParams<T> params = init_model<T>(cfg.features.dim, cfg.waml, cfg.head, cfg.train.seed);
  TrainResult<T> trained =
      train(graph, h0, params, cfg.waml, cfg.head, cfg.train, split, cfg.eval);

  EmbeddingTable table = encode_all(graph, h0, trained.best_params, cfg.waml, cfg.head);

  ExperimentResult result;
  result.best_val_recall = trained.best_val_recall;
  result.epochs_run = static_cast<int64_t>(trained.log.size());
  if (!split.test.empty()) {
    result.test_recall = evaluate_retrieval(graph, table, split.test, cfg.eval, split.train).recall;
  }
  result.truth_recall =
      evaluate_retrieval(graph, table, truth_to_indices(data, graph), cfg.eval, split.train).recall;
  result.oracle = oracle_recall(data, cfg.eval.k);
  return result;
}

}  // namespace waml::detail
