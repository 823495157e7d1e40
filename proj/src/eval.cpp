#include "waml/eval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace waml {

std::vector<int64_t> topk_products(const EmbeddingTable& table, int64_t seller,
                                   std::span<const int64_t> candidates, int64_t k) {
  if (k < 1) throw ConfigError("top-k requires k >= 1");
  if (seller < 0 || seller >= table.rows) throw DataError("seller index out of range");
  auto srow = table.row(seller);

  std::vector<std::pair<double, int64_t>> scored;
  scored.reserve(candidates.size());
  for (int64_t p : candidates) {
    if (p < 0 || p >= table.rows) throw DataError("candidate index out of range");
    auto prow = table.row(p);
    double dot = 0.0;
    for (int64_t j = 0; j < table.dim; ++j) dot += srow[static_cast<size_t>(j)] * prow[static_cast<size_t>(j)];
    scored.emplace_back(dot, p);
  }
  auto better = [](const std::pair<double, int64_t>& a, const std::pair<double, int64_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  const size_t take = std::min<size_t>(static_cast<size_t>(k), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<int64_t>(take), scored.end(), better);

  std::vector<int64_t> out;
  out.reserve(take);
  for (size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

EvalReport recall_at_k(const std::map<int64_t, std::vector<int64_t>>& predictions,
                       const std::vector<std::pair<uint32_t, uint32_t>>& held_out, int64_t k) {
  std::map<int64_t, std::unordered_set<int64_t>> relevant;
  for (auto [s, p] : held_out) relevant[static_cast<int64_t>(s)].insert(static_cast<int64_t>(p));

  EvalReport report;
  report.k = k;
  double total = 0.0;
  for (auto& [seller, rel] : relevant) {
    auto it = predictions.find(seller);
    if (it == predictions.end()) {
      throw DataError("no predictions for seller index " + std::to_string(seller));
    }
    int64_t hits = 0;
    int64_t rank = 0;
    for (int64_t p : it->second) {
      if (rank++ >= k) break;
      if (rel.count(p)) ++hits;
    }
    report.per_seller.push_back({seller, static_cast<int64_t>(rel.size()), hits});
    total += static_cast<double>(hits) / static_cast<double>(rel.size());
  }
  report.sellers_evaluated = static_cast<int64_t>(report.per_seller.size());
  report.recall = report.sellers_evaluated == 0 ? 0.0 : total / static_cast<double>(report.sellers_evaluated);
  return report;
}

EvalReport evaluate_retrieval(const HeteroGraph& g, const EmbeddingTable& table,
                              const std::vector<std::pair<uint32_t, uint32_t>>& held_out,
                              const EvalConfig& cfg,
                              const std::vector<std::pair<uint32_t, uint32_t>>& seen_edges) {
  cfg.validate();
  std::vector<int64_t> pool = cfg.scope == EvalScope::Candidates
                                  ? g.candidate_products()
                                  : g.nodes_of_type(NodeType::Product);
  if (pool.empty()) throw DataError("empty retrieval pool");

  std::map<int64_t, std::unordered_set<int64_t>> seen;
  if (cfg.filter_seen) {
    for (auto [s, p] : seen_edges) seen[static_cast<int64_t>(s)].insert(static_cast<int64_t>(p));
  }

  std::unordered_set<int64_t> sellers;
  for (auto [s, p] : held_out) sellers.insert(static_cast<int64_t>(s));

  std::map<int64_t, std::vector<int64_t>> predictions;
  for (int64_t s : sellers) {
    if (cfg.filter_seen && seen.count(s)) {
      std::vector<int64_t> filtered;
      filtered.reserve(pool.size());
      const auto& skip = seen.at(s);
      for (int64_t p : pool) {
        if (!skip.count(p)) filtered.push_back(p);
      }
      predictions[s] = topk_products(table, s, filtered, cfg.k);
    } else {
      predictions[s] = topk_products(table, s, pool, cfg.k);
    }
  }

  EvalReport report = recall_at_k(predictions, held_out, cfg.k);
  report.filter_seen = cfg.filter_seen;
  report.scope = cfg.scope == EvalScope::Candidates ? "candidates" : "all-products";
  return report;
}

void EvalReport::save(const std::string& path, const std::string& config_echo) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "k = " << k << "\n";
  os << "recall_at_k = ";
  {
    std::ostringstream num;
    num.precision(17);
    num << recall;
    os << num.str() << "\n";
  }
  os << "sellers_evaluated = " << sellers_evaluated << "\n";
  os << "filter_seen = " << (filter_seen ? "true" : "false") << "\n";
  os << "scope = " << scope << "\n";
  if (!config_echo.empty()) {
    std::istringstream lines(config_echo);
    std::string line;
    while (std::getline(lines, line)) os << "config." << line << "\n";
  }
}

void export_embeddings(const std::string& path, const HeteroGraph& g, const EmbeddingTable& table) {
  if (table.rows != g.node_count()) throw DataError("embedding table does not match graph");
  ContentTable out(table.dim);
  for (int64_t v = 0; v < g.node_count(); ++v) {
    std::vector<float> row(static_cast<size_t>(table.dim));
    for (int64_t j = 0; j < table.dim; ++j) {
      row[static_cast<size_t>(j)] = static_cast<float>(table.data[static_cast<size_t>(v * table.dim + j)]);
    }
    // Type prefix keeps ids unique across node types in the export.
    out.put(std::string(to_string(g.type_of(v))) + ":" + g.raw_id(v), std::move(row));
  }
  out.save(path);
}

}  // namespace waml
