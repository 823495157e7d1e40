#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "waml/graph.hpp"

namespace waml {

// Product-product co-occurrence edge. Canonical u < v, count >= 1.
struct WeightedEdge {
  int64_t u;
  int64_t v;
  int64_t count;

  bool operator==(const WeightedEdge&) const = default;
};

struct ReductionConfig {
  int64_t cooccurrence_threshold = 2;
  std::vector<std::string> candidate_set;
  // Customers with more distinct products than this are skipped during
  // projection; 0 disables the cap.
  int64_t customer_degree_cap = 0;

  void validate() const {
    if (cooccurrence_threshold < 1) throw ConfigError("reduce.threshold must be >= 1");
    if (candidate_set.empty()) throw ConfigError("candidate set must not be empty");
    if (customer_degree_cap < 0) throw ConfigError("reduce.customer_degree_cap must be >= 0");
  }
};

// Before/after counts for every node and edge set touched by the pipeline.
struct ReductionReport {
  std::map<std::string, int64_t> counts;
  std::map<std::string, double> ratios;

  std::string to_json(const std::string& config_echo = "") const;
  void save(const std::string& path, const std::string& config_echo = "") const;
};

// Step 1: replace customers by product-product co-occurrence edges. Duplicate
// (customer, product) interactions count once. Output sorted by (u,v).
std::vector<WeightedEdge> project_copurchase(
    const std::vector<std::pair<int64_t, int64_t>>& customer_product_edges,
    int64_t customer_degree_cap = 0);

// Step 2: keep edges with count >= t.
std::vector<WeightedEdge> threshold_filter(const std::vector<WeightedEdge>& pp, int64_t t);

// Step 3: keep edges touching the candidate set; training set = candidates
// plus endpoints of kept edges (so isolated candidates survive).
struct CandidateFilterResult {
  std::vector<WeightedEdge> edges;
  std::vector<int64_t> training_set;  // sorted ascending
};
CandidateFilterResult candidate_filter(const std::vector<WeightedEdge>& pp,
                                       const std::unordered_set<int64_t>& candidates);

// Steps 4-5: keep attached edges whose product endpoint is in the training set.
// Pairs are (seller-or-category, product).
std::vector<std::pair<int64_t, int64_t>> restrict_attached_edges(
    const std::vector<std::pair<int64_t, int64_t>>& attached,
    const std::unordered_set<int64_t>& training_set);

// Full pipeline over raw node/edge lists; produces the final training graph
// (sellers + training products + categories) and the count report.
std::pair<HeteroGraph, ReductionReport> reduce_pipeline(const std::vector<NodeRef>& nodes,
                                                        const std::vector<RawEdge>& edges,
                                                        const ReductionConfig& config);

}  // namespace waml
