#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "waml/features.hpp"
#include "waml/graph.hpp"

namespace waml {

// Planted-cluster marketplace generator. Sellers and products live in latent
// clusters; candidate products receive seller interactions following the
// cold-start bucket profile, customers co-purchase within their cluster (plus
// cross-cluster noise), and product text is drawn from per-cluster
// vocabularies.
struct SynthConfig {
  int64_t clusters = 8;
  int64_t sellers_per_cluster = 25;
  int64_t products_per_cluster = 120;
  double candidate_fraction = 125.0 / 240.0;  // 500 candidates at defaults
  int64_t customers = 1200;
  int64_t interactions_per_customer = 8;
  // Candidate interaction buckets: 0 interactions, 1-3, 4-10; products above
  // 10 never occur (the fully-warmed share is pinned to zero).
  std::array<double, 3> interaction_profile = {0.142, 0.479, 0.378};
  // Seller-interaction range for non-candidate (warm) products.
  int64_t warm_interactions_min = 3;
  int64_t warm_interactions_max = 8;
  int64_t vocab_size = 50;
  int64_t tokens_per_product = 8;
  double noise_rate = 0.05;
  int64_t dim = 32;
  uint64_t seed = 1;

  void validate() const;
};

struct SynthDataset {
  std::vector<NodeRef> nodes;
  std::vector<RawEdge> edges;
  std::vector<std::string> candidates;
  // Within-cluster seller-candidate pairs withheld from the edge list.
  std::vector<std::pair<std::string, std::string>> truth;
  std::map<std::string, int64_t> cluster_of;  // sellers and products
  ContentTable content;
};

SynthDataset generate_synthetic(const SynthConfig& cfg);

// Recall@k of the cheating ranker that places same-cluster candidates first;
// upper-bounds any learned model on the instance.
double oracle_recall(const SynthDataset& data, int64_t k);

// Writes nodes.tsv, edges.tsv, candidates.txt, truth.tsv, clusters.tsv and
// content.emb into the directory.
void save_dataset(const std::string& dir, const SynthDataset& data,
                  const std::string& config_echo = "");

}  // namespace waml
