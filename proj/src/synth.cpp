#include "waml/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

namespace waml {

void SynthConfig::validate() const {
  if (clusters < 1) throw ConfigError("synth.clusters must be >= 1");
  if (sellers_per_cluster < 1) throw ConfigError("synth.sellers_per_cluster must be >= 1");
  if (products_per_cluster < 2) throw ConfigError("synth.products_per_cluster must be >= 2");
  if (!(candidate_fraction > 0.0 && candidate_fraction <= 1.0)) {
    throw ConfigError("synth.candidate_fraction must lie in (0,1]");
  }
  if (customers < 0) throw ConfigError("synth.customers must be >= 0");
  if (interactions_per_customer < 2 || interactions_per_customer > products_per_cluster) {
    throw ConfigError("synth.interactions_per_customer must lie in [2, products_per_cluster]");
  }
  double total = 0.0;
  for (double p : interaction_profile) {
    if (p < 0.0) throw ConfigError("synth.profile proportions must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 0.02) throw ConfigError("synth.profile proportions must sum to 1");
  // Bucket 4-10 requires up to 10 distinct sellers per candidate.
  if (interaction_profile[2] > 0.0 && sellers_per_cluster < 10) {
    throw DataError("infeasible profile: the 4-10 bucket needs at least 10 sellers per cluster");
  }
  if (interaction_profile[1] > 0.0 && sellers_per_cluster < 3) {
    throw DataError("infeasible profile: the 1-3 bucket needs at least 3 sellers per cluster");
  }
  if (warm_interactions_min < 0 || warm_interactions_max < warm_interactions_min) {
    throw ConfigError("synth.warm interaction range is invalid");
  }
  if (warm_interactions_max > sellers_per_cluster) {
    throw DataError("infeasible profile: warm products need more sellers than a cluster has");
  }
  if (vocab_size < 1) throw ConfigError("synth.vocab_size must be >= 1");
  if (tokens_per_product < 1) throw ConfigError("synth.tokens_per_product must be >= 1");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("synth.noise_rate must lie in [0,1]");
  if (dim < 2) throw ConfigError("features.dim must be >= 2");
}

namespace {

// Largest-remainder apportionment of n into shares.
std::vector<int64_t> apportion(int64_t n, const std::vector<double>& shares) {
  std::vector<int64_t> out(shares.size(), 0);
  std::vector<std::pair<double, size_t>> remainders;
  double share_total = 0.0;
  for (double s : shares) share_total += s;
  int64_t assigned = 0;
  for (size_t i = 0; i < shares.size(); ++i) {
    const double exact = share_total == 0.0 ? 0.0 : shares[i] / share_total * static_cast<double>(n);
    out[i] = static_cast<int64_t>(std::floor(exact));
    remainders.push_back({exact - std::floor(exact), i});
    assigned += out[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](auto& a, auto& b) { return a.first > b.first; });
  for (size_t i = 0; assigned < n; ++i, ++assigned) out[remainders[i % remainders.size()].second]++;
  return out;
}

}  // namespace

SynthDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(splitmix64(cfg.seed ^ 0x73796E7468ULL));
  SynthDataset data;

  auto seller_raw = [](int64_t c, int64_t i) { return "s" + std::to_string(c) + "_" + std::to_string(i); };
  auto product_raw = [](int64_t c, int64_t i) { return "p" + std::to_string(c) + "_" + std::to_string(i); };
  auto category_raw = [](int64_t c) { return "a" + std::to_string(c); };
  auto customer_raw = [](int64_t i) { return "c" + std::to_string(i); };

  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t i = 0; i < cfg.sellers_per_cluster; ++i) {
      data.nodes.push_back({seller_raw(c, i), NodeType::Seller});
      data.cluster_of[seller_raw(c, i)] = c;
    }
  }
  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t i = 0; i < cfg.products_per_cluster; ++i) {
      data.nodes.push_back({product_raw(c, i), NodeType::Product});
      data.cluster_of[product_raw(c, i)] = c;
    }
  }
  for (int64_t c = 0; c < cfg.clusters; ++c) data.nodes.push_back({category_raw(c), NodeType::Category});
  for (int64_t i = 0; i < cfg.customers; ++i) data.nodes.push_back({customer_raw(i), NodeType::Customer});

  // Candidates: the leading products of each cluster, apportioned to hit the
  // global target count exactly.
  const int64_t total_products = cfg.clusters * cfg.products_per_cluster;
  const int64_t target_candidates = static_cast<int64_t>(
      std::llround(cfg.candidate_fraction * static_cast<double>(total_products)));
  auto cand_per_cluster = apportion(target_candidates, std::vector<double>(static_cast<size_t>(cfg.clusters), 1.0));
  for (int64_t c = 0; c < cfg.clusters; ++c) {
    if (cand_per_cluster[static_cast<size_t>(c)] > cfg.products_per_cluster) {
      throw DataError("infeasible profile: more candidates than products in a cluster");
    }
    for (int64_t i = 0; i < cand_per_cluster[static_cast<size_t>(c)]; ++i) {
      data.candidates.push_back(product_raw(c, i));
    }
  }

  // Candidate bucket assignment over the whole candidate set.
  const int64_t n_cand = static_cast<int64_t>(data.candidates.size());
  auto bucket_sizes = apportion(n_cand, {cfg.interaction_profile[0], cfg.interaction_profile[1],
                                         cfg.interaction_profile[2]});
  std::vector<int> bucket_of(static_cast<size_t>(n_cand));
  {
    std::vector<int64_t> order(static_cast<size_t>(n_cand));
    for (int64_t i = 0; i < n_cand; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    int64_t at = 0;
    for (int b = 0; b < 3; ++b) {
      for (int64_t i = 0; i < bucket_sizes[static_cast<size_t>(b)]; ++i) {
        bucket_of[static_cast<size_t>(order[static_cast<size_t>(at++)])] = b;
      }
    }
  }

  std::set<std::pair<std::string, std::string>> sp_edges;  // (seller, product)
  auto add_seller_edges = [&](const std::string& product, int64_t cluster, int64_t count) {
    for (int64_t s : rng.sample_distinct(cfg.sellers_per_cluster, count)) {
      sp_edges.insert({seller_raw(cluster, s), product});
    }
  };

  int64_t cand_cursor = 0;
  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t i = 0; i < cfg.products_per_cluster; ++i) {
      const std::string raw = product_raw(c, i);
      if (i < cand_per_cluster[static_cast<size_t>(c)]) {
        const int bucket = bucket_of[static_cast<size_t>(cand_cursor++)];
        int64_t count = 0;
        if (bucket == 1) count = 1 + static_cast<int64_t>(rng.below(3));        // 1..3
        else if (bucket == 2) count = 4 + static_cast<int64_t>(rng.below(7));   // 4..10
        add_seller_edges(raw, c, count);
      } else {
        const int64_t span = cfg.warm_interactions_max - cfg.warm_interactions_min + 1;
        add_seller_edges(raw, c, cfg.warm_interactions_min + static_cast<int64_t>(rng.below(static_cast<uint64_t>(span))));
      }
    }
  }

  for (auto& [s, p] : sp_edges) data.edges.push_back({s, p, EdgeType::SellerProduct});

  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t i = 0; i < cfg.products_per_cluster; ++i) {
      data.edges.push_back({category_raw(c), product_raw(c, i), EdgeType::CategoryProduct});
    }
  }

  // Customer co-purchases: cluster-loyal with cross-cluster noise.
  std::set<std::pair<std::string, std::string>> cp_edges;
  for (int64_t i = 0; i < cfg.customers; ++i) {
    const int64_t home = i % cfg.clusters;
    int64_t made = 0;
    while (made < cfg.interactions_per_customer) {
      int64_t cluster = home;
      if (cfg.clusters > 1 && rng.real() < cfg.noise_rate) {
        cluster = static_cast<int64_t>(rng.below(static_cast<uint64_t>(cfg.clusters - 1)));
        if (cluster >= home) ++cluster;
      }
      const int64_t p = static_cast<int64_t>(rng.below(static_cast<uint64_t>(cfg.products_per_cluster)));
      if (cp_edges.insert({customer_raw(i), product_raw(cluster, p)}).second) ++made;
    }
  }
  for (auto& [c, p] : cp_edges) data.edges.push_back({c, p, EdgeType::CustomerProduct});

  // Held-out ground truth: within-cluster seller-candidate pairs that were
  // not emitted as edges.
  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t s = 0; s < cfg.sellers_per_cluster; ++s) {
      for (int64_t i = 0; i < cand_per_cluster[static_cast<size_t>(c)]; ++i) {
        auto pair = std::make_pair(seller_raw(c, s), product_raw(c, i));
        if (!sp_edges.count(pair)) data.truth.push_back(std::move(pair));
      }
    }
  }

  // Stub text from per-cluster vocabularies.
  std::vector<std::pair<std::string, std::string>> texts;
  for (int64_t c = 0; c < cfg.clusters; ++c) {
    for (int64_t i = 0; i < cfg.products_per_cluster; ++i) {
      std::string text;
      for (int64_t t = 0; t < cfg.tokens_per_product; ++t) {
        if (t > 0) text += ' ';
        text += "w" + std::to_string(c) + "_" + std::to_string(rng.below(static_cast<uint64_t>(cfg.vocab_size)));
      }
      texts.emplace_back(product_raw(c, i), std::move(text));
    }
  }
  data.content = ContentTable::from_texts(texts, cfg.dim, cfg.seed);

  return data;
}

double oracle_recall(const SynthDataset& data, int64_t k) {
  if (k < 0) throw ConfigError("oracle recall requires k >= 0");
  std::map<std::string, std::unordered_set<std::string>> relevant;
  for (auto& [s, p] : data.truth) relevant[s].insert(p);

  double total = 0.0;
  int64_t sellers = 0;
  for (auto& [seller, rel] : relevant) {
    const int64_t home = data.cluster_of.at(seller);
    // Same-cluster candidates first, original order within each group.
    std::vector<const std::string*> ranked;
    ranked.reserve(data.candidates.size());
    for (const auto& p : data.candidates) {
      if (data.cluster_of.at(p) == home) ranked.push_back(&p);
    }
    for (const auto& p : data.candidates) {
      if (data.cluster_of.at(p) != home) ranked.push_back(&p);
    }
    int64_t hits = 0;
    for (int64_t r = 0; r < std::min<int64_t>(k, static_cast<int64_t>(ranked.size())); ++r) {
      if (rel.count(*ranked[static_cast<size_t>(r)])) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(rel.size());
    ++sellers;
  }
  return sellers == 0 ? 0.0 : total / static_cast<double>(sellers);
}

void save_dataset(const std::string& dir, const SynthDataset& data, const std::string& config_echo) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  save_node_file(path("nodes.tsv"), data.nodes, config_echo);
  save_edge_file(path("edges.tsv"), data.edges, config_echo);
  {
    std::ofstream os(path("candidates.txt"));
    if (!os) throw DataError("cannot write candidates file");
    for (const auto& c : data.candidates) os << c << '\n';
  }
  {
    std::ofstream os(path("truth.tsv"));
    if (!os) throw DataError("cannot write truth file");
    for (auto& [s, p] : data.truth) os << s << '\t' << p << '\n';
  }
  {
    std::ofstream os(path("clusters.tsv"));
    if (!os) throw DataError("cannot write clusters file");
    for (auto& [raw, c] : data.cluster_of) os << raw << '\t' << c << '\n';
  }
  data.content.save(path("content.emb"));
}

}  // namespace waml
