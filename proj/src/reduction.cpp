#include "waml/reduction.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace waml {

std::vector<WeightedEdge> project_copurchase(
    const std::vector<std::pair<int64_t, int64_t>>& customer_product_edges,
    int64_t customer_degree_cap) {
  std::unordered_map<int64_t, std::vector<int64_t>> by_customer;
  for (auto [c, p] : customer_product_edges) by_customer[c].push_back(p);

  std::unordered_map<uint64_t, int64_t> counts;
  for (auto& [c, products] : by_customer) {
    std::sort(products.begin(), products.end());
    products.erase(std::unique(products.begin(), products.end()), products.end());
    if (customer_degree_cap > 0 &&
        static_cast<int64_t>(products.size()) > customer_degree_cap) {
      continue;
    }
    for (size_t i = 0; i < products.size(); ++i) {
      for (size_t j = i + 1; j < products.size(); ++j) {
        uint64_t key = (static_cast<uint64_t>(products[i]) << 32) |
                       static_cast<uint64_t>(products[j]);
        counts[key]++;
      }
    }
  }

  std::vector<WeightedEdge> out;
  out.reserve(counts.size());
  for (auto [key, count] : counts) {
    out.push_back({static_cast<int64_t>(key >> 32),
                   static_cast<int64_t>(key & 0xFFFFFFFFULL), count});
  }
  std::sort(out.begin(), out.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) {
              return std::tie(a.u, a.v) < std::tie(b.u, b.v);
            });
  return out;
}

std::vector<WeightedEdge> threshold_filter(const std::vector<WeightedEdge>& pp, int64_t t) {
  if (t < 1) throw ConfigError("co-occurrence threshold must be >= 1");
  std::vector<WeightedEdge> out;
  out.reserve(pp.size());
  for (const WeightedEdge& e : pp) {
    if (e.count >= t) out.push_back(e);
  }
  return out;
}

CandidateFilterResult candidate_filter(const std::vector<WeightedEdge>& pp,
                                       const std::unordered_set<int64_t>& candidates) {
  CandidateFilterResult result;
  std::unordered_set<int64_t> training(candidates.begin(), candidates.end());
  for (const WeightedEdge& e : pp) {
    if (candidates.count(e.u) || candidates.count(e.v)) {
      result.edges.push_back(e);
      training.insert(e.u);
      training.insert(e.v);
    }
  }
  result.training_set.assign(training.begin(), training.end());
  std::sort(result.training_set.begin(), result.training_set.end());
  return result;
}

std::vector<std::pair<int64_t, int64_t>> restrict_attached_edges(
    const std::vector<std::pair<int64_t, int64_t>>& attached,
    const std::unordered_set<int64_t>& training_set) {
  std::vector<std::pair<int64_t, int64_t>> out;
  out.reserve(attached.size());
  for (auto& e : attached) {
    if (training_set.count(e.second)) out.push_back(e);
  }
  return out;
}

std::pair<HeteroGraph, ReductionReport> reduce_pipeline(const std::vector<NodeRef>& nodes,
                                                        const std::vector<RawEdge>& edges,
                                                        const ReductionConfig& config) {
  config.validate();

  // Intern per-type raw ids in input order.
  std::unordered_map<std::string, int64_t> product_id, customer_id;
  std::vector<const NodeRef*> products, customers, sellers, categories;
  for (const NodeRef& n : nodes) {
    switch (n.type) {
      case NodeType::Product:
        if (!product_id.emplace(n.raw, static_cast<int64_t>(products.size())).second) {
          throw DataError("duplicate product node '" + n.raw + "'");
        }
        products.push_back(&n);
        break;
      case NodeType::Customer:
        if (!customer_id.emplace(n.raw, static_cast<int64_t>(customers.size())).second) {
          throw DataError("duplicate customer node '" + n.raw + "'");
        }
        customers.push_back(&n);
        break;
      case NodeType::Seller: sellers.push_back(&n); break;
      case NodeType::Category: categories.push_back(&n); break;
    }
  }

  std::unordered_set<int64_t> candidate_ids;
  for (const std::string& raw : config.candidate_set) {
    auto it = product_id.find(raw);
    if (it == product_id.end()) {
      throw DataError("candidate product '" + raw + "' is not a declared product node");
    }
    candidate_ids.insert(it->second);
  }

  auto product_of = [&](const RawEdge& e) -> std::pair<int64_t, std::string> {
    // Returns (product id, other endpoint raw). Orientation-tolerant.
    auto it = product_id.find(e.dst);
    if (it != product_id.end()) return {it->second, e.src};
    it = product_id.find(e.src);
    if (it != product_id.end()) return {it->second, e.dst};
    throw DataError("edge (" + e.src + ", " + e.dst + ") has no product endpoint");
  };

  std::vector<std::pair<int64_t, int64_t>> cp;  // (customer, product)
  std::vector<std::pair<int64_t, std::string>> sp, ap;  // (product, other raw)
  std::set<std::pair<int64_t, int64_t>> pp_direct;  // pre-projected PP input
  for (const RawEdge& e : edges) {
    switch (e.type) {
      case EdgeType::CustomerProduct: {
        auto [p, other] = product_of(e);
        auto it = customer_id.find(other);
        if (it == customer_id.end()) throw DataError("unknown customer '" + other + "'");
        cp.push_back({it->second, p});
        break;
      }
      case EdgeType::SellerProduct: {
        sp.push_back(product_of(e));
        break;
      }
      case EdgeType::CategoryProduct: {
        ap.push_back(product_of(e));
        break;
      }
      case EdgeType::ProductProduct: {
        // Already-projected edges (a previous pipeline output) re-enter after
        // the threshold stage; this makes the pipeline idempotent.
        auto u = product_id.find(e.src);
        auto v = product_id.find(e.dst);
        if (u == product_id.end() || v == product_id.end()) {
          throw DataError("PP edge (" + e.src + ", " + e.dst + ") names an unknown product");
        }
        pp_direct.insert({std::min(u->second, v->second), std::max(u->second, v->second)});
        break;
      }
    }
  }

  auto pp_all = project_copurchase(cp, config.customer_degree_cap);
  auto pp_thresh = threshold_filter(pp_all, config.cooccurrence_threshold);
  for (auto [u, v] : pp_direct) {
    bool present = false;
    for (const WeightedEdge& e : pp_thresh) {
      if (e.u == u && e.v == v) {
        present = true;
        break;
      }
    }
    if (!present) pp_thresh.push_back({u, v, 1});
  }
  std::sort(pp_thresh.begin(), pp_thresh.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  auto cf = candidate_filter(pp_thresh, candidate_ids);
  std::unordered_set<int64_t> training(cf.training_set.begin(), cf.training_set.end());

  std::vector<std::pair<int64_t, std::string>> sp_kept, ap_kept;
  for (auto& e : sp) {
    if (training.count(e.first)) sp_kept.push_back(e);
  }
  for (auto& e : ap) {
    if (training.count(e.first)) ap_kept.push_back(e);
  }

  // Final node list preserves input order within each surviving set.
  std::vector<NodeRef> final_nodes;
  for (auto* n : sellers) final_nodes.push_back(*n);
  for (auto* n : products) {
    if (training.count(product_id[n->raw])) final_nodes.push_back(*n);
  }
  for (auto* n : categories) final_nodes.push_back(*n);

  std::vector<RawEdge> final_edges;
  for (const WeightedEdge& e : cf.edges) {
    final_edges.push_back({products[static_cast<size_t>(e.u)]->raw,
                           products[static_cast<size_t>(e.v)]->raw, EdgeType::ProductProduct});
  }
  for (auto& [p, seller_raw] : sp_kept) {
    final_edges.push_back({seller_raw, products[static_cast<size_t>(p)]->raw, EdgeType::SellerProduct});
  }
  for (auto& [p, category_raw] : ap_kept) {
    final_edges.push_back({category_raw, products[static_cast<size_t>(p)]->raw, EdgeType::CategoryProduct});
  }

  HeteroGraph g = build_graph(final_nodes, final_edges, config.candidate_set);

  ReductionReport report;
  auto& c = report.counts;
  c["customers_before"] = static_cast<int64_t>(customers.size());
  c["customers_after"] = 0;
  c["products_before"] = static_cast<int64_t>(products.size());
  c["products_after"] = static_cast<int64_t>(cf.training_set.size());
  c["sellers_before"] = static_cast<int64_t>(sellers.size());
  c["sellers_after"] = static_cast<int64_t>(sellers.size());
  c["categories_before"] = static_cast<int64_t>(categories.size());
  c["categories_after"] = static_cast<int64_t>(categories.size());
  c["candidate_products"] = static_cast<int64_t>(candidate_ids.size());
  c["training_products"] = static_cast<int64_t>(cf.training_set.size());
  c["edges_customer_product_before"] = static_cast<int64_t>(cp.size());
  c["edges_customer_product_after"] = 0;
  c["edges_product_product_projected"] = static_cast<int64_t>(pp_all.size());
  c["edges_product_product_thresholded"] = static_cast<int64_t>(pp_thresh.size());
  c["edges_product_product_after"] = static_cast<int64_t>(cf.edges.size());
  c["edges_seller_product_before"] = static_cast<int64_t>(sp.size());
  c["edges_seller_product_after"] = static_cast<int64_t>(sp_kept.size());
  c["edges_category_product_before"] = static_cast<int64_t>(ap.size());
  c["edges_category_product_after"] = static_cast<int64_t>(ap_kept.size());
  c["nodes_final"] = g.node_count();
  c["edges_final"] = g.undirected_edge_count();

  auto ratio = [](int64_t after, int64_t before) {
    return before == 0 ? 0.0 : static_cast<double>(after) / static_cast<double>(before);
  };
  report.ratios["product_node_ratio"] = ratio(c["products_after"], c["products_before"]);
  report.ratios["seller_product_edge_ratio"] =
      ratio(c["edges_seller_product_after"], c["edges_seller_product_before"]);
  report.ratios["category_product_edge_ratio"] =
      ratio(c["edges_category_product_after"], c["edges_category_product_before"]);

  return {std::move(g), std::move(report)};
}

std::string ReductionReport::to_json(const std::string& config_echo) const {
  nlohmann::ordered_json j;
  if (!config_echo.empty()) j["config"] = config_echo;
  for (auto& [k, v] : counts) j[k] = v;
  for (auto& [k, v] : ratios) j[k] = v;
  return j.dump(2) + "\n";
}

void ReductionReport::save(const std::string& path, const std::string& config_echo) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << to_json(config_echo);
}

}  // namespace waml
