#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "waml/common.hpp"

namespace waml {

enum class NodeType : uint8_t { Customer = 0, Product = 1, Seller = 2, Category = 3 };

enum class EdgeType : uint8_t {
  CustomerProduct = 0,  // "CP"
  SellerProduct = 1,    // "SP"
  CategoryProduct = 2,  // "AP"
  ProductProduct = 3,   // "PP"
};

const char* to_string(NodeType t);
const char* to_string(EdgeType t);
std::optional<NodeType> parse_node_type(std::string_view s);
std::optional<EdgeType> parse_edge_type(std::string_view s);

// Endpoint node types implied by an edge type, in canonical storage order.
std::pair<NodeType, NodeType> endpoint_types(EdgeType t);

struct NodeRef {
  std::string raw;
  NodeType type;
};

struct RawEdge {
  std::string src;
  std::string dst;
  EdgeType type;
};

using IndexPair = std::pair<uint32_t, uint32_t>;

// Typed heterogeneous graph with undirected CSR adjacency. Immutable after
// build; all mutation happens in build_graph.
class HeteroGraph {
 public:
  int64_t node_count() const { return static_cast<int64_t>(raw_.size()); }
  int64_t count_of(NodeType t) const { return type_counts_[static_cast<size_t>(t)]; }

  NodeType type_of(int64_t v) const { return type_[check(v)]; }
  const std::string& raw_id(int64_t v) const { return raw_[check(v)]; }
  bool is_candidate(int64_t v) const { return candidate_[check(v)] != 0; }

  std::optional<int64_t> find(NodeType t, std::string_view raw) const;

  // N(v) in ascending index order; empty for isolated nodes.
  std::span<const uint32_t> neighbors(int64_t v) const {
    size_t i = check(v);
    return {adj_.data() + offsets_[i], adj_.data() + offsets_[i + 1]};
  }

  int64_t degree(int64_t v) const {
    size_t i = check(v);
    return static_cast<int64_t>(offsets_[i + 1] - offsets_[i]);
  }

  int64_t undirected_edge_count() const { return static_cast<int64_t>(adj_.size() / 2); }

  // Canonical (u,v) pairs per edge type; pairs of typed edges store the
  // non-product endpoint first, product-product pairs store (min,max).
  const std::vector<IndexPair>& edge_set(EdgeType t) const {
    return edge_sets_[static_cast<size_t>(t)];
  }

  std::vector<int64_t> nodes_of_type(NodeType t) const;
  std::vector<int64_t> candidate_products() const;

  const std::vector<uint64_t>& csr_offsets() const { return offsets_; }
  const std::vector<uint32_t>& csr_neighbors() const { return adj_; }

  void save(const std::string& path, const std::string& config_echo = "") const;
  static HeteroGraph load(const std::string& path, std::string* config_echo = nullptr);

 private:
  friend HeteroGraph build_graph(const std::vector<NodeRef>&, const std::vector<RawEdge>&,
                                 const std::vector<std::string>&);

  size_t check(int64_t v) const {
    if (v < 0 || v >= node_count()) throw DataError("node index out of range");
    return static_cast<size_t>(v);
  }

  std::vector<std::string> raw_;
  std::vector<NodeType> type_;
  std::vector<uint8_t> candidate_;
  std::vector<uint64_t> offsets_;  // size node_count()+1, ends at 2*|E|
  std::vector<uint32_t> adj_;
  std::vector<IndexPair> edge_sets_[4];
  int64_t type_counts_[4] = {0, 0, 0, 0};
  std::map<std::pair<NodeType, std::string>, int64_t, std::less<>> lookup_;
};

// Builds the CSR graph. Dense indices are assigned in input order. Parallel
// edges collapse; both directions are materialized. Self-loops, duplicate
// nodes and unknown endpoints are build errors.
HeteroGraph build_graph(const std::vector<NodeRef>& nodes, const std::vector<RawEdge>& edges,
                        const std::vector<std::string>& candidate_raw_ids = {});

// --- text file formats -----------------------------------------------------
// Node file:  raw_id<TAB>node_type        one per line, '#' lines ignored
// Edge file:  src_raw<TAB>dst_raw<TAB>edge_type
// Candidates: one product raw id per line

std::vector<NodeRef> load_node_file(const std::string& path);
std::vector<RawEdge> load_edge_file(const std::string& path);
std::vector<std::string> load_candidate_file(const std::string& path);

void save_node_file(const std::string& path, const std::vector<NodeRef>& nodes,
                    const std::string& config_echo = "");
void save_edge_file(const std::string& path, const std::vector<RawEdge>& edges,
                    const std::string& config_echo = "");

}  // namespace waml
