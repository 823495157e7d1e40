#include "waml/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace waml {

const char* to_string(NodeType t) {
  switch (t) {
    case NodeType::Customer: return "Customer";
    case NodeType::Product: return "Product";
    case NodeType::Seller: return "Seller";
    case NodeType::Category: return "Category";
  }
  return "?";
}

const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::CustomerProduct: return "CP";
    case EdgeType::SellerProduct: return "SP";
    case EdgeType::CategoryProduct: return "AP";
    case EdgeType::ProductProduct: return "PP";
  }
  return "?";
}

std::optional<NodeType> parse_node_type(std::string_view s) {
  if (s == "Customer") return NodeType::Customer;
  if (s == "Product") return NodeType::Product;
  if (s == "Seller") return NodeType::Seller;
  if (s == "Category") return NodeType::Category;
  return std::nullopt;
}

std::optional<EdgeType> parse_edge_type(std::string_view s) {
  if (s == "CP") return EdgeType::CustomerProduct;
  if (s == "SP") return EdgeType::SellerProduct;
  if (s == "AP") return EdgeType::CategoryProduct;
  if (s == "PP") return EdgeType::ProductProduct;
  return std::nullopt;
}

std::pair<NodeType, NodeType> endpoint_types(EdgeType t) {
  switch (t) {
    case EdgeType::CustomerProduct: return {NodeType::Customer, NodeType::Product};
    case EdgeType::SellerProduct: return {NodeType::Seller, NodeType::Product};
    case EdgeType::CategoryProduct: return {NodeType::Category, NodeType::Product};
    case EdgeType::ProductProduct: return {NodeType::Product, NodeType::Product};
  }
  throw DataError("bad edge type");
}

std::optional<int64_t> HeteroGraph::find(NodeType t, std::string_view raw) const {
  auto it = lookup_.find(std::make_pair(t, std::string(raw)));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<int64_t> HeteroGraph::nodes_of_type(NodeType t) const {
  std::vector<int64_t> out;
  for (int64_t v = 0; v < node_count(); ++v) {
    if (type_[static_cast<size_t>(v)] == t) out.push_back(v);
  }
  return out;
}

std::vector<int64_t> HeteroGraph::candidate_products() const {
  std::vector<int64_t> out;
  for (int64_t v = 0; v < node_count(); ++v) {
    if (candidate_[static_cast<size_t>(v)]) out.push_back(v);
  }
  return out;
}

HeteroGraph build_graph(const std::vector<NodeRef>& nodes, const std::vector<RawEdge>& edges,
                        const std::vector<std::string>& candidate_raw_ids) {
  HeteroGraph g;
  g.raw_.reserve(nodes.size());
  g.type_.reserve(nodes.size());
  for (const NodeRef& n : nodes) {
    auto key = std::make_pair(n.type, n.raw);
    if (g.lookup_.count(key)) {
      throw DataError("duplicate node '" + n.raw + "' of type " + to_string(n.type));
    }
    g.lookup_.emplace(std::move(key), static_cast<int64_t>(g.raw_.size()));
    g.raw_.push_back(n.raw);
    g.type_.push_back(n.type);
    g.type_counts_[static_cast<size_t>(n.type)]++;
  }
  g.candidate_.assign(g.raw_.size(), 0);
  for (const std::string& raw : candidate_raw_ids) {
    auto idx = g.find(NodeType::Product, raw);
    if (!idx) throw DataError("candidate product '" + raw + "' is not a declared product node");
    g.candidate_[static_cast<size_t>(*idx)] = 1;
  }

  const int64_t n = g.node_count();
  std::vector<std::pair<uint32_t, uint32_t>> undirected;  // canonical (min,max)
  undirected.reserve(edges.size());
  std::vector<std::unordered_set<uint64_t>> seen_per_type(4);

  for (const RawEdge& e : edges) {
    auto [ta, tb] = endpoint_types(e.type);
    auto a = g.find(ta, e.src);
    auto b = g.find(tb, e.dst);
    if (!a || !b) {
      // Tolerate reversed orientation in input files.
      a = g.find(ta, e.dst);
      b = g.find(tb, e.src);
    }
    if (!a) throw DataError(std::string("edge endpoint '") + e.src + "' (" + to_string(e.type) +
                            ") names no declared node");
    if (!b) throw DataError(std::string("edge endpoint '") + e.dst + "' (" + to_string(e.type) +
                            ") names no declared node");
    if (*a == *b) throw DataError("self-loop on node '" + e.src + "'");

    uint32_t u = static_cast<uint32_t>(*a);
    uint32_t v = static_cast<uint32_t>(*b);
    uint32_t set_u = u, set_v = v;
    if (e.type == EdgeType::ProductProduct && set_u > set_v) std::swap(set_u, set_v);
    uint64_t key = (static_cast<uint64_t>(set_u) << 32) | set_v;
    if (seen_per_type[static_cast<size_t>(e.type)].insert(key).second) {
      g.edge_sets_[static_cast<size_t>(e.type)].push_back({set_u, set_v});
    }
    undirected.push_back({std::min(u, v), std::max(u, v)});
  }

  for (auto& set : g.edge_sets_) std::sort(set.begin(), set.end());

  // Dedup across all edge types, then materialize both directions.
  std::sort(undirected.begin(), undirected.end());
  undirected.erase(std::unique(undirected.begin(), undirected.end()), undirected.end());

  std::vector<uint64_t> deg(static_cast<size_t>(n), 0);
  for (auto [u, v] : undirected) {
    deg[u]++;
    deg[v]++;
  }
  g.offsets_.assign(static_cast<size_t>(n) + 1, 0);
  for (int64_t i = 0; i < n; ++i) {
    g.offsets_[static_cast<size_t>(i) + 1] = g.offsets_[static_cast<size_t>(i)] + deg[static_cast<size_t>(i)];
  }
  g.adj_.assign(g.offsets_[static_cast<size_t>(n)], 0);
  std::vector<uint64_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (auto [u, v] : undirected) {
    g.adj_[cursor[u]++] = v;
    g.adj_[cursor[v]++] = u;
  }
  for (int64_t i = 0; i < n; ++i) {
    std::sort(g.adj_.begin() + static_cast<int64_t>(g.offsets_[static_cast<size_t>(i)]),
              g.adj_.begin() + static_cast<int64_t>(g.offsets_[static_cast<size_t>(i) + 1]));
  }
  return g;
}

// --- binary snapshot ---------------------------------------------------------
// WAMLGRPH, version u32, config echo string, node table, CSR arrays, edge sets.

static constexpr char kGraphMagic[8] = {'W', 'A', 'M', 'L', 'G', 'R', 'P', 'H'};
static constexpr uint32_t kGraphVersion = 1;

void HeteroGraph::save(const std::string& path, const std::string& config_echo) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_bytes(os, kGraphMagic, 8);
  write_u32(os, kGraphVersion);
  write_string(os, config_echo);
  write_u64(os, static_cast<uint64_t>(node_count()));
  for (int64_t v = 0; v < node_count(); ++v) {
    write_u8(os, static_cast<uint8_t>(type_[static_cast<size_t>(v)]));
    write_u8(os, candidate_[static_cast<size_t>(v)]);
    write_string(os, raw_[static_cast<size_t>(v)]);
  }
  for (uint64_t off : offsets_) write_u64(os, off);
  write_u64(os, adj_.size());
  for (uint32_t x : adj_) write_u32(os, x);
  for (const auto& set : edge_sets_) {
    write_u64(os, set.size());
    for (auto [u, v] : set) {
      write_u32(os, u);
      write_u32(os, v);
    }
  }
}

HeteroGraph HeteroGraph::load(const std::string& path, std::string* config_echo) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, kGraphMagic, 8) != 0) throw DataError("'" + path + "' is not a graph snapshot");
  uint32_t version = read_u32(is);
  if (version != kGraphVersion) throw DataError("unsupported graph snapshot version");
  std::string echo = read_string(is);
  if (config_echo) *config_echo = echo;

  HeteroGraph g;
  uint64_t n = read_u64(is);
  g.raw_.reserve(n);
  g.type_.reserve(n);
  g.candidate_.reserve(n);
  for (uint64_t v = 0; v < n; ++v) {
    uint8_t t = read_u8(is);
    if (t > 3) throw DataError("corrupt snapshot: bad node type");
    uint8_t cand = read_u8(is);
    std::string raw = read_string(is);
    g.lookup_.emplace(std::make_pair(static_cast<NodeType>(t), raw), static_cast<int64_t>(v));
    g.raw_.push_back(std::move(raw));
    g.type_.push_back(static_cast<NodeType>(t));
    g.candidate_.push_back(cand);
    g.type_counts_[t]++;
  }
  g.offsets_.resize(n + 1);
  for (uint64_t i = 0; i <= n; ++i) g.offsets_[i] = read_u64(is);
  uint64_t m = read_u64(is);
  if (g.offsets_[n] != m) throw DataError("corrupt snapshot: CSR length mismatch");
  g.adj_.resize(m);
  for (uint64_t i = 0; i < m; ++i) {
    g.adj_[i] = read_u32(is);
    if (g.adj_[i] >= n) throw DataError("corrupt snapshot: neighbor index out of range");
  }
  for (auto& set : g.edge_sets_) {
    uint64_t k = read_u64(is);
    set.resize(k);
    for (uint64_t i = 0; i < k; ++i) {
      set[i].first = read_u32(is);
      set[i].second = read_u32(is);
    }
  }
  return g;
}

// --- text formats --------------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool skippable(const std::string& line) {
  return line.empty() || line[0] == '#' || line == "\r";
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void write_echo_comment(std::ofstream& os, const std::string& echo) {
  if (echo.empty()) return;
  std::istringstream lines(echo);
  std::string line;
  while (std::getline(lines, line)) os << "# " << line << "\n";
}

}  // namespace

std::vector<NodeRef> load_node_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open node file '" + path + "'");
  std::vector<NodeRef> nodes;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (skippable(line)) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected raw_id<TAB>node_type");
    }
    auto type = parse_node_type(cols[1]);
    if (!type) throw DataError(path + ":" + std::to_string(lineno) + ": unknown node type '" + cols[1] + "'");
    nodes.push_back({cols[0], *type});
  }
  return nodes;
}

std::vector<RawEdge> load_edge_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open edge file '" + path + "'");
  std::vector<RawEdge> edges;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (skippable(line)) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected src<TAB>dst<TAB>edge_type");
    }
    auto type = parse_edge_type(cols[2]);
    if (!type) throw DataError(path + ":" + std::to_string(lineno) + ": unknown edge type '" + cols[2] + "'");
    edges.push_back({cols[0], cols[1], *type});
  }
  return edges;
}

std::vector<std::string> load_candidate_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open candidate file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    line = strip_cr(line);
    if (skippable(line)) continue;
    out.push_back(line);
  }
  return out;
}

void save_node_file(const std::string& path, const std::vector<NodeRef>& nodes,
                    const std::string& config_echo) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_echo_comment(os, config_echo);
  for (const NodeRef& n : nodes) os << n.raw << '\t' << to_string(n.type) << '\n';
}

void save_edge_file(const std::string& path, const std::vector<RawEdge>& edges,
                    const std::string& config_echo) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_echo_comment(os, config_echo);
  for (const RawEdge& e : edges) os << e.src << '\t' << e.dst << '\t' << to_string(e.type) << '\n';
}

}  // namespace waml
