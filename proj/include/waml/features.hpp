#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "waml/graph.hpp"
#include "waml/tensor.hpp"

namespace waml {

enum class ContentSource : uint8_t { PrecomputedFile = 0, TextStub = 1, Zeros = 2 };

struct FeatureConfig {
  int64_t dim = 256;
  uint64_t hash_seed = 0x57414D4CULL;  // arbitrary default, configurable
  ContentSource content_source = ContentSource::Zeros;
  bool use_id_hash = true;
  bool use_type_hash = true;

  void validate() const {
    if (dim < 2) throw ConfigError("features.dim must be >= 2");
  }
};

// Deterministic sign-vector embedding: coordinate j is +-1/sqrt(d), the sign
// drawn from a stable hash of (seed, key, j). Unit L2 norm by construction.
template <typename T>
std::vector<T> hash_embed(std::string_view key, int64_t d, uint64_t seed) {
  const uint64_t base = splitmix64(seed ^ fnv1a64(key));
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  std::vector<T> out(static_cast<size_t>(d));
  for (int64_t j = 0; j < d; ++j) {
    const uint64_t h = splitmix64(base + static_cast<uint64_t>(j) + 1);
    out[static_cast<size_t>(j)] = (h >> 63) ? scale : -scale;
  }
  return out;
}

// Whitespace-lowercase tokenization, summed token hash embeddings, then L2
// normalized. Empty text maps to the zero vector.
template <typename T>
std::vector<T> text_stub_embed(std::string_view text, int64_t d, uint64_t seed) {
  std::vector<T> acc(static_cast<size_t>(d), T(0));
  std::string token;
  bool any = false;
  auto flush = [&]() {
    if (token.empty()) return;
    auto v = hash_embed<T>(token, d, seed);
    for (int64_t j = 0; j < d; ++j) acc[static_cast<size_t>(j)] += v[static_cast<size_t>(j)];
    any = true;
    token.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  if (!any) return acc;
  T sq = T(0);
  for (T v : acc) sq += v * v;
  const T norm = std::sqrt(sq);
  if (norm > T(0)) {
    for (T& v : acc) v /= norm;
  }
  return acc;
}

// Product raw id -> content vector; sellers/categories implicitly zero.
// Stored as f32 to match the WAMLEMB1 file format.
class ContentTable {
 public:
  ContentTable() = default;
  explicit ContentTable(int64_t dim) : dim_(dim) {}

  int64_t dim() const { return dim_; }
  size_t size() const { return by_raw_.size(); }

  void put(const std::string& raw, std::vector<float> vec) {
    if (static_cast<int64_t>(vec.size()) != dim_) throw DataError("content vector dimension mismatch");
    by_raw_[raw] = std::move(vec);
  }

  const std::vector<float>* lookup(const std::string& raw) const {
    auto it = by_raw_.find(raw);
    return it == by_raw_.end() ? nullptr : &it->second;
  }

  const std::unordered_map<std::string, std::vector<float>>& entries() const { return by_raw_; }

  void save(const std::string& path) const;
  static ContentTable load(const std::string& path);

  // Builds stub content from a raw-id -> text map.
  static ContentTable from_texts(const std::vector<std::pair<std::string, std::string>>& texts,
                                 int64_t dim, uint64_t seed);

 private:
  int64_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> by_raw_;
};

// raw_id<TAB>text lines; '#' comments ignored.
std::vector<std::pair<std::string, std::string>> load_text_file(const std::string& path);

// h0 row v = HASH(raw id) + HASH(type name) + x_v, with x_v zero for
// non-product nodes and for products absent from the table.
template <typename T>
Tensor<T> init_h0(const HeteroGraph& g, const FeatureConfig& cfg, const ContentTable& content) {
  cfg.validate();
  if (cfg.content_source != ContentSource::Zeros && content.size() > 0 &&
      content.dim() != cfg.dim) {
    throw DataError("content table dimension does not match features.dim");
  }
  const int64_t d = cfg.dim;
  Tensor<T> h0 = Tensor<T>::zeros(g.node_count(), d);
  std::vector<T> type_hash[4];
  for (int t = 0; t < 4; ++t) {
    type_hash[t] = hash_embed<T>(to_string(static_cast<NodeType>(t)), d, cfg.hash_seed);
  }
  for (int64_t v = 0; v < g.node_count(); ++v) {
    T* row = h0.data() + v * d;
    if (cfg.use_id_hash) {
      auto idh = hash_embed<T>(g.raw_id(v), d, cfg.hash_seed);
      for (int64_t j = 0; j < d; ++j) row[j] += idh[static_cast<size_t>(j)];
    }
    if (cfg.use_type_hash) {
      const auto& th = type_hash[static_cast<size_t>(g.type_of(v))];
      for (int64_t j = 0; j < d; ++j) row[j] += th[static_cast<size_t>(j)];
    }
    if (g.type_of(v) == NodeType::Product && cfg.content_source != ContentSource::Zeros) {
      if (const std::vector<float>* x = content.lookup(g.raw_id(v))) {
        for (int64_t j = 0; j < d; ++j) row[j] += static_cast<T>((*x)[static_cast<size_t>(j)]);
      }
    }
  }
  return h0;
}

}  // namespace waml
