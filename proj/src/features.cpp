#include "waml/features.hpp"

#include <algorithm>
#include <fstream>

namespace waml {

// WAMLEMB1: magic, u32 dim, then records of (u32 raw length, raw bytes,
// dim little-endian f32). Shared by content vectors and embedding exports.

static constexpr char kEmbMagic[8] = {'W', 'A', 'M', 'L', 'E', 'M', 'B', '1'};

void ContentTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_bytes(os, kEmbMagic, 8);
  write_u32(os, static_cast<uint32_t>(dim_));
  // Sorted record order keeps regeneration byte-identical.
  std::vector<const std::string*> keys;
  keys.reserve(by_raw_.size());
  for (auto& [raw, _] : by_raw_) keys.push_back(&raw);
  std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
  for (auto* raw : keys) {
    write_string(os, *raw);
    for (float v : by_raw_.at(*raw)) write_f32(os, v);
  }
}

ContentTable ContentTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, kEmbMagic, 8) != 0) throw DataError("'" + path + "' is not an embedding file");
  ContentTable table(static_cast<int64_t>(read_u32(is)));
  while (is.peek() != EOF) {
    std::string raw = read_string(is);
    std::vector<float> vec(static_cast<size_t>(table.dim_));
    for (float& v : vec) v = read_f32(is);
    table.by_raw_.emplace(std::move(raw), std::move(vec));
  }
  return table;
}

ContentTable ContentTable::from_texts(
    const std::vector<std::pair<std::string, std::string>>& texts, int64_t dim, uint64_t seed) {
  ContentTable table(dim);
  for (auto& [raw, text] : texts) {
    table.put(raw, text_stub_embed<float>(text, dim, seed));
  }
  return table;
}

std::vector<std::pair<std::string, std::string>> load_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open text file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected raw_id<TAB>text");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace waml
