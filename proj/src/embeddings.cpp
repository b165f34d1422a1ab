#include "peohoi/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace peohoi {

void EmbeddingTable::insert(const std::string& token, std::vector<float> v) {
  if (int(v.size()) != dim_)
    throw SchemaError(strf("embedding for '", token, "' has ", v.size(), " values, want ", dim_));
  table_[token] = std::move(v);
}

std::vector<float> EmbeddingTable::lookup(const std::string& token) const {
  auto it = table_.find(token);
  if (it != table_.end()) return it->second;
  Rng rng(seed_for(fallback_seed_, token));
  std::vector<float> v(dim_);
  double norm2 = 0;
  for (auto& x : v) {
    x = float(rng.normal());
    norm2 += double(x) * x;
  }
  double inv = 1.0 / std::sqrt(std::max(norm2, 1e-30));
  for (auto& x : v) x = float(x * inv);
  return v;
}

EmbeddingTable load_embeddings(const std::string& path, int dim, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError(strf("cannot open embedding file '", path, "'"));
  EmbeddingTable table(dim);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (token.empty()) continue;
    std::vector<float> v;
    v.reserve(dim);
    double x;
    while (ss >> x) v.push_back(float(x));
    if (!ss.eof())
      throw SchemaError(strf("embedding line ", lineno, " ('", token, "'): non-numeric value"));
    if (int(v.size()) != dim)
      throw SchemaError(strf("embedding line ", lineno, " ('", token, "'): got ", v.size(),
                             " values, want ", dim));
    if (table.contains(token) && warnings)
      warnings->push_back(strf("duplicate token '", token, "' on line ", lineno, "; last wins"));
    table.insert(token, std::move(v));
  }
  return table;
}

}  // namespace peohoi
