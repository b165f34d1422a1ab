#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "peohoi/common.hpp"

namespace peohoi {

// Word-vector table (GloVe-style text format: "token v1 ... v_dim" per line).
// Lookups for unknown tokens return a deterministic unit vector derived from
// hashing the token, so runs are reproducible with or without a vector file.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, uint64_t fallback_seed = 0x9e0feedULL)
      : dim_(dim), fallback_seed_(fallback_seed) {
    if (dim < 1) throw ConfigError("embedding dim must be positive");
  }

  int dim() const { return dim_; }
  void insert(const std::string& token, std::vector<float> v);
  bool contains(const std::string& token) const { return table_.count(token) > 0; }
  size_t size() const { return table_.size(); }

  // stored vector, or the hash-derived fallback for unknown tokens
  std::vector<float> lookup(const std::string& token) const;

 private:
  int dim_;
  uint64_t fallback_seed_;
  std::unordered_map<std::string, std::vector<float>> table_;
};

// Parses the whitespace-separated text format. A repeated token keeps the last
// definition; `warnings` (when non-null) collects a note per duplicate.
EmbeddingTable load_embeddings(const std::string& path, int dim,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace peohoi
