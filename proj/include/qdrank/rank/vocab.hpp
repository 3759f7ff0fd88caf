#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdrank/cluster/hierarchy.hpp"
#include "qdrank/corpus/types.hpp"

namespace qdrank::rank {

inline constexpr std::uint32_t kUnk = 0;
inline constexpr const char* kUnkToken = "<UNK>";

/// Token -> row index of an embedding table. Row 0 is UNK; known tokens follow in
/// lexicographic order. Unknown and rare tokens both resolve to UNK.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  explicit TokenVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::uint32_t>(i + 1));
  }

  std::uint32_t lookup(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  std::size_t rows() const { return tokens_.size() + 1; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const TokenVocabulary& a, const TokenVocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Keeps tokens whose summed training count reaches min_freq.
inline TokenVocabulary build_token_vocabulary(const std::map<std::string, std::uint64_t>& counts,
                                              std::uint64_t min_freq) {
  std::vector<std::string> kept;
  for (const auto& [t, c] : counts)
    if (c >= min_freq) kept.push_back(t);
  return TokenVocabulary(std::move(kept));
}

/// One vocabulary per sparse field and role, named "q.<field>" / "d.<field>".
using FieldVocabularies = std::map<std::string, TokenVocabulary>;

inline std::string query_table(const std::string& field) { return "q." + field; }
inline std::string doc_table(const std::string& field) { return "d." + field; }
inline constexpr const char* kClusterTable = "q.cluster";

/// Built from the training split only.
inline FieldVocabularies build_vocab(const corpus::Dataset& train, std::uint64_t min_freq) {
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& f : train.schema.query_sparse) counts[query_table(f)];
  for (const auto& f : train.schema.doc_sparse) counts[doc_table(f)];
  for (const auto& q : train.records) {
    for (const auto& [f, toks] : q.sparse)
      for (const auto& tc : toks) counts[query_table(f)][tc.token] += tc.count;
    for (const auto& d : q.candidates)
      for (const auto& [f, toks] : d.sparse)
        for (const auto& tc : toks) counts[doc_table(f)][tc.token] += tc.count;
  }
  FieldVocabularies out;
  for (const auto& [table, c] : counts) out.emplace(table, build_token_vocabulary(c, min_freq));
  return out;
}

/// Flat index over every non-pruned cluster path of a tree (all levels).
class ClusterVocabulary {
 public:
  ClusterVocabulary() = default;
  explicit ClusterVocabulary(std::vector<std::string> paths) : paths_(std::move(paths)) {
    for (std::size_t i = 0; i < paths_.size(); ++i) index_.emplace(paths_[i], i);
  }
  static ClusterVocabulary from_tree(const cluster::ClusterTree& tree) {
    return ClusterVocabulary(cluster::cluster_paths(tree));
  }

  std::size_t size() const { return paths_.size(); }
  bool empty() const { return paths_.empty(); }
  const std::vector<std::string>& paths() const { return paths_; }
  std::optional<std::size_t> find(const std::string& p) const {
    const auto it = index_.find(p);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> paths_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Cross-product keys "<cluster path>&<field>=<token>": every cluster level of the query
/// crossed with every token of its wide fields. Each key holds exactly one cluster component.
inline std::vector<std::string> wide_cross_keys(const corpus::QueryRecord& q, const cluster::ClusterAssignment& clusters,
                                                const std::vector<std::string>& wide_fields) {
  std::vector<std::string> out;
  for (const auto& path : clusters)
    for (const auto& field : wide_fields) {
      const auto it = q.sparse.find(field);
      if (it == q.sparse.end()) continue;
      for (const auto& tc : it->second) out.push_back(path + "&" + field + "=" + tc.token);
    }
  return out;
}

/// Exact (collision-free) index of cross features observed in training.
class WideVocabulary {
 public:
  WideVocabulary() = default;
  explicit WideVocabulary(std::vector<std::string> keys) : keys_(std::move(keys)) {
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], static_cast<std::uint32_t>(i));
  }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::optional<std::uint32_t> find(const std::string& k) const {
    const auto it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace qdrank::rank
