#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdrank/cluster/bm25.hpp"
#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/linalg/sparse_matrix.hpp"

namespace qdrank::cluster {

/// Raw query representation: a high-dimensional vector of non-negative token counts.
using QueryVector = linalg::SparseVector;

/// Token key ("field:token") -> aggregated count.
using TokenCounts = std::map<std::string, std::uint64_t>;

enum class CountTransform { raw, log1p };

inline const char* to_string(CountTransform t) { return t == CountTransform::raw ? "raw" : "log1p"; }

inline CountTransform count_transform_from_string(const std::string& s) {
  if (s == "raw") return CountTransform::raw;
  if (s == "log1p" || s == "log") return CountTransform::log1p;
  throw ConfigError("unknown count transform '" + s + "'");
}

struct RepresentationOptions {
  std::size_t top_k_docs = 4;
  // Sparse fields aggregated into the representation; situational fields stay out.
  std::vector<std::string> fields = {"ngram", "category", "structure"};
};

namespace detail {

inline bool wanted(const RepresentationOptions& opts, const std::string& field) {
  return opts.fields.empty() || std::find(opts.fields.begin(), opts.fields.end(), field) != opts.fields.end();
}

inline void add_fields(TokenCounts& out, const corpus::SparseFields& sparse, const RepresentationOptions& opts) {
  for (const auto& [field, tokens] : sparse) {
    if (!wanted(opts, field)) continue;
    for (const auto& tc : tokens) out[term_key(field, tc.token)] += tc.count;
  }
}

}  // namespace detail

/// Query tokens plus the tokens of its top_k baseline-ranked candidates (top_k is clamped
/// to the number of candidates). Query and document tokens are weighted equally.
inline TokenCounts aggregate_tokens(const corpus::QueryRecord& q, const std::vector<std::size_t>& ranked,
                                    const RepresentationOptions& opts) {
  TokenCounts out;
  detail::add_fields(out, q.sparse, opts);
  const std::size_t k = std::min(opts.top_k_docs, ranked.size());
  for (std::size_t r = 0; r < k; ++r) detail::add_fields(out, q.candidates.at(ranked[r]).sparse, opts);
  return out;
}

/// Token index space frozen on the training split (lexicographic order).
class FeatureVocabulary {
 public:
  FeatureVocabulary() = default;

  explicit FeatureVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  static FeatureVocabulary build(const std::vector<TokenCounts>& training) {
    std::vector<std::string> tokens;
    for (const auto& tc : training)
      for (const auto& [t, c] : tc) tokens.push_back(t);
    return FeatureVocabulary(std::move(tokens));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }

  std::optional<std::size_t> find(const std::string& t) const {
    const auto it = index_.find(t);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Counts as a sparse vector over the vocabulary; tokens outside it are dropped.
inline QueryVector vectorize(const TokenCounts& counts, const FeatureVocabulary& vocab) {
  std::vector<std::pair<std::size_t, double>> entries;
  for (const auto& [t, c] : counts)
    if (auto i = vocab.find(t)) entries.emplace_back(*i, static_cast<double>(c));
  return linalg::make_sparse_vector(vocab.size(), std::move(entries));
}

inline QueryVector build_query_representation(const corpus::QueryRecord& q, const std::vector<std::size_t>& ranked,
                                              const RepresentationOptions& opts, const FeatureVocabulary& vocab) {
  return vectorize(aggregate_tokens(q, ranked, opts), vocab);
}

inline QueryVector apply_transform(QueryVector v, CountTransform t) {
  if (t == CountTransform::log1p)
    for (auto& x : v.values) x = std::log1p(x);
  return v;
}

}  // namespace qdrank::cluster
