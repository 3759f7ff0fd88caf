#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qdrank/errors.hpp"

namespace qdrank::corpus {

struct TokenCount {
  std::string token;
  std::uint32_t count = 1;

  friend bool operator==(const TokenCount&, const TokenCount&) = default;
};

// Ordered maps keep iteration (and therefore serialization and embedding order) stable.
using SparseFields = std::map<std::string, std::vector<TokenCount>>;
using DenseFields = std::map<std::string, double>;

struct DocumentRecord {
  std::string doc_id;
  SparseFields sparse;
  DenseFields dense;

  friend bool operator==(const DocumentRecord&, const DocumentRecord&) = default;
};

/// One search request with its candidate list and exactly one click.
struct QueryRecord {
  std::string query_id;
  std::int64_t timestamp = 0;  // milliseconds; only used for chronological splits
  SparseFields sparse;
  DenseFields dense;
  std::vector<DocumentRecord> candidates;
  std::size_t clicked_index = 0;
  double propensity_weight = 1.0;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct Schema {
  std::vector<std::string> query_sparse;
  std::vector<std::string> query_dense;
  std::vector<std::string> doc_sparse;
  std::vector<std::string> doc_dense;
  std::size_t num_candidates = 6;

  friend bool operator==(const Schema&, const Schema&) = default;
};

enum class SplitTag { train, dev, test };

inline const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::dev: return "dev";
    case SplitTag::test: return "test";
  }
  return "train";
}

inline SplitTag split_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "dev") return SplitTag::dev;
  if (s == "test") return SplitTag::test;
  throw SchemaError("unknown split tag '" + s + "'");
}

struct Dataset {
  Schema schema;
  std::vector<QueryRecord> records;
  SplitTag split = SplitTag::train;
  /// Free-form provenance (serialized JSON text), carried through save/load untouched.
  std::string provenance;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

inline void check_fields(const SparseFields& sparse, const DenseFields& dense,
                         const std::vector<std::string>& sparse_names,
                         const std::vector<std::string>& dense_names, const std::string& where) {
  for (const auto& [field, tokens] : sparse) {
    if (!contains(sparse_names, field))
      throw SchemaError(where + ": undeclared sparse field '" + field + "'");
    for (const auto& tc : tokens)
      if (tc.count == 0) throw SchemaError(where + ": zero count for token '" + tc.token + "'");
  }
  for (const auto& [field, value] : dense) {
    if (!contains(dense_names, field))
      throw SchemaError(where + ": undeclared dense field '" + field + "'");
    if (!std::isfinite(value)) throw SchemaError(where + ": non-finite dense field '" + field + "'");
  }
}

}  // namespace detail

/// Throws SchemaError (or LabelError for click problems) if the record breaks an invariant.
inline void validate(const QueryRecord& q, const Schema& schema) {
  const std::string where = "query '" + q.query_id + "'";
  if (schema.num_candidates < 2) throw SchemaError("schema declares fewer than 2 candidates");
  if (q.candidates.size() != schema.num_candidates)
    throw SchemaError(where + ": expected " + std::to_string(schema.num_candidates) +
                      " candidates, found " + std::to_string(q.candidates.size()));
  if (q.clicked_index >= q.candidates.size())
    throw SchemaError(where + ": clicked_index " + std::to_string(q.clicked_index) +
                      " out of range");
  if (!(q.propensity_weight > 0.0) || !std::isfinite(q.propensity_weight))
    throw SchemaError(where + ": propensity_weight must be positive and finite");
  detail::check_fields(q.sparse, q.dense, schema.query_sparse, schema.query_dense, where);
  for (const auto& d : q.candidates)
    detail::check_fields(d.sparse, d.dense, schema.doc_sparse, schema.doc_dense,
                         where + " doc '" + d.doc_id + "'");
}

inline void validate(const Dataset& ds) {
  for (const auto& q : ds.records) validate(q, ds.schema);
}

/// Total token count of one sparse-field map (document length for BM25).
inline std::uint64_t token_total(const SparseFields& sparse) {
  std::uint64_t n = 0;
  for (const auto& [field, tokens] : sparse)
    for (const auto& tc : tokens) n += tc.count;
  return n;
}

}  // namespace qdrank::corpus
