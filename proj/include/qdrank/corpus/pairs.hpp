#pragma once

#include <cstddef>
#include <vector>

#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/random.hpp"

namespace qdrank::corpus {

/// A (query, docA, docB) training unit, held by index into its dataset.
/// label is 1 iff doc_a is the clicked candidate.
struct PairExample {
  std::size_t query = 0;
  std::size_t doc_a = 0;
  std::size_t doc_b = 0;
  int label = 0;
  double weight = 1.0;

  friend bool operator==(const PairExample&, const PairExample&) = default;
};

/// Clicked-vs-unclicked pairs for one query: N-1 of them, each with a coin flip for document order.
inline std::vector<PairExample> build_pairs(const QueryRecord& q, Rng& rng, std::size_t query_index = 0) {
  const std::size_t n = q.candidates.size();
  if (n < 2) throw LabelError("query '" + q.query_id + "' has fewer than 2 candidates");
  if (q.clicked_index >= n)
    throw LabelError("query '" + q.query_id + "' has no clicked candidate in range");
  std::vector<PairExample> pairs;
  pairs.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == q.clicked_index) continue;
    PairExample p;
    p.query = query_index;
    p.weight = q.propensity_weight;
    if (rng.bernoulli(0.5)) {
      p.doc_a = q.clicked_index;
      p.doc_b = j;
      p.label = 1;
    } else {
      p.doc_a = j;
      p.doc_b = q.clicked_index;
      p.label = 0;
    }
    pairs.push_back(p);
  }
  return pairs;
}

inline std::vector<PairExample> build_pairs(const Dataset& ds, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "pairs"));
  std::vector<PairExample> all;
  all.reserve(ds.records.size() * (ds.schema.num_candidates > 0 ? ds.schema.num_candidates - 1 : 0));
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    auto p = build_pairs(ds.records[i], rng, i);
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

}  // namespace qdrank::corpus
