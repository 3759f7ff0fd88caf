#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdrank/corpus/types.hpp"

namespace qdrank::cluster {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  std::string recency_field = "recency";  // dense document feature used to break score ties
};

/// Term key shared by query and document sparse fields with the same name.
inline std::string term_key(const std::string& field, const std::string& token) {
  return field + ":" + token;
}

/// BM25 with document frequencies and average length taken from a training split.
/// Every candidate of every training query counts as one document.
class Bm25Index {
 public:
  Bm25Index() = default;

  static Bm25Index fit(const corpus::Dataset& train, const Bm25Params& params = {}) {
    Bm25Index idx;
    idx.params_ = params;
    double total_len = 0.0;
    for (const auto& q : train.records) {
      for (const auto& d : q.candidates) {
        ++idx.num_docs_;
        total_len += static_cast<double>(corpus::token_total(d.sparse));
        for (const auto& [field, tokens] : d.sparse)
          for (const auto& tc : tokens) ++idx.doc_freq_[term_key(field, tc.token)];
      }
    }
    idx.avg_len_ = idx.num_docs_ > 0 ? total_len / static_cast<double>(idx.num_docs_) : 0.0;
    return idx;
  }

  /// Restores an index from stored statistics.
  static Bm25Index from_stats(const Bm25Params& params, std::size_t num_docs, double avg_len,
                              std::unordered_map<std::string, std::size_t> doc_freq) {
    Bm25Index idx;
    idx.params_ = params;
    idx.num_docs_ = num_docs;
    idx.avg_len_ = avg_len;
    idx.doc_freq_ = std::move(doc_freq);
    return idx;
  }

  /// Non-negative IDF: ln(1 + (N - df + 0.5) / (df + 0.5)).
  double idf(const std::string& term) const {
    const auto it = doc_freq_.find(term);
    const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    const double n = static_cast<double>(num_docs_);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  /// Sum over distinct query terms present in the document.
  double score(const corpus::QueryRecord& q, const corpus::DocumentRecord& d) const {
    const double len = static_cast<double>(corpus::token_total(d.sparse));
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * (avg_len_ > 0.0 ? len / avg_len_ : 0.0));
    double s = 0.0;
    for (const auto& [field, qtokens] : q.sparse) {
      const auto dit = d.sparse.find(field);
      if (dit == d.sparse.end()) continue;
      for (const auto& qt : qtokens) {
        for (const auto& dt : dit->second) {
          if (dt.token != qt.token) continue;
          const double tf = dt.count;
          s += idf(term_key(field, qt.token)) * tf * (params_.k1 + 1.0) / (tf + norm);
        }
      }
    }
    return s;
  }

  /// Candidate indices, best first: BM25 descending, then recency descending, then doc_id.
  std::vector<std::size_t> rank(const corpus::QueryRecord& q) const {
    const std::size_t n = q.candidates.size();
    std::vector<double> scores(n), recency(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      scores[j] = score(q, q.candidates[j]);
      const auto it = q.candidates[j].dense.find(params_.recency_field);
      if (it != q.candidates[j].dense.end()) recency[j] = it->second;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      if (recency[a] != recency[b]) return recency[a] > recency[b];
      return q.candidates[a].doc_id < q.candidates[b].doc_id;
    });
    return order;
  }

  const Bm25Params& params() const { return params_; }
  std::size_t num_docs() const { return num_docs_; }
  double average_length() const { return avg_len_; }
  const std::unordered_map<std::string, std::size_t>& doc_freq() const { return doc_freq_; }

 private:
  Bm25Params params_;
  std::size_t num_docs_ = 0;
  double avg_len_ = 0.0;
  std::unordered_map<std::string, std::size_t> doc_freq_;
};

inline std::vector<std::size_t> baseline_rank(const corpus::QueryRecord& q, const Bm25Index& index) {
  return index.rank(q);
}

}  // namespace qdrank::cluster
