#pragma once

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "qdrank/errors.hpp"

namespace qdrank::eval {

/// Rank of the clicked document (1 = top). Ties count at their expected position:
/// higher + (tied + 1) / 2, where `tied` includes the clicked document itself.
inline double rank_of_clicked(std::span<const double> scores, std::size_t clicked) {
  if (clicked >= scores.size()) throw InputError("clicked index out of range");
  const double s = scores[clicked];
  if (!std::isfinite(s)) throw InputError("non-finite score");
  std::size_t higher = 0, tied = 0;
  for (double x : scores) {
    if (!std::isfinite(x)) throw InputError("non-finite score");
    if (x > s)
      ++higher;
    else if (x == s)
      ++tied;
  }
  return static_cast<double>(higher) + (static_cast<double>(tied) + 1.0) / 2.0;
}

inline double mrr(std::span<const double> ranks) {
  if (ranks.empty()) throw InputError("mrr of an empty rank list");
  double s = 0.0;
  for (double r : ranks) s += 1.0 / r;
  return s / static_cast<double>(ranks.size());
}

inline double success_at_k(std::span<const double> ranks, double k) {
  if (!(k >= 1.0)) throw InputError("success@k needs k >= 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (double r : ranks)
    if (r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

namespace detail {

inline void check_weighted(std::span<const double> ranks, std::span<const double> weights) {
  if (ranks.size() != weights.size()) throw DimensionError("ranks and weights differ in length");
  if (ranks.empty()) throw InputError("weighted metric of an empty rank list");
  for (double w : weights)
    if (!(w > 0.0)) throw InputError("weights must be positive");
}

}  // namespace detail

/// Weighted mean reciprocal rank: sum(w / rank) / sum(w).
inline double wmrr(std::span<const double> ranks, std::span<const double> weights) {
  detail::check_weighted(ranks, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    num += weights[i] / ranks[i];
    den += weights[i];
  }
  return num / den;
}

/// Weighted average click position: sum(w * rank) / sum(w). Lower is better.
inline double wacp(std::span<const double> ranks, std::span<const double> weights) {
  detail::check_weighted(ranks, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    num += weights[i] * ranks[i];
    den += weights[i];
  }
  return num / den;
}

struct MetricsReport {
  double mrr = 0.0;
  std::map<int, double> success_at;  // k -> success@k
  double wmrr = 0.0;
  double wacp = 0.0;
  std::vector<double> per_query_rr;
  std::vector<double> ranks;
  std::size_t n_queries = 0;
};

inline MetricsReport make_report(std::span<const double> ranks, std::span<const double> weights,
                                 std::span<const int> ks = std::span<const int>()) {
  static const int default_ks[] = {1, 5};
  if (ks.empty()) ks = default_ks;
  MetricsReport r;
  r.n_queries = ranks.size();
  r.ranks.assign(ranks.begin(), ranks.end());
  r.per_query_rr.reserve(ranks.size());
  for (double x : ranks) r.per_query_rr.push_back(1.0 / x);
  r.mrr = mrr(ranks);
  for (int k : ks) r.success_at[k] = success_at_k(ranks, k);
  r.wmrr = wmrr(ranks, weights);
  r.wacp = wacp(ranks, weights);
  return r;
}

}  // namespace qdrank::eval
