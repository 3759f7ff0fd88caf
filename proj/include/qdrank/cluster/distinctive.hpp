#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdrank/cluster/hierarchy.hpp"
#include "qdrank/cluster/representation.hpp"
#include "qdrank/errors.hpp"

namespace qdrank::cluster {

struct Distinctiveness {
  std::string token;
  double score = 0.0;  // cnt(token | cluster) / cnt(token)
  std::uint64_t in_cluster = 0;
  std::uint64_t overall = 0;
};

/// Top tokens of one cluster ranked by cnt(s|c)/cnt(s), descending, ties lexicographic.
/// Tokens whose overall count is below `min_support` are left out.
inline std::vector<Distinctiveness> distinctive_ngrams(const std::vector<ClusterAssignment>& assignments,
                                                       const std::vector<TokenCounts>& tokens,
                                                       const std::string& cluster_path, std::size_t top_n,
                                                       std::uint64_t min_support = 5) {
  if (assignments.size() != tokens.size())
    throw DimensionError("distinctive_ngrams: assignments and token lists differ in length");
  std::map<std::string, std::uint64_t> overall, inside;
  bool found = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool member =
        std::find(assignments[i].begin(), assignments[i].end(), cluster_path) != assignments[i].end();
    found = found || member;
    for (const auto& [t, c] : tokens[i]) {
      overall[t] += c;
      if (member) inside[t] += c;
    }
  }
  if (!found) throw LookupError("unknown cluster path '" + cluster_path + "'");

  std::vector<Distinctiveness> out;
  for (const auto& [t, c] : inside) {
    const auto total = overall.at(t);
    if (total < min_support || c == 0) continue;
    out.push_back({t, static_cast<double>(c) / static_cast<double>(total), c, total});
  }
  std::sort(out.begin(), out.end(), [](const Distinctiveness& a, const Distinctiveness& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

}  // namespace qdrank::cluster
