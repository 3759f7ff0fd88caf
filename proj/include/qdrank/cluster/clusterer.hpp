#pragma once

// End-to-end query clusterer: BM25 pre-ranking, query representation, and the fitted tree,
// plus the single-file artifact that stores all of it.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdrank/cluster/bm25.hpp"
#include "qdrank/cluster/hierarchy.hpp"
#include "qdrank/cluster/representation.hpp"
#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"

namespace qdrank::cluster {

inline constexpr const char* kTreeFormat = "qdrank-cluster-tree";
inline constexpr int kTreeVersion = 1;

struct ClustererOptions {
  ClusterParams cluster;
  RepresentationOptions representation;
  Bm25Params bm25;
};

class QueryClusterer {
 public:
  QueryClusterer() = default;
  QueryClusterer(ClustererOptions opts, Bm25Index bm25, FeatureVocabulary vocab, ClusterTree tree)
      : opts_(std::move(opts)), bm25_(std::move(bm25)), vocab_(std::move(vocab)), tree_(std::move(tree)) {}

  TokenCounts tokens(const corpus::QueryRecord& q) const {
    return aggregate_tokens(q, bm25_.rank(q), opts_.representation);
  }

  QueryVector vector(const corpus::QueryRecord& q) const { return vectorize(tokens(q), vocab_); }

  ClusterAssignment assign(const corpus::QueryRecord& q) const { return cluster::assign(vector(q), tree_); }

  std::vector<ClusterAssignment> assign(const corpus::Dataset& ds) const {
    std::vector<ClusterAssignment> out;
    out.reserve(ds.records.size());
    for (const auto& q : ds.records) out.push_back(assign(q));
    return out;
  }

  const ClustererOptions& options() const { return opts_; }
  const Bm25Index& bm25() const { return bm25_; }
  const FeatureVocabulary& vocabulary() const { return vocab_; }
  const ClusterTree& tree() const { return tree_; }

 private:
  ClustererOptions opts_;
  Bm25Index bm25_;
  FeatureVocabulary vocab_;
  ClusterTree tree_;
};

struct ClustererFit {
  QueryClusterer clusterer;
  std::vector<TokenCounts> tokens;            // per training query
  std::vector<ClusterAssignment> assignments;  // per training query, recorded while fitting
};

/// Fits on the training split only: BM25 statistics, vocabulary and tree.
inline ClustererFit fit_clusterer(const corpus::Dataset& train, const ClustererOptions& opts) {
  if (train.records.empty()) throw DataError("cannot fit query clusters on an empty training split");
  auto bm25 = Bm25Index::fit(train, opts.bm25);
  ClustererFit out;
  out.tokens.reserve(train.records.size());
  for (const auto& q : train.records) out.tokens.push_back(aggregate_tokens(q, bm25.rank(q), opts.representation));
  auto vocab = FeatureVocabulary::build(out.tokens);
  std::vector<QueryVector> vectors;
  vectors.reserve(out.tokens.size());
  for (const auto& t : out.tokens) vectors.push_back(vectorize(t, vocab));
  auto fit = fit_hierarchy(vectors, opts.cluster);
  out.assignments = std::move(fit.assignments);
  out.clusterer = QueryClusterer(opts, std::move(bm25), std::move(vocab), std::move(fit.tree));
  return out;
}

// ---------------------------------------------------------------------------------------------
// Serialization

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix payload has wrong size");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

inline json subspace_to_json(const linalg::SubspaceModel& m) {
  const Eigen::VectorXd& sv = m.singular_values;
  return {{"input_dim", m.input_dim},
          {"support", m.support},
          {"basis", matrix_to_json(m.basis)},
          {"singular_values", std::vector<double>(sv.data(), sv.data() + sv.size())},
          {"rotation", matrix_to_json(m.rotation)}};
}

inline linalg::SubspaceModel subspace_from_json(const json& j) {
  linalg::SubspaceModel m;
  j.at("input_dim").get_to(m.input_dim);
  j.at("support").get_to(m.support);
  m.basis = matrix_from_json(j.at("basis"));
  const auto sv = j.at("singular_values").get<std::vector<double>>();
  m.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
  m.rotation = matrix_from_json(j.at("rotation"));
  return m;
}

inline json node_to_json(const ClusterNode& n) {
  json children = json::array();
  for (const auto& c : n.children) children.push_back(node_to_json(c));
  json out = {{"path", n.path},
              {"member_count", n.member_count},
              {"pruned", n.pruned},
              {"degenerate", n.degenerate},
              {"children", std::move(children)}};
  if (n.subspace) out["subspace"] = subspace_to_json(*n.subspace);
  return out;
}

inline ClusterNode node_from_json(const json& j) {
  ClusterNode n;
  j.at("path").get_to(n.path);
  n.depth = n.path.size();
  j.at("member_count").get_to(n.member_count);
  j.at("pruned").get_to(n.pruned);
  j.at("degenerate").get_to(n.degenerate);
  if (j.contains("subspace")) n.subspace = subspace_from_json(j.at("subspace"));
  for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
  if (!n.children.empty() && !n.subspace) throw DataError("internal cluster node without a subspace");
  return n;
}

}  // namespace detail

inline nlohmann::json cluster_params_to_json(const ClusterParams& p) {
  return {{"depth", p.depth},
          {"branch", p.branch},
          {"min_leaf", p.min_leaf},
          {"count_transform", to_string(p.transform)},
          {"oversample", p.svd.oversample},
          {"power_iters", p.svd.power_iters},
          {"varimax_max_iters", p.varimax.max_iters},
          {"varimax_tol", p.varimax.tol},
          {"seed", p.seed}};
}

inline ClusterParams cluster_params_from_json(const nlohmann::json& j) {
  ClusterParams p;
  j.at("depth").get_to(p.depth);
  j.at("branch").get_to(p.branch);
  j.at("min_leaf").get_to(p.min_leaf);
  p.transform = count_transform_from_string(j.at("count_transform").get<std::string>());
  j.at("oversample").get_to(p.svd.oversample);
  j.at("power_iters").get_to(p.svd.power_iters);
  j.at("varimax_max_iters").get_to(p.varimax.max_iters);
  j.at("varimax_tol").get_to(p.varimax.tol);
  j.at("seed").get_to(p.seed);
  return p;
}

inline nlohmann::json clusterer_to_json(const QueryClusterer& c, const nlohmann::json& run_config = {}) {
  using nlohmann::json;
  const auto& o = c.options();
  // Sorted so the artifact is byte-stable regardless of hash-map iteration order.
  std::map<std::string, std::size_t> df(c.bm25().doc_freq().begin(), c.bm25().doc_freq().end());
  return {{"format", kTreeFormat},
          {"version", kTreeVersion},
          {"run_config", run_config},
          {"params", cluster_params_to_json(o.cluster)},
          {"representation", {{"top_k_docs", o.representation.top_k_docs}, {"fields", o.representation.fields}}},
          {"bm25",
           {{"k1", o.bm25.k1},
            {"b", o.bm25.b},
            {"recency_field", o.bm25.recency_field},
            {"num_docs", c.bm25().num_docs()},
            {"average_length", c.bm25().average_length()},
            {"doc_freq", df}}},
          {"vocabulary", c.vocabulary().tokens()},
          {"input_dim", c.tree().input_dim},
          {"root", detail::node_to_json(c.tree().root)}};
}

inline QueryClusterer clusterer_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kTreeFormat) throw DataError("not a qdrank cluster tree");
  if (j.value("version", 0) != kTreeVersion) throw DataError("unsupported cluster tree version");
  ClustererOptions o;
  o.cluster = cluster_params_from_json(j.at("params"));
  j.at("representation").at("top_k_docs").get_to(o.representation.top_k_docs);
  j.at("representation").at("fields").get_to(o.representation.fields);
  const auto& b = j.at("bm25");
  b.at("k1").get_to(o.bm25.k1);
  b.at("b").get_to(o.bm25.b);
  b.at("recency_field").get_to(o.bm25.recency_field);
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& [k, v] : b.at("doc_freq").items()) df.emplace(k, v.get<std::size_t>());
  auto bm25 = Bm25Index::from_stats(o.bm25, b.at("num_docs").get<std::size_t>(),
                                    b.at("average_length").get<double>(), std::move(df));
  FeatureVocabulary vocab(j.at("vocabulary").get<std::vector<std::string>>());
  ClusterTree tree;
  tree.params = o.cluster;
  j.at("input_dim").get_to(tree.input_dim);
  tree.root = detail::node_from_json(j.at("root"));
  if (tree.input_dim != vocab.size()) throw DataError("cluster tree vocabulary size mismatch");
  return QueryClusterer(std::move(o), std::move(bm25), std::move(vocab), std::move(tree));
}

inline void save_clusterer(const QueryClusterer& c, const std::filesystem::path& path,
                           const nlohmann::json& run_config = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << clusterer_to_json(c, run_config).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline QueryClusterer load_clusterer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cluster tree '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    return clusterer_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed cluster tree '" + path.string() + "': " + e.what());
  }
}

}  // namespace qdrank::cluster
