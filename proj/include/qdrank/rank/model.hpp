#pragma once

#include <optional>
#include <vector>

#include "qdrank/cluster/clusterer.hpp"
#include "qdrank/corpus/types.hpp"
#include "qdrank/eval/metrics.hpp"
#include "qdrank/rank/config.hpp"
#include "qdrank/rank/encoding.hpp"
#include "qdrank/rank/network.hpp"
#include "qdrank/rank/parameters.hpp"

namespace qdrank::rank {

/// A ranking model together with everything needed to score raw records.
struct Model {
  ModelSpec spec;
  FeatureEncoder encoder;
  Parameters params;
  std::optional<cluster::QueryClusterer> clusterer;  // present for every QC variant

  const ModelConfig& config() const { return spec.config; }

  cluster::ClusterAssignment clusters_of(const corpus::QueryRecord& q) const {
    if (!clusterer) return {};
    return clusterer->assign(q);
  }

  EncodedQuery encode(const corpus::QueryRecord& q) const { return encoder.encode(q, clusters_of(q)); }

  std::vector<EncodedQuery> encode(const corpus::Dataset& ds) const {
    std::vector<EncodedQuery> out;
    out.reserve(ds.records.size());
    for (const auto& q : ds.records) out.push_back(encode(q));
    return out;
  }

  std::vector<double> score(const corpus::QueryRecord& q) const { return score_documents(spec, params, encode(q)); }
};

inline ModelSpec make_spec(const ModelConfig& config, const FeatureEncoder& enc) {
  ModelSpec spec;
  spec.config = config;
  spec.layout = enc.layout(config.embedding_dim);
  spec.table_rows = enc.table_rows();
  spec.cluster_count = uses_cluster_head(config.variant) ? enc.clusters.size() : 0;
  spec.wide_size = uses_wide(config.variant) ? enc.wide.size() : 0;
  return spec;
}

/// Builds vocabularies from the training split and initializes parameters from config.seed.
/// QC variants need the fitted clusterer; DPRM ignores it.
inline Model make_model(const ModelConfig& config, const corpus::Dataset& train,
                        const cluster::QueryClusterer* clusterer = nullptr) {
  validate(config);
  if (train.records.empty()) throw DataError("empty training split");
  Model m;
  std::vector<cluster::ClusterAssignment> assignments;
  if (needs_tree(config.variant)) {
    if (clusterer == nullptr) throw ConfigError(std::string(to_string(config.variant)) + " requires a cluster tree");
    m.clusterer = *clusterer;
    if (uses_wide(config.variant)) assignments = clusterer->assign(train);
  }
  m.encoder = build_encoder(config, train, clusterer ? &clusterer->tree() : nullptr, assignments);
  m.spec = make_spec(config, m.encoder);
  m.params = init_parameters(m.spec);
  return m;
}

/// Rank of the clicked document for each encoded query.
inline std::vector<double> clicked_ranks(const ModelSpec& spec, const Parameters& params,
                                         const std::vector<EncodedQuery>& queries) {
  std::vector<double> ranks;
  ranks.reserve(queries.size());
  Workspace ws;
  for (const auto& q : queries) {
    const auto s = score_documents(spec, params, q, ws);
    ranks.push_back(eval::rank_of_clicked(s, q.clicked));
  }
  return ranks;
}

inline eval::MetricsReport evaluate(const Model& m, const corpus::Dataset& ds) {
  const auto enc = m.encode(ds);
  const auto ranks = clicked_ranks(m.spec, m.params, enc);
  std::vector<double> weights;
  weights.reserve(ds.records.size());
  for (const auto& q : ds.records) weights.push_back(q.propensity_weight);
  return eval::make_report(ranks, weights);
}

}  // namespace qdrank::rank
