#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdrank/cluster/hierarchy.hpp"
#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/rank/config.hpp"
#include "qdrank/rank/parameters.hpp"
#include "qdrank/rank/vocab.hpp"

namespace qdrank::rank {

/// A sparse token occurrence: slot within the record's table list, embedding row, count.
struct SparseEntry {
  std::uint32_t slot = 0;
  std::uint32_t row = kUnk;
  double count = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

struct EncodedRecord {
  std::vector<SparseEntry> tokens;
  std::vector<double> dense;  // schema order; missing values are 0

  friend bool operator==(const EncodedRecord&, const EncodedRecord&) = default;
};

struct EncodedQuery {
  EncodedRecord query;
  std::vector<EncodedRecord> docs;
  std::vector<std::uint32_t> wide;                                 // active wide feature ids
  std::vector<std::pair<std::uint32_t, double>> cluster_target;   // sparse p_c
  std::size_t clicked = 0;
  double weight = 1.0;

  friend bool operator==(const EncodedQuery&, const EncodedQuery&) = default;
};

/// Maps raw records onto the model's input layout. Holds every vocabulary a model needs.
struct FeatureEncoder {
  Variant variant = Variant::dprm;
  corpus::Schema schema;
  FieldVocabularies vocabs;
  TokenVocabulary cluster_inputs;  // QC-DPRM: paths as an extra query field
  ClusterVocabulary clusters;      // QC-MTLRM: softmax labels
  WideVocabulary wide;             // QC-WDPRM: cross features seen in training
  std::vector<std::string> wide_fields;

  InputLayout layout(std::size_t embedding_dim) const {
    InputLayout l;
    l.embedding_dim = embedding_dim;
    for (const auto& f : schema.query_sparse) l.query_tables.push_back(query_table(f));
    if (uses_cluster_input(variant)) l.query_tables.emplace_back(kClusterTable);
    l.query_dense = schema.query_dense;
    for (const auto& f : schema.doc_sparse) l.doc_tables.push_back(doc_table(f));
    l.doc_dense = schema.doc_dense;
    return l;
  }

  std::vector<std::size_t> table_rows() const {
    std::vector<std::size_t> rows;
    for (const auto& f : schema.query_sparse) rows.push_back(vocabs.at(query_table(f)).rows());
    if (uses_cluster_input(variant)) rows.push_back(cluster_inputs.rows());
    for (const auto& f : schema.doc_sparse) rows.push_back(vocabs.at(doc_table(f)).rows());
    return rows;
  }

  EncodedRecord encode_record(const corpus::SparseFields& sparse, const corpus::DenseFields& dense,
                              const std::vector<std::string>& sparse_fields, const std::vector<std::string>& dense_fields,
                              bool query_role) const {
    EncodedRecord r;
    for (std::size_t s = 0; s < sparse_fields.size(); ++s) {
      const auto it = sparse.find(sparse_fields[s]);
      if (it == sparse.end()) continue;
      const auto& vocab = vocabs.at(query_role ? query_table(sparse_fields[s]) : doc_table(sparse_fields[s]));
      for (const auto& tc : it->second)
        r.tokens.push_back({static_cast<std::uint32_t>(s), vocab.lookup(tc.token), static_cast<double>(tc.count)});
    }
    r.dense.reserve(dense_fields.size());
    for (const auto& f : dense_fields) {
      const auto it = dense.find(f);
      r.dense.push_back(it == dense.end() ? 0.0 : it->second);
    }
    return r;
  }

  /// `assignment` is the query's cluster path list; ignored by DPRM.
  EncodedQuery encode(const corpus::QueryRecord& q, const cluster::ClusterAssignment& assignment) const {
    EncodedQuery e;
    e.query = encode_record(q.sparse, q.dense, schema.query_sparse, schema.query_dense, true);
    if (uses_cluster_input(variant)) {
      const auto slot = static_cast<std::uint32_t>(schema.query_sparse.size());
      for (const auto& p : assignment) e.query.tokens.push_back({slot, cluster_inputs.lookup(p), 1.0});
    }
    e.docs.reserve(q.candidates.size());
    for (const auto& d : q.candidates)
      e.docs.push_back(encode_record(d.sparse, d.dense, schema.doc_sparse, schema.doc_dense, false));
    if (uses_wide(variant)) {
      for (const auto& key : wide_cross_keys(q, assignment, wide_fields))
        if (auto id = wide.find(key)) e.wide.push_back(*id);
    }
    if (uses_cluster_head(variant)) {
      std::vector<std::uint32_t> ids;
      for (const auto& p : assignment)
        if (auto id = clusters.find(p)) ids.push_back(static_cast<std::uint32_t>(*id));
      for (auto id : ids) e.cluster_target.emplace_back(id, 1.0 / static_cast<double>(ids.size()));
    }
    e.clicked = q.clicked_index;
    e.weight = q.propensity_weight;
    return e;
  }
};

/// Builds every vocabulary from the training split and its cluster assignments.
inline FeatureEncoder build_encoder(const ModelConfig& config, const corpus::Dataset& train,
                                    const cluster::ClusterTree* tree,
                                    const std::vector<cluster::ClusterAssignment>& train_assignments) {
  FeatureEncoder enc;
  enc.variant = config.variant;
  enc.schema = train.schema;
  enc.vocabs = build_vocab(train, config.vocab_min_freq);
  enc.wide_fields = config.wide_fields;
  if (needs_tree(config.variant)) {
    if (tree == nullptr) throw ConfigError(std::string(to_string(config.variant)) + " requires a cluster tree");
    enc.clusters = ClusterVocabulary::from_tree(*tree);
    if (uses_cluster_input(config.variant)) enc.cluster_inputs = TokenVocabulary(enc.clusters.paths());
    if (uses_cluster_head(config.variant) && enc.clusters.empty())
      throw ConfigError("cluster tree has no valid clusters for the cluster head");
    if (uses_wide(config.variant)) {
      if (train_assignments.size() != train.records.size())
        throw DimensionError("one cluster assignment per training query is required");
      std::vector<std::string> keys;
      for (std::size_t i = 0; i < train.records.size(); ++i)
        for (auto& k : wide_cross_keys(train.records[i], train_assignments[i], config.wide_fields))
          keys.push_back(std::move(k));
      enc.wide = WideVocabulary(std::move(keys));
    }
  }
  return enc;
}

}  // namespace qdrank::rank
