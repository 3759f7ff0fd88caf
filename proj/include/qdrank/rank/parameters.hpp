#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/random.hpp"
#include "qdrank/rank/config.hpp"

namespace qdrank::rank {

/// Where each feature lands in the concatenated [query; docA; docB] input vector.
/// A record segment is one embedding_dim slice per sparse table followed by its dense features.
struct InputLayout {
  std::vector<std::string> query_tables;  // table names, segment order
  std::vector<std::string> query_dense;
  std::vector<std::string> doc_tables;
  std::vector<std::string> doc_dense;
  std::size_t embedding_dim = 0;

  std::size_t query_width() const { return query_tables.size() * embedding_dim + query_dense.size(); }
  std::size_t doc_width() const { return doc_tables.size() * embedding_dim + doc_dense.size(); }
  std::size_t input_width() const { return query_width() + 2 * doc_width(); }
  std::size_t table_count() const { return query_tables.size() + doc_tables.size(); }
  /// Global table id of a document slot.
  std::size_t doc_table_id(std::size_t slot) const { return query_tables.size() + slot; }
};

/// Everything needed to interpret a Parameters object.
struct ModelSpec {
  ModelConfig config;
  InputLayout layout;
  std::vector<std::size_t> table_rows;  // rows (vocabulary + UNK) per table id
  std::size_t cluster_count = 0;        // softmax width, QC-MTLRM
  std::size_t wide_size = 0;            // wide weight count, QC-WDPRM

  std::size_t hidden_layers() const { return config.hidden_sizes.size(); }
  /// Hidden layers feeding the cluster head; layers above them belong to the rank task alone.
  std::size_t shared_layers() const { return resolved_shared_layers(config); }
  bool has_cluster_head() const { return uses_cluster_head(config.variant); }
  bool has_wide() const { return uses_wide(config.variant); }

  // Dense block indices.
  std::size_t weight(std::size_t layer) const { return 2 * layer; }
  std::size_t bias(std::size_t layer) const { return 2 * layer + 1; }
  std::size_t out_weight() const { return 2 * hidden_layers(); }
  std::size_t out_bias() const { return 2 * hidden_layers() + 1; }
  std::size_t head_weight1() const { return 2 * hidden_layers() + 2; }
  std::size_t head_bias1() const { return 2 * hidden_layers() + 3; }
  std::size_t head_weight2() const { return 2 * hidden_layers() + 4; }
  std::size_t head_bias2() const { return 2 * hidden_layers() + 5; }
  std::size_t dense_block_count() const { return 2 * hidden_layers() + 2 + (has_cluster_head() ? 4 : 0); }
  /// Blocks of the hidden layers both tasks use (QC-MTLRM); they come first in `dense`.
  std::size_t shared_block_count() const { return 2 * shared_layers(); }
};

/// Embedding tables are stored one column per token (embedding_dim x rows).
/// Dense blocks: per hidden layer W (out x in) and b (out x 1); then the output neuron
/// w (h_last x 1) and b (1 x 1); then, for QC-MTLRM, the cluster head W1, b1, W2, b2. The head
/// reads the activations of hidden layer shared_layers() - 1.
struct Parameters {
  std::vector<Eigen::MatrixXd> tables;
  std::vector<Eigen::MatrixXd> dense;
  Eigen::VectorXd wide;

  friend bool operator==(const Parameters& a, const Parameters& b) {
    if (a.tables.size() != b.tables.size() || a.dense.size() != b.dense.size()) return false;
    for (std::size_t i = 0; i < a.tables.size(); ++i)
      if (a.tables[i].rows() != b.tables[i].rows() || a.tables[i].cols() != b.tables[i].cols() ||
          a.tables[i] != b.tables[i])
        return false;
    for (std::size_t i = 0; i < a.dense.size(); ++i)
      if (a.dense[i].rows() != b.dense[i].rows() || a.dense[i].cols() != b.dense[i].cols() || a.dense[i] != b.dense[i])
        return false;
    return a.wide.size() == b.wide.size() && a.wide == b.wide;
  }
};

inline std::vector<std::pair<Eigen::Index, Eigen::Index>> dense_shapes(const ModelSpec& spec) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  auto in = static_cast<Eigen::Index>(spec.layout.input_width());
  for (auto h : spec.config.hidden_sizes) {
    const auto out = static_cast<Eigen::Index>(h);
    shapes.emplace_back(out, in);
    shapes.emplace_back(out, 1);
    in = out;
  }
  shapes.emplace_back(in, 1);
  shapes.emplace_back(1, 1);
  if (spec.has_cluster_head()) {
    const auto hc = static_cast<Eigen::Index>(spec.config.cluster_head_hidden);
    const auto c = static_cast<Eigen::Index>(spec.cluster_count);
    const auto branch = static_cast<Eigen::Index>(spec.config.hidden_sizes[spec.shared_layers() - 1]);
    shapes.emplace_back(hc, branch);
    shapes.emplace_back(hc, 1);
    shapes.emplace_back(c, hc);
    shapes.emplace_back(c, 1);
  }
  return shapes;
}

inline Parameters zero_parameters(const ModelSpec& spec) {
  Parameters p;
  const auto e = static_cast<Eigen::Index>(spec.layout.embedding_dim);
  for (auto rows : spec.table_rows) p.tables.push_back(Eigen::MatrixXd::Zero(e, static_cast<Eigen::Index>(rows)));
  for (auto [r, c] : dense_shapes(spec)) p.dense.push_back(Eigen::MatrixXd::Zero(r, c));
  p.wide = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.has_wide() ? spec.wide_size : 0));
  return p;
}

namespace detail {

inline void fill_normal(Eigen::MatrixXd& m, Rng& rng, double stddev) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = stddev * rng.normal();
}

}  // namespace detail

/// Embeddings uniform(-0.05, 0.05); hidden weights He-normal; output weights LeCun-normal;
/// biases and wide weights zero. Every group draws from its own derived stream, so adding a
/// table or a head never changes the initial values of the others.
inline Parameters init_parameters(const ModelSpec& spec) {
  Parameters p = zero_parameters(spec);
  const auto seed = spec.config.seed;
  const auto& lay = spec.layout;
  for (std::size_t t = 0; t < p.tables.size(); ++t) {
    const auto& name = t < lay.query_tables.size() ? lay.query_tables[t] : lay.doc_tables[t - lay.query_tables.size()];
    Rng rng(derive_seed(seed, "embedding:" + name));
    auto& m = p.tables[t];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-0.05, 0.05);
  }
  for (std::size_t l = 0; l < spec.hidden_layers(); ++l) {
    Rng rng(derive_seed(seed, "hidden:" + std::to_string(l)));
    auto& w = p.dense[spec.weight(l)];
    detail::fill_normal(w, rng, std::sqrt(2.0 / static_cast<double>(w.cols())));
  }
  {
    Rng rng(derive_seed(seed, "output"));
    auto& w = p.dense[spec.out_weight()];
    detail::fill_normal(w, rng, std::sqrt(1.0 / static_cast<double>(w.rows())));
  }
  if (spec.has_cluster_head()) {
    Rng rng(derive_seed(seed, "cluster_head"));
    auto& w1 = p.dense[spec.head_weight1()];
    detail::fill_normal(w1, rng, std::sqrt(2.0 / static_cast<double>(w1.cols())));
    auto& w2 = p.dense[spec.head_weight2()];
    detail::fill_normal(w2, rng, std::sqrt(1.0 / static_cast<double>(w2.cols())));
  }
  return p;
}

/// Gradient buffers shaped like Parameters. Embedding and wide gradients are sparse: only the
/// touched columns/entries are nonzero, and only those are listed in `touched`.
struct Gradients {
  std::vector<Eigen::MatrixXd> tables;
  std::vector<std::vector<std::uint32_t>> touched;
  std::vector<std::vector<char>> touched_flag;
  std::vector<Eigen::MatrixXd> dense;
  Eigen::VectorXd wide;
  std::vector<std::uint32_t> wide_touched;
  std::vector<char> wide_flag;

  explicit Gradients(const Parameters& shape) {
    for (const auto& t : shape.tables) {
      tables.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
      touched.emplace_back();
      touched_flag.emplace_back(static_cast<std::size_t>(t.cols()), 0);
    }
    for (const auto& d : shape.dense) dense.push_back(Eigen::MatrixXd::Zero(d.rows(), d.cols()));
    wide = Eigen::VectorXd::Zero(shape.wide.size());
    wide_flag.assign(static_cast<std::size_t>(shape.wide.size()), 0);
  }

  void touch(std::size_t table, std::uint32_t row) {
    if (!touched_flag[table][row]) {
      touched_flag[table][row] = 1;
      touched[table].push_back(row);
    }
  }

  void touch_wide(std::uint32_t i) {
    if (!wide_flag[i]) {
      wide_flag[i] = 1;
      wide_touched.push_back(i);
    }
  }

  void clear() {
    for (std::size_t t = 0; t < tables.size(); ++t) {
      for (auto r : touched[t]) {
        tables[t].col(r).setZero();
        touched_flag[t][r] = 0;
      }
      touched[t].clear();
    }
    for (auto& d : dense) d.setZero();
    for (auto i : wide_touched) {
      wide(i) = 0.0;
      wide_flag[i] = 0;
    }
    wide_touched.clear();
  }
};

}  // namespace qdrank::rank
