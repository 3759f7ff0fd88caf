#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/errors.hpp"
#include "qdrank/random.hpp"
#include "qdrank/rank/encoding.hpp"
#include "qdrank/rank/losses.hpp"
#include "qdrank/rank/parameters.hpp"

namespace qdrank::rank {

/// One ordered document pair of an encoded query. label is 1 iff doc a is preferred.
struct PairRef {
  const EncodedQuery* query = nullptr;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double label = 0.0;
  double weight = 1.0;
};

struct BatchOptions {
  bool train_mode = false;   // enables dropout
  bool want_cluster = false;  // compute the cluster head even when mix_rate is 0
  double mix_rate = 0.0;
  double scale = 1.0;  // multiplies every gradient, typically 1 / batch size
  Rng* dropout = nullptr;
};

/// Weighted loss sums over a batch. The objective is scale * (rank + mix_rate * cluster + wide_reg).
struct BatchStats {
  double rank = 0.0;
  double cluster = 0.0;
  double wide_reg = 0.0;
  std::size_t pairs = 0;

  double objective(double mix_rate, double scale) const { return scale * (rank + mix_rate * cluster + wide_reg); }
};

/// Scratch buffers reused across batches.
struct Workspace {
  Eigen::MatrixXd x;
  std::vector<Eigen::MatrixXd> act;   // ReLU output per hidden layer
  std::vector<Eigen::MatrixXd> out;   // after dropout (aliases act when dropout is off)
  std::vector<Eigen::MatrixXd> mask;
  Eigen::RowVectorXd logit;
  Eigen::RowVectorXd prob;
  Eigen::MatrixXd head_act;
  Eigen::MatrixXd cluster_prob;
  bool cluster_valid = false;
};

namespace detail {

inline void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + where);
}

inline void assemble_record(const InputLayout& lay, const Parameters& params, const EncodedRecord& r,
                            std::size_t table_base, Eigen::Index offset, std::size_t n_tables, Eigen::Ref<Eigen::VectorXd> col) {
  const auto e = static_cast<Eigen::Index>(lay.embedding_dim);
  for (const auto& t : r.tokens)
    col.segment(offset + static_cast<Eigen::Index>(t.slot) * e, e) += t.count * params.tables[table_base + t.slot].col(t.row);
  const Eigen::Index dense_at = offset + static_cast<Eigen::Index>(n_tables) * e;
  for (std::size_t i = 0; i < r.dense.size(); ++i) col(dense_at + static_cast<Eigen::Index>(i)) = r.dense[i];
}

inline void scatter_record(const InputLayout& lay, const EncodedRecord& r, std::size_t table_base, Eigen::Index offset,
                           const Eigen::Ref<const Eigen::VectorXd>& dcol, Gradients& g) {
  const auto e = static_cast<Eigen::Index>(lay.embedding_dim);
  for (const auto& t : r.tokens) {
    const auto table = table_base + t.slot;
    g.tables[table].col(t.row) += t.count * dcol.segment(offset + static_cast<Eigen::Index>(t.slot) * e, e);
    g.touch(table, t.row);
  }
}

inline void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    auto c = z.col(j);
    const double m = c.maxCoeff();
    c = (c.array() - m).exp();
    c /= c.sum();
  }
}

}  // namespace detail

/// Builds the [query; docA; docB] input column for every pair.
inline void assemble_inputs(const ModelSpec& spec, const Parameters& params, std::span<const PairRef> batch,
                            Eigen::MatrixXd& x) {
  const auto& lay = spec.layout;
  x.setZero(static_cast<Eigen::Index>(lay.input_width()), static_cast<Eigen::Index>(batch.size()));
  const auto qw = static_cast<Eigen::Index>(lay.query_width());
  const auto dw = static_cast<Eigen::Index>(lay.doc_width());
  const std::size_t nq = lay.query_tables.size();
  const std::size_t nd = lay.doc_tables.size();
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& p = batch[j];
    auto col = x.col(static_cast<Eigen::Index>(j));
    detail::assemble_record(lay, params, p.query->query, 0, 0, nq, col);
    detail::assemble_record(lay, params, p.query->docs[p.a], nq, qw, nd, col);
    detail::assemble_record(lay, params, p.query->docs[p.b], nq, qw + dw, nd, col);
  }
}

/// Forward pass over a batch and, when `grads` is given, the exact reverse pass of the objective.
/// Per pair the objective is weight * (rank loss + mix_rate * cluster loss) + 0.5 * wide_l2 * sum of
/// squared active wide weights. With mix_rate 0 the cluster head is never touched on the way back.
inline BatchStats run_batch(const ModelSpec& spec, const Parameters& params, std::span<const PairRef> batch,
                            const BatchOptions& opt, Workspace& ws, Gradients* grads = nullptr) {
  const auto L = spec.hidden_layers();
  const auto B = static_cast<Eigen::Index>(batch.size());
  BatchStats stats;
  stats.pairs = batch.size();
  if (B == 0) return stats;

  assemble_inputs(spec, params, batch, ws.x);
  ws.act.resize(L);
  ws.out.resize(L);
  ws.mask.resize(L);
  const double rate = spec.config.dropout_rate;
  const bool dropout = opt.train_mode && rate > 0.0;
  if (dropout && opt.dropout == nullptr) throw ConfigError("dropout requested without a random stream");

  for (std::size_t l = 0; l < L; ++l) {
    const Eigen::MatrixXd& in = l == 0 ? ws.x : ws.out[l - 1];
    ws.act[l].noalias() = params.dense[spec.weight(l)] * in;
    ws.act[l].colwise() += params.dense[spec.bias(l)].col(0);
    detail::check_finite(ws.act[l], "hidden layer " + std::to_string(l));
    ws.act[l] = ws.act[l].cwiseMax(0.0);
    if (dropout) {
      const double keep = 1.0 - rate;
      auto& m = ws.mask[l];
      m.resize(ws.act[l].rows(), ws.act[l].cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = opt.dropout->uniform() < keep ? 1.0 / keep : 0.0;
      ws.out[l] = ws.act[l].cwiseProduct(m);
    } else {
      ws.out[l] = ws.act[l];
    }
  }
  const Eigen::MatrixXd& top = ws.out[L - 1];

  ws.logit.noalias() = params.dense[spec.out_weight()].transpose() * top;
  ws.logit.array() += params.dense[spec.out_bias()](0, 0);
  if (spec.has_wide()) {
    for (Eigen::Index j = 0; j < B; ++j)
      for (auto f : batch[static_cast<std::size_t>(j)].query->wide) ws.logit(j) += params.wide(f);
  }
  detail::check_finite(ws.logit, "output neuron");
  ws.prob.resize(B);
  for (Eigen::Index j = 0; j < B; ++j) ws.prob(j) = sigmoid(ws.logit(j));

  const bool head = spec.has_cluster_head() && (opt.mix_rate != 0.0 || opt.want_cluster);
  ws.cluster_valid = head;
  if (head) {
    if (spec.cluster_count == 0) throw ConfigError("cluster head has an empty cluster vocabulary");
    ws.head_act.noalias() = params.dense[spec.head_weight1()] * ws.out[spec.shared_layers() - 1];
    ws.head_act.colwise() += params.dense[spec.head_bias1()].col(0);
    detail::check_finite(ws.head_act, "cluster head hidden layer");
    ws.head_act = ws.head_act.cwiseMax(0.0);
    ws.cluster_prob.noalias() = params.dense[spec.head_weight2()] * ws.head_act;
    ws.cluster_prob.colwise() += params.dense[spec.head_bias2()].col(0);
    detail::check_finite(ws.cluster_prob, "cluster head output");
    detail::softmax_columns(ws.cluster_prob);
  }

  // Loss bookkeeping.
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& p = batch[static_cast<std::size_t>(j)];
    stats.rank += p.weight * loss_rank(ws.prob(j), p.label);
    if (head) {
      double lc = 0.0;
      for (const auto& [c, t] : p.query->cluster_target) lc -= t * std::log(std::max(ws.cluster_prob(c, j), kProbClamp));
      stats.cluster += p.weight * lc;
    }
    if (spec.has_wide())
      for (auto f : p.query->wide) stats.wide_reg += 0.5 * spec.config.wide_l2 * params.wide(f) * params.wide(f);
  }
  if (grads == nullptr) return stats;

  // ---- reverse pass ----
  Gradients& g = *grads;
  Eigen::RowVectorXd dlogit(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& p = batch[static_cast<std::size_t>(j)];
    const double pr = ws.prob(j);
    const bool clamped = pr < kProbClamp || pr > 1.0 - kProbClamp;
    dlogit(j) = clamped ? 0.0 : opt.scale * p.weight * (pr - p.label);
  }
  if (spec.has_wide()) {
    for (Eigen::Index j = 0; j < B; ++j)
      for (auto f : batch[static_cast<std::size_t>(j)].query->wide) {
        g.wide(f) += dlogit(j) + opt.scale * spec.config.wide_l2 * params.wide(f);
        g.touch_wide(f);
      }
  }
  g.dense[spec.out_weight()].noalias() += top * dlogit.transpose();
  g.dense[spec.out_bias()](0, 0) += dlogit.sum();
  Eigen::MatrixXd dtop = params.dense[spec.out_weight()] * dlogit;

  Eigen::MatrixXd dbranch;  // cluster-head gradient w.r.t. the branch layer's output
  if (head && opt.mix_rate != 0.0) {
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(ws.cluster_prob.rows(), B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const auto& p = batch[static_cast<std::size_t>(j)];
      if (p.query->cluster_target.empty()) continue;
      const double w = opt.scale * p.weight * opt.mix_rate;
      // d/dq of -t log max(q, clamp), then through the softmax Jacobian.
      double s = 0.0;
      for (const auto& [c, t] : p.query->cluster_target) {
        const double q = ws.cluster_prob(c, j);
        if (q > kProbClamp) s += q * (-t / q);
      }
      dz.col(j) = -s * w * ws.cluster_prob.col(j);
      for (const auto& [c, t] : p.query->cluster_target) {
        const double q = ws.cluster_prob(c, j);
        if (q > kProbClamp) dz(c, j) += w * q * (-t / q);
      }
    }
    g.dense[spec.head_weight2()].noalias() += dz * ws.head_act.transpose();
    g.dense[spec.head_bias2()].col(0) += dz.rowwise().sum();
    Eigen::MatrixXd dh = params.dense[spec.head_weight2()].transpose() * dz;
    dh = (ws.head_act.array() > 0.0).select(dh, 0.0);
    g.dense[spec.head_weight1()].noalias() += dh * ws.out[spec.shared_layers() - 1].transpose();
    g.dense[spec.head_bias1()].col(0) += dh.rowwise().sum();
    dbranch.noalias() = params.dense[spec.head_weight1()].transpose() * dh;
  }

  Eigen::MatrixXd d = std::move(dtop);
  for (std::size_t li = L; li-- > 0;) {
    if (dbranch.size() != 0 && li + 1 == spec.shared_layers()) d += dbranch;
    if (dropout) d = d.cwiseProduct(ws.mask[li]);
    d = (ws.act[li].array() > 0.0).select(d, 0.0);
    const Eigen::MatrixXd& in = li == 0 ? ws.x : ws.out[li - 1];
    g.dense[spec.weight(li)].noalias() += d * in.transpose();
    g.dense[spec.bias(li)].col(0) += d.rowwise().sum();
    Eigen::MatrixXd next = params.dense[spec.weight(li)].transpose() * d;
    d = std::move(next);
  }
  detail::check_finite(d, "input gradient");

  const auto& lay = spec.layout;
  const auto qw = static_cast<Eigen::Index>(lay.query_width());
  const auto dw = static_cast<Eigen::Index>(lay.doc_width());
  const std::size_t nq = lay.query_tables.size();
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& p = batch[static_cast<std::size_t>(j)];
    const auto col = d.col(j);
    detail::scatter_record(lay, p.query->query, 0, 0, col, g);
    detail::scatter_record(lay, p.query->docs[p.a], nq, qw, col, g);
    detail::scatter_record(lay, p.query->docs[p.b], nq, qw + dw, col, g);
  }
  return stats;
}

/// P(doc a preferred over doc b) for one query.
inline double forward_rank(const ModelSpec& spec, const Parameters& params, const EncodedQuery& q, std::size_t a,
                           std::size_t b, bool train_mode = false, Rng* dropout = nullptr) {
  Workspace ws;
  const PairRef pair{&q, static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0.0, 1.0};
  BatchOptions opt;
  opt.train_mode = train_mode;
  opt.dropout = dropout;
  run_batch(spec, params, std::span<const PairRef>(&pair, 1), opt, ws);
  return ws.prob(0);
}

/// Cluster-head distribution for one pair (QC-MTLRM only).
inline Eigen::VectorXd forward_cluster(const ModelSpec& spec, const Parameters& params, const EncodedQuery& q,
                                       std::size_t a, std::size_t b) {
  if (!spec.has_cluster_head()) throw ConfigError("forward_cluster needs the QC-MTLRM variant");
  if (spec.cluster_count == 0) throw ConfigError("cluster head has an empty cluster vocabulary");
  Workspace ws;
  const PairRef pair{&q, static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0.0, 1.0};
  BatchOptions opt;
  opt.want_cluster = true;
  run_batch(spec, params, std::span<const PairRef>(&pair, 1), opt, ws);
  return ws.cluster_prob.col(0);
}

/// Gradient of one pair's objective (dropout off).
inline Gradients backward(const ModelSpec& spec, const Parameters& params, const PairRef& pair, double mix_rate) {
  Gradients g(params);
  Workspace ws;
  BatchOptions opt;
  opt.mix_rate = mix_rate;
  run_batch(spec, params, std::span<const PairRef>(&pair, 1), opt, ws, &g);
  return g;
}

/// Objective value of a batch (dropout off), the quantity `backward` differentiates.
inline double objective(const ModelSpec& spec, const Parameters& params, std::span<const PairRef> batch,
                        double mix_rate, double scale = 1.0) {
  Workspace ws;
  BatchOptions opt;
  opt.mix_rate = mix_rate;
  opt.scale = scale;
  return run_batch(spec, params, batch, opt, ws).objective(mix_rate, scale);
}

/// score(d_a) = (1/N) * sum over b != a of P(d_a preferred over d_b), dropout off.
inline std::vector<double> score_documents(const ModelSpec& spec, const Parameters& params, const EncodedQuery& q,
                                           Workspace& ws) {
  const std::size_t n = q.docs.size();
  if (n < 2) throw InputError("scoring needs at least 2 candidates");
  std::vector<PairRef> pairs;
  pairs.reserve(n * (n - 1));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) pairs.push_back({&q, static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0.0, 1.0});
  run_batch(spec, params, pairs, BatchOptions{}, ws);
  std::vector<double> scores(n, 0.0);
  std::size_t k = 0;
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) s += ws.prob(static_cast<Eigen::Index>(k++));
    scores[a] = s / static_cast<double>(n);
  }
  return scores;
}

inline std::vector<double> score_documents(const ModelSpec& spec, const Parameters& params, const EncodedQuery& q) {
  Workspace ws;
  return score_documents(spec, params, q, ws);
}

}  // namespace qdrank::rank
