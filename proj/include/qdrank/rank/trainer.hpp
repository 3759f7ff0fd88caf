#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "qdrank/corpus/pairs.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/eval/metrics.hpp"
#include "qdrank/random.hpp"
#include "qdrank/rank/model.hpp"
#include "qdrank/rank/network.hpp"
#include "qdrank/rank/optimizer.hpp"

namespace qdrank::rank {

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-pair objective over the epoch
  double dev_mrr = 0.0;     // NaN when there is no dev split

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_dev_mrr = std::numeric_limits<double>::quiet_NaN();
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Pairs of an encoded split, in dataset order.
inline std::vector<PairRef> make_pair_refs(const std::vector<corpus::PairExample>& pairs,
                                           const std::vector<EncodedQuery>& queries) {
  std::vector<PairRef> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({&queries[p.query], static_cast<std::uint32_t>(p.doc_a), static_cast<std::uint32_t>(p.doc_b),
                   static_cast<double>(p.label), p.weight});
  return out;
}

/// Mini-batch training with a seeded shuffle each epoch. When a dev split is given, the
/// parameters with the best dev MRR are kept and training stops after `patience` epochs
/// without improvement. Leaves the chosen parameters in model.params.
inline TrainResult train(Model& model, const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                         const EpochCallback& on_epoch = {}) {
  if (train_set.records.empty()) throw DataError("empty training split");
  const auto& cfg = model.spec.config;
  const auto train_q = model.encode(train_set);
  const auto dev_q = model.encode(dev_set);
  const auto pairs = make_pair_refs(corpus::build_pairs(train_set, cfg.seed), train_q);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model.params);
  Gradients grads(model.params);
  Workspace ws;
  std::vector<std::size_t> order(pairs.size());
  std::vector<PairRef> batch;
  batch.reserve(cfg.batch_size);

  TrainResult result;
  Parameters best = model.params;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
      BatchOptions bo;
      bo.train_mode = true;
      bo.mix_rate = uses_cluster_head(cfg.variant) ? cfg.mix_rate : 0.0;
      bo.scale = 1.0 / static_cast<double>(batch.size());
      bo.dropout = &dropout_rng;
      grads.clear();
      const auto stats = run_batch(model.spec, model.params, batch, bo, ws, &grads);
      opt.step(model.params, grads);
      loss_sum += stats.objective(bo.mix_rate, 1.0);
    }
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = pairs.empty() ? 0.0 : loss_sum / static_cast<double>(pairs.size());
    if (!std::isfinite(row.train_loss)) throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
    row.dev_mrr = dev_q.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : eval::mrr(clicked_ranks(model.spec, model.params, dev_q));
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    if (dev_q.empty()) {
      result.best_epoch = epoch;
      continue;
    }
    if (result.best_epoch == 0 || row.dev_mrr > result.best_dev_mrr) {
      result.best_epoch = epoch;
      result.best_dev_mrr = row.dev_mrr;
      best = model.params;
      stale = 0;
    } else if (++stale >= cfg.patience && cfg.patience > 0) {
      result.early_stopped = true;
      break;
    }
  }
  if (!dev_q.empty()) model.params = std::move(best);
  return result;
}

}  // namespace qdrank::rank
