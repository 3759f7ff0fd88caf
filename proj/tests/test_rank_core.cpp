#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qdrank/rank/losses.hpp"
#include "qdrank/rank/model.hpp"
#include "qdrank/rank/network.hpp"
#include "qdrank/rank/optimizer.hpp"

using namespace qdrank;
using namespace qdrank::rank;

namespace {

const fixtures::TinyWorld& world() {
  static const fixtures::TinyWorld w(300);
  return w;
}

constexpr Variant kAllVariants[] = {Variant::dprm, Variant::qc_dprm, Variant::qc_wdprm, Variant::qc_mtlrm};

std::vector<PairRef> sample_pairs(const std::vector<EncodedQuery>& qs, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PairRef> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = qs[rng.below(qs.size())];
    const auto a = static_cast<std::uint32_t>(rng.below(q.docs.size()));
    auto b = static_cast<std::uint32_t>(rng.below(q.docs.size() - 1));
    if (b >= a) ++b;
    out.push_back({&q, a, b, rng.bernoulli(0.5) ? 1.0 : 0.0, rng.uniform(0.5, 2.0)});
  }
  return out;
}

/// Plain-loop forward pass: input assembly, ReLU layers, sigmoid output, wide term.
double reference_probability(const Model& m, const EncodedQuery& q, std::size_t a, std::size_t b) {
  const auto& lay = m.spec.layout;
  const std::size_t e = lay.embedding_dim;
  std::vector<double> x(lay.input_width(), 0.0);
  auto put = [&](const EncodedRecord& r, std::size_t first_table, std::size_t n_tables, std::size_t offset) {
    for (const auto& t : r.tokens)
      for (std::size_t k = 0; k < e; ++k)
        x[offset + t.slot * e + k] += t.count * m.params.tables[first_table + t.slot](static_cast<Eigen::Index>(k), t.row);
    for (std::size_t i = 0; i < r.dense.size(); ++i) x[offset + n_tables * e + i] = r.dense[i];
  };
  const std::size_t nq = lay.query_tables.size(), nd = lay.doc_tables.size();
  put(q.query, 0, nq, 0);
  put(q.docs[a], nq, nd, lay.query_width());
  put(q.docs[b], nq, nd, lay.query_width() + lay.doc_width());
  std::vector<double> h = x;
  for (std::size_t l = 0; l < m.spec.hidden_layers(); ++l) {
    const auto& w = m.params.dense[m.spec.weight(l)];
    const auto& bias = m.params.dense[m.spec.bias(l)];
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = bias(i, 0);
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * h[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = s > 0 ? s : 0;
    }
    h = next;
  }
  const auto& wo = m.params.dense[m.spec.out_weight()];
  double z = m.params.dense[m.spec.out_bias()](0, 0);
  for (std::size_t i = 0; i < h.size(); ++i) z += wo(static_cast<Eigen::Index>(i), 0) * h[i];
  for (auto f : q.wide) z += m.params.wide(f);
  return 1 / (1 + std::exp(-z));
}

}  // namespace

TEST(Vocabulary, UnkIsRowZeroAndRareTokensMapToIt) {
  const TokenVocabulary v({"b", "a"});
  EXPECT_EQ(v.lookup("a"), 1u);
  EXPECT_EQ(v.lookup("b"), 2u);
  EXPECT_EQ(v.lookup("zzz"), kUnk);
  EXPECT_EQ(v.rows(), 3u);
  const auto kept = build_token_vocabulary({{"x", 1}, {"y", 3}}, 2);
  EXPECT_EQ(kept.lookup("x"), kUnk);
  EXPECT_EQ(kept.lookup("y"), 1u);
}

TEST(Vocabulary, WideKeysCarryOneClusterComponent) {
  corpus::QueryRecord q;
  q.sparse["language"] = {{"en", 1}};
  q.sparse["ngram"] = {{"hello", 1}};
  const auto keys = wide_cross_keys(q, {"2", "2.1"}, {"language", "category"});
  EXPECT_EQ(keys, (std::vector<std::string>{"2&language=en", "2.1&language=en"}));
}

TEST(Encoding, LayoutPerVariant) {
  const auto dprm = world().model(Variant::dprm);
  const auto qc = world().model(Variant::qc_dprm);
  const auto mtl = world().model(Variant::qc_mtlrm);
  EXPECT_EQ(dprm.spec.layout.query_tables, (std::vector<std::string>{"q.language", "q.ngram"}));
  EXPECT_EQ(qc.spec.layout.query_tables.back(), std::string(kClusterTable));
  EXPECT_EQ(mtl.spec.layout.input_width(), dprm.spec.layout.input_width());
  EXPECT_EQ(dprm.spec.layout.input_width(), (2 * 4 + 1) + 2 * (2 * 4 + 2));
  EXPECT_GT(mtl.spec.cluster_count, 0u);
  EXPECT_EQ(mtl.params.dense.size(), dprm.params.dense.size() + 4);
}

TEST(Encoding, ClusterTargetIsUniformOverAssignedPaths) {
  const auto mtl = world().model(Variant::qc_mtlrm);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& q = world().corpus.train.records[i];
    const auto e = mtl.encode(q);
    const auto paths = mtl.clusters_of(q);
    ASSERT_EQ(e.cluster_target.size(), paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) {
      EXPECT_EQ(mtl.encoder.clusters.paths()[e.cluster_target[k].first], paths[k]);
      EXPECT_DOUBLE_EQ(e.cluster_target[k].second, 1.0 / static_cast<double>(paths.size()));
    }
  }
}

TEST(Encoding, UnseenTokensUseUnk) {
  const auto m = world().model(Variant::dprm);
  auto q = world().corpus.train.records[0];
  q.sparse["ngram"] = {{"never-seen-token", 2}};
  const auto e = m.encode(q);
  bool found = false;
  for (const auto& t : e.query.tokens)
    if (t.slot == 1) {
      EXPECT_EQ(t.row, kUnk);
      EXPECT_EQ(t.count, 2.0);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Encoding, QcVariantsNeedATree) {
  EXPECT_THROW(make_model(fixtures::tiny_config(Variant::qc_mtlrm), world().corpus.train), ConfigError);
  EXPECT_NO_THROW(make_model(fixtures::tiny_config(Variant::dprm), world().corpus.train));
  corpus::Dataset empty;
  EXPECT_THROW(make_model(fixtures::tiny_config(Variant::dprm), empty), DataError);
}

TEST(Network, ForwardMatchesScalarReference) {
  for (auto v : kAllVariants) {
    auto m = world().model(v);
    fixtures::randomize(m.params, 5, 0.3);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto e = m.encode(world().corpus.test.records[i]);
      EXPECT_NEAR(forward_rank(m.spec, m.params, e, 0, 3), reference_probability(m, e, 0, 3), 1e-12) << to_string(v);
      EXPECT_NEAR(forward_rank(m.spec, m.params, e, 4, 1), reference_probability(m, e, 4, 1), 1e-12) << to_string(v);
    }
  }
}

TEST(Network, GradientsMatchFiniteDifferences) {
  for (auto v : kAllVariants) {
    auto m = world().model(v);
    fixtures::randomize(m.params, 17, 0.4);
    const auto qs = m.encode(world().corpus.train);
    const auto batch = sample_pairs(qs, 6, 3);
    const double mix = uses_cluster_head(v) ? 0.7 : 0.0;
    Gradients g(m.params);
    Workspace ws;
    BatchOptions opt;
    opt.mix_rate = mix;
    opt.scale = 1.0 / 6;
    run_batch(m.spec, m.params, batch, opt, ws, &g);
    Parameters probe = m.params;
    const double err = oracle::max_gradient_error(probe, g, [&] { return objective(m.spec, probe, batch, mix, 1.0 / 6); });
    EXPECT_LT(err, 1e-4) << to_string(v);
  }
}

TEST(Network, ClusterHeadBranchesBelowTheRankTower) {
  auto cfg = fixtures::tiny_config(Variant::qc_mtlrm);
  cfg.hidden_sizes = {8, 6, 4};
  for (std::size_t shared : {1u, 2u, 3u}) {
    cfg.shared_layers = shared;
    auto m = world().model(cfg);
    ASSERT_EQ(m.spec.shared_layers(), shared);
    EXPECT_EQ(m.params.dense[m.spec.head_weight1()].cols(), static_cast<Eigen::Index>(cfg.hidden_sizes[shared - 1]));
    fixtures::randomize(m.params, 23 + shared, 0.4);
    const auto qs = m.encode(world().corpus.train);
    const auto batch = sample_pairs(qs, 6, 9);
    Gradients g(m.params);
    Workspace ws;
    BatchOptions opt;
    opt.mix_rate = 1.3;
    opt.scale = 1.0 / 6;
    run_batch(m.spec, m.params, batch, opt, ws, &g);
    Parameters probe = m.params;
    const double err = oracle::max_gradient_error(probe, g, [&] { return objective(m.spec, probe, batch, 1.3, 1.0 / 6); });
    EXPECT_LT(err, 1e-4) << "shared_layers=" << shared;
    // Layers above the branch never see the cluster loss.
    Gradients rank_only(m.params);
    BatchOptions ro = opt;
    ro.mix_rate = 0.0;
    run_batch(m.spec, m.params, batch, ro, ws, &rank_only);
    for (std::size_t l = shared; l < cfg.hidden_sizes.size(); ++l)
      EXPECT_TRUE(g.dense[m.spec.weight(l)].isApprox(rank_only.dense[m.spec.weight(l)], 1e-12)) << l;
    EXPECT_FALSE(g.dense[m.spec.weight(shared - 1)].isApprox(rank_only.dense[m.spec.weight(shared - 1)], 1e-6));
  }
}

TEST(Network, SharedLayersDefaultAndValidation) {
  auto cfg = fixtures::tiny_config(Variant::qc_mtlrm);
  EXPECT_EQ(resolved_shared_layers(cfg), 1u);
  cfg.hidden_sizes = {8};
  EXPECT_EQ(resolved_shared_layers(cfg), 1u);
  cfg.hidden_sizes = {8, 6, 4};
  EXPECT_EQ(resolved_shared_layers(cfg), 2u);
  cfg.shared_layers = 4;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.shared_layers = 3;
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Network, ClusterHeadIsSkippedAtZeroMixRate) {
  auto mtl = world().model(Variant::qc_mtlrm);
  const auto qs = mtl.encode(world().corpus.train);
  const auto batch = sample_pairs(qs, 8, 4);
  const auto g = [&] {
    Gradients out(mtl.params);
    Workspace ws;
    run_batch(mtl.spec, mtl.params, batch, BatchOptions{}, ws, &out);
    return out;
  }();
  for (std::size_t i = mtl.spec.head_weight1(); i <= mtl.spec.head_bias2(); ++i) EXPECT_EQ(g.dense[i].squaredNorm(), 0.0);
}

TEST(Network, ZeroMixRateSharedGradientsEqualRankOnly) {
  const auto dprm = world().model(Variant::dprm);
  auto mtl = world().model(Variant::qc_mtlrm);
  for (std::size_t i = 0; i < dprm.params.tables.size(); ++i) ASSERT_EQ(dprm.params.tables[i], mtl.params.tables[i]);
  for (std::size_t i = 0; i < dprm.spec.dense_block_count(); ++i) ASSERT_EQ(dprm.params.dense[i], mtl.params.dense[i]);
  const auto qd = dprm.encode(world().corpus.train);
  const auto qm = mtl.encode(world().corpus.train);
  const auto bd = sample_pairs(qd, 32, 5);
  const auto bm = sample_pairs(qm, 32, 5);
  Gradients gd(dprm.params), gm(mtl.params);
  Workspace w1, w2;
  BatchOptions opt;
  opt.scale = 1.0 / 32;
  run_batch(dprm.spec, dprm.params, bd, opt, w1, &gd);
  run_batch(mtl.spec, mtl.params, bm, opt, w2, &gm);
  for (std::size_t i = 0; i < dprm.spec.dense_block_count(); ++i) EXPECT_EQ(gd.dense[i], gm.dense[i]);
  for (std::size_t i = 0; i < gd.tables.size(); ++i) EXPECT_EQ(gd.tables[i], gm.tables[i]);
}

TEST(Network, ScoresAverageOrderedPairProbabilities) {
  const auto m = world().model(Variant::dprm);
  const auto e = m.encode(world().corpus.test.records[0]);
  const auto s = score_documents(m.spec, m.params, e);
  ASSERT_EQ(s.size(), 6u);
  for (std::size_t a = 0; a < 6; ++a) {
    double expected = 0;
    for (std::size_t b = 0; b < 6; ++b)
      if (a != b) expected += forward_rank(m.spec, m.params, e, a, b);
    EXPECT_NEAR(s[a], expected / 6, 1e-14);
  }
}

TEST(Network, NonFiniteActivationsRaiseNumericError) {
  auto m = world().model(Variant::dprm);
  m.params.dense[m.spec.weight(0)](0, 0) = std::numeric_limits<double>::infinity();
  const auto e = m.encode(world().corpus.test.records[0]);
  EXPECT_THROW(forward_rank(m.spec, m.params, e, 0, 1), NumericError);
}

TEST(Network, ClusterDistributionSumsToOne) {
  const auto m = world().model(Variant::qc_mtlrm);
  const auto e = m.encode(world().corpus.test.records[0]);
  const auto p = forward_cluster(m.spec, m.params, e, 0, 1);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  const auto d = world().model(Variant::dprm);
  EXPECT_THROW(forward_cluster(d.spec, d.params, d.encode(world().corpus.test.records[0]), 0, 1), ConfigError);
}

TEST(Losses, JointFormsAgree) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> r(1 + rng.below(64)), c(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = rng.uniform(0, 5);
      c[i] = rng.uniform(0, 5);
    }
    const double mix = rng.uniform(0, 3);
    EXPECT_NEAR(loss_joint(r, c, mix), loss_joint_separated(r, c, mix), 1e-12);
  }
}

TEST(Losses, ClusterLossIsEntropyPlusKl) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<double> p(k), q(k);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
      q[i] = rng.uniform(0.01, 1);
      sp += p[i];
      sq += q[i];
    }
    if (sp == 0) p[0] = sp = 1;
    for (auto& x : p) x /= sp;
    for (auto& x : q) x /= sq;
    EXPECT_NEAR(loss_cluster(q, p), oracle::entropy_plus_kl(p, q), 1e-10);
  }
}

TEST(Losses, RankLossAndClamp) {
  EXPECT_NEAR(loss_rank(0.8, 1), -std::log(0.8), 1e-15);
  EXPECT_NEAR(loss_rank(0.8, 0), -std::log(0.2), 1e-15);
  EXPECT_NEAR(loss_rank(0.0, 1), -std::log(kProbClamp), 1e-9);
  EXPECT_EQ(loss_rank_grad(0.0, 1), 0.0);
  EXPECT_NEAR(loss_rank_grad(0.25, 1), (0.25 - 1) / (0.25 * 0.75), 1e-15);
  EXPECT_NEAR(sigmoid(-800), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800), 1.0);
}

TEST(Optimizer, AdagradStepByHand) {
  auto m = world().model(Variant::dprm);
  Parameters p = m.params;
  Gradients g(p);
  g.dense[0](0, 0) = 0.3;
  g.tables[1].col(2).setConstant(0.2);
  g.touch(1, 2);
  g.tables[1].col(3).setConstant(9.0);  // not touched: must be ignored
  Optimizer opt(OptimizerKind::adagrad, 0.1, p);
  opt.step(p, g);
  EXPECT_NEAR(p.dense[0](0, 0), m.params.dense[0](0, 0) - 0.1 * 0.3 / std::sqrt(0.1 + 0.09), 1e-15);
  EXPECT_NEAR(p.tables[1](0, 2), m.params.tables[1](0, 2) - 0.1 * 0.2 / std::sqrt(0.1 + 0.04), 1e-15);
  EXPECT_EQ(p.tables[1].col(3), m.params.tables[1].col(3));
  EXPECT_EQ(p.dense[1], m.params.dense[1]);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  auto m = world().model(Variant::dprm);
  Parameters p = m.params;
  Gradients g(p);
  g.dense[0](1, 1) = -0.004;
  Optimizer opt(OptimizerKind::adam, 0.01, p);
  opt.step(p, g);
  EXPECT_NEAR(p.dense[0](1, 1) - m.params.dense[0](1, 1), 0.01 * 0.004 / (0.004 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}
