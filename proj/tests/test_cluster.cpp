#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qdrank/cluster/bm25.hpp"
#include "qdrank/cluster/clusterer.hpp"
#include "qdrank/cluster/distinctive.hpp"

using namespace qdrank;
using namespace qdrank::cluster;

namespace {

const corpus::SyntheticCorpus& shared_corpus() {
  static const auto c = corpus::generate_synthetic(fixtures::small_synth(600));
  return c;
}

std::vector<std::size_t> members_of(const std::vector<ClusterAssignment>& a, const std::string& path) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::find(a[i].begin(), a[i].end(), path) != a[i].end()) out.push_back(i);
  return out;
}

}  // namespace

TEST(Bm25, MatchesBruteForceFormula) {
  const auto& c = shared_corpus();
  corpus::Dataset small = c.train;
  small.records.resize(60);
  const auto idx = Bm25Index::fit(small);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& q = c.test.records[i];
    for (const auto& d : q.candidates) EXPECT_NEAR(idx.score(q, d), oracle::bm25(small, q, d), 1e-12);
  }
}

TEST(Bm25, RankBreaksTiesByRecencyThenId) {
  corpus::Dataset train;
  train.schema = corpus::synthetic_schema(fixtures::small_synth());
  corpus::QueryRecord q;
  q.query_id = "q";
  q.sparse["ngram"] = {{"zzz", 1}};
  for (int j = 0; j < 4; ++j) {
    corpus::DocumentRecord d;
    d.doc_id = "d" + std::to_string(3 - j);
    d.dense["recency"] = j < 2 ? 0.5 : 0.1 * j;
    q.candidates.push_back(d);
  }
  train.records.push_back(q);
  const auto idx = Bm25Index::fit(train);
  // No token overlap: all scores 0. Recency 0.5, 0.5, 0.2, 0.3; the tie goes to the smaller doc_id.
  EXPECT_EQ(idx.rank(q), (std::vector<std::size_t>{1, 0, 3, 2}));
}

TEST(Bm25, IdfIsNonNegative) {
  const auto idx = Bm25Index::fit(shared_corpus().train);
  EXPECT_GT(idx.idf("ngram:never-seen"), 0.0);
  EXPECT_GE(idx.idf("category:cat0"), 0.0);
}

TEST(Representation, AggregatesQueryAndTopDocs) {
  const auto& q = shared_corpus().train.records[0];
  RepresentationOptions opts;
  opts.top_k_docs = 2;
  const std::vector<std::size_t> ranked = {3, 1, 0, 2, 4, 5};
  const auto t = aggregate_tokens(q, ranked, opts);
  TokenCounts expected;
  for (const auto& x : q.sparse.at("ngram")) expected["ngram:" + x.token] += x.count;
  for (std::size_t r : {3u, 1u})
    for (const auto& [f, toks] : q.candidates[r].sparse)
      for (const auto& x : toks) expected[f + ":" + x.token] += x.count;
  EXPECT_EQ(t, expected);  // language is situational and stays out
}

TEST(Representation, VocabularyIsSortedAndDropsUnknown) {
  const FeatureVocabulary v({"b", "a", "c", "a"});
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b", "c"}));
  const auto x = vectorize({{"c", 2}, {"zz", 5}}, v);
  EXPECT_EQ(x.indices, (std::vector<std::size_t>{2}));
  EXPECT_EQ(x.values, (std::vector<double>{2.0}));
}

TEST(Hierarchy, FitAssignmentsMatchReassignment) {
  const auto fit = fit_clusterer(shared_corpus().train, fixtures::small_cluster_options());
  const auto again = fit.clusterer.assign(shared_corpus().train);
  EXPECT_EQ(fit.assignments, again);
}

TEST(Hierarchy, PathsExtendTheirParents) {
  const auto fit = fit_clusterer(shared_corpus().train, fixtures::small_cluster_options());
  for (const auto& a : fit.assignments) {
    EXPECT_LE(a.size(), 2u);
    for (std::size_t l = 1; l < a.size(); ++l) EXPECT_EQ(a[l].rfind(a[l - 1] + ".", 0), 0u);
  }
}

TEST(Hierarchy, SmallLeavesArePruned) {
  auto opts = fixtures::small_cluster_options();
  opts.cluster.min_leaf = 1000000;
  const auto fit = fit_clusterer(shared_corpus().train, opts);
  // Every depth-2 leaf is pruned; the fitted level-1 nodes stay.
  const auto& root = fit.clusterer.tree().root;
  for (const auto& c : root.children) {
    EXPECT_FALSE(c.pruned);
    for (const auto& leaf : c.children) EXPECT_TRUE(leaf.pruned);
  }
  for (const auto& p : cluster_paths(fit.clusterer.tree())) EXPECT_EQ(p.find('.'), std::string::npos) << p;
  for (const auto& a : fit.assignments) EXPECT_EQ(a.size(), 1u);
}

TEST(Hierarchy, SiblingSubtreesAreIndependent) {
  const auto& train = shared_corpus().train;
  const auto opts = fixtures::small_cluster_options();
  const auto fit = fit_clusterer(train, opts);
  std::vector<QueryVector> vectors;
  for (const auto& t : fit.tokens) vectors.push_back(vectorize(t, fit.clusterer.vocabulary()));

  const auto members1 = members_of(fit.assignments, "1");
  ASSERT_GT(members1.size(), 0u);
  const ClusterNode refit = fit_node(vectors, members1, {1}, opts.cluster);
  EXPECT_EQ(detail::node_to_json(refit).dump(), detail::node_to_json(fit.clusterer.tree().root.children[0]).dump());

  // Scrambling every query outside "1" leaves the refit of "1" untouched.
  std::vector<QueryVector> scrambled = vectors;
  Rng rng(99);
  const std::set<std::size_t> keep(members1.begin(), members1.end());
  for (std::size_t i = 0; i < scrambled.size(); ++i) {
    if (keep.count(i)) continue;
    for (auto& v : scrambled[i].values) v = static_cast<double>(1 + rng.below(9));
  }
  const ClusterNode again = fit_node(scrambled, members1, {1}, opts.cluster);
  EXPECT_EQ(detail::node_to_json(again).dump(), detail::node_to_json(refit).dump());
}

TEST(Hierarchy, RejectsBadParameters) {
  auto opts = fixtures::small_cluster_options();
  opts.cluster.branch = 1;
  EXPECT_THROW(fit_clusterer(shared_corpus().train, opts), ConfigError);
  corpus::Dataset empty;
  EXPECT_THROW(fit_clusterer(empty, fixtures::small_cluster_options()), DataError);
}

TEST(Clusterer, JsonRoundTripReproducesAssignments) {
  const auto fit = fit_clusterer(shared_corpus().train, fixtures::small_cluster_options());
  const auto text = clusterer_to_json(fit.clusterer).dump();
  const auto back = clusterer_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(clusterer_to_json(back).dump(), text);
  EXPECT_EQ(back.assign(shared_corpus().test), fit.clusterer.assign(shared_corpus().test));
}

TEST(Clusterer, LoadRejectsForeignFiles) {
  const auto dir = fixtures::scratch_dir("cluster_load");
  std::ofstream(dir / "x.json") << "{\"format\":\"other\"}";
  EXPECT_THROW(load_clusterer(dir / "x.json"), DataError);
  std::ofstream(dir / "y.json") << "{broken";
  EXPECT_THROW(load_clusterer(dir / "y.json"), DataError);
  EXPECT_THROW(load_clusterer(dir / "missing.json"), IoError);
}

TEST(Distinctive, RatioOfInClusterToOverallCounts) {
  const std::vector<ClusterAssignment> a = {{"1"}, {"1"}, {"2"}, {"2"}};
  const std::vector<TokenCounts> t = {{{"x", 3}, {"y", 1}}, {{"x", 2}, {"z", 6}}, {{"y", 3}, {"x", 5}}, {{"z", 1}}};
  const auto top = distinctive_ngrams(a, t, "1", 10, 1);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].token, "z");
  EXPECT_DOUBLE_EQ(top[0].score, 6.0 / 7.0);
  EXPECT_EQ(top[1].token, "x");
  EXPECT_DOUBLE_EQ(top[1].score, 0.5);
  EXPECT_EQ(top[2].token, "y");
  EXPECT_DOUBLE_EQ(top[2].score, 0.25);
  EXPECT_EQ(distinctive_ngrams(a, t, "1", 10, 8).size(), 1u);  // only x has support >= 8
  EXPECT_THROW(distinctive_ngrams(a, t, "9", 10), LookupError);
}
