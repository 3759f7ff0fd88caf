#pragma once

// Small corpora and fitted models shared by several test files.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "qdrank/cluster/clusterer.hpp"
#include "qdrank/corpus/synthetic.hpp"
#include "qdrank/random.hpp"
#include "qdrank/rank/model.hpp"

namespace fixtures {

inline qdrank::corpus::SynthConfig small_synth(std::size_t n_train = 400, std::uint64_t seed = 7) {
  qdrank::corpus::SynthConfig c;
  c.num_train = n_train;
  c.num_dev = 100;
  c.num_test = 100;
  c.vocab_size = 30;
  c.seed = seed;
  return c;
}

inline qdrank::cluster::ClustererOptions small_cluster_options() {
  qdrank::cluster::ClustererOptions o;
  o.cluster.depth = 2;
  o.cluster.branch = 2;
  o.cluster.min_leaf = 5;
  o.cluster.seed = 3;
  return o;
}

inline qdrank::rank::ModelConfig tiny_config(qdrank::rank::Variant v) {
  qdrank::rank::ModelConfig c;
  c.variant = v;
  c.embedding_dim = 4;
  c.hidden_sizes = {8, 4};
  c.cluster_head_hidden = 5;
  c.mix_rate = 0.7;
  c.wide_l2 = 0.05;
  c.batch_size = 32;
  c.max_epochs = 2;
  c.seed = 11;
  return c;
}

/// A corpus, its fitted clusterer, and a freshly initialized tiny model per variant.
struct TinyWorld {
  qdrank::corpus::SyntheticCorpus corpus;
  qdrank::cluster::ClustererFit fit;

  explicit TinyWorld(std::size_t n_train = 400)
      : corpus(qdrank::corpus::generate_synthetic(small_synth(n_train))),
        fit(qdrank::cluster::fit_clusterer(corpus.train, small_cluster_options())) {}

  qdrank::rank::Model model(qdrank::rank::Variant v) const {
    return qdrank::rank::make_model(tiny_config(v), corpus.train, &fit.clusterer);
  }
  qdrank::rank::Model model(const qdrank::rank::ModelConfig& c) const {
    return qdrank::rank::make_model(c, corpus.train, &fit.clusterer);
  }
};

/// Fills every parameter (biases and wide weights included) with small random values.
inline void randomize(qdrank::rank::Parameters& p, std::uint64_t seed, double scale = 0.5) {
  qdrank::Rng rng(seed);
  for (auto& t : p.tables)
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  for (auto& d : p.dense)
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.uniform(-scale, scale);
  for (Eigen::Index i = 0; i < p.wide.size(); ++i) p.wide(i) = rng.uniform(-scale, scale);
}

/// A fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("qdrank_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace fixtures
