#pragma once

// Synthetic click logs with planted query types.
//
// Each query belongs to one planted cluster. Its n-grams come mostly from that cluster's
// vocabulary (Zipf-distributed, so a long tail of rare tokens exists), the rest from a shared
// pool. Every planted cluster has a click rule: recency-preferring clusters click the most
// recent candidate; content-match clusters click the candidate with the highest token overlap
// with the query (ties go to the more recent one). With probability noise_rate the click is
// then moved to a uniformly random candidate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/random.hpp"

namespace qdrank::corpus {

enum class ClickRule { recency, content_match };

inline const char* to_string(ClickRule r) {
  return r == ClickRule::recency ? "recency" : "content_match";
}

inline ClickRule click_rule_from_string(const std::string& s) {
  if (s == "recency") return ClickRule::recency;
  if (s == "content_match" || s == "content-match") return ClickRule::content_match;
  throw ConfigError("unknown click rule '" + s + "'");
}

struct SynthConfig {
  std::size_t num_train = 5000;
  std::size_t num_dev = 1000;
  std::size_t num_test = 1000;
  std::size_t num_planted_clusters = 4;
  std::size_t vocab_size = 200;  // per planted cluster
  std::vector<ClickRule> click_rules;  // empty: alternate recency / content_match
  double noise_rate = 0.1;
  double shared_token_fraction = 0.1;
  // Probability that a document filler token comes from the query's own planted cluster;
  // otherwise it comes from a uniformly chosen planted cluster. 1 makes documents fully on-topic.
  double doc_topic_fraction = 1.0;
  std::size_t num_candidates = 6;
  std::size_t query_tokens = 3;
  std::size_t doc_tokens = 4;
  std::size_t num_languages = 3;
  std::size_t num_categories = 5;
  double zipf_exponent = 1.0;
  std::vector<double> propensity;  // optional: position -> observation probability
  std::uint64_t seed = 42;
};

inline ClickRule rule_for(const SynthConfig& cfg, std::size_t cluster) {
  if (!cfg.click_rules.empty()) return cfg.click_rules[cluster];
  return cluster % 2 == 0 ? ClickRule::recency : ClickRule::content_match;
}

inline void validate(const SynthConfig& cfg) {
  if (cfg.num_planted_clusters < 2) throw ConfigError("num_planted_clusters must be >= 2");
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 0.5)) throw ConfigError("noise_rate must lie in [0, 0.5)");
  if (!(cfg.shared_token_fraction >= 0.0 && cfg.shared_token_fraction <= 1.0))
    throw ConfigError("shared_token_fraction must lie in [0, 1]");
  if (!(cfg.doc_topic_fraction >= 0.0 && cfg.doc_topic_fraction <= 1.0))
    throw ConfigError("doc_topic_fraction must lie in [0, 1]");
  if (cfg.vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (cfg.num_candidates < 2) throw ConfigError("num_candidates must be >= 2");
  if (cfg.query_tokens == 0 || cfg.doc_tokens == 0) throw ConfigError("token counts must be positive");
  if (cfg.num_languages == 0 || cfg.num_categories == 0)
    throw ConfigError("num_languages and num_categories must be positive");
  if (!cfg.click_rules.empty() && cfg.click_rules.size() != cfg.num_planted_clusters)
    throw ConfigError("click_rules must list one rule per planted cluster");
  if (!(cfg.zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be non-negative");
  if (!cfg.propensity.empty()) {
    if (cfg.propensity.size() != cfg.num_candidates)
      throw ConfigError("propensity table needs one entry per candidate position");
    for (double p : cfg.propensity)
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("propensities must lie in (0, 1]");
  }
}

inline std::string cluster_token(std::size_t cluster, std::size_t j) {
  return "c" + std::to_string(cluster) + "w" + std::to_string(j);
}

inline std::string shared_token(std::size_t j) { return "sw" + std::to_string(j); }

inline Schema synthetic_schema(const SynthConfig& cfg) {
  Schema s;
  s.query_sparse = {"language", "ngram"};
  s.query_dense = {"hour"};
  s.doc_sparse = {"category", "ngram"};
  s.doc_dense = {"match", "recency"};
  s.num_candidates = cfg.num_candidates;
  return s;
}

struct SyntheticCorpus {
  Dataset train;
  Dataset dev;
  Dataset test;
  // Planted cluster of each record, aligned with the split's records.
  std::vector<std::size_t> planted_train;
  std::vector<std::size_t> planted_dev;
  std::vector<std::size_t> planted_test;
};

inline nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  std::vector<std::string> rules;
  for (std::size_t c = 0; c < cfg.num_planted_clusters; ++c) rules.push_back(to_string(rule_for(cfg, c)));
  return {{"num_train", cfg.num_train},
          {"num_dev", cfg.num_dev},
          {"num_test", cfg.num_test},
          {"num_planted_clusters", cfg.num_planted_clusters},
          {"vocab_size", cfg.vocab_size},
          {"click_rules", rules},
          {"noise_rate", cfg.noise_rate},
          {"shared_token_fraction", cfg.shared_token_fraction},
          {"doc_topic_fraction", cfg.doc_topic_fraction},
          {"num_candidates", cfg.num_candidates},
          {"query_tokens", cfg.query_tokens},
          {"doc_tokens", cfg.doc_tokens},
          {"num_languages", cfg.num_languages},
          {"num_categories", cfg.num_categories},
          {"zipf_exponent", cfg.zipf_exponent},
          {"propensity", cfg.propensity},
          {"seed", cfg.seed}};
}

namespace detail {

/// Inverse-CDF sampler over ranks 0..n-1 with weight 1/(r+1)^s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
      cdf_[r] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct TokenDrawer {
  const SynthConfig& cfg;
  ZipfSampler zipf;

  std::string draw(Rng& rng, std::size_t cluster) const {
    if (rng.bernoulli(cfg.shared_token_fraction)) return shared_token(zipf(rng));
    return cluster_token(cluster, zipf(rng));
  }
};

inline std::vector<TokenCount> to_counts(const std::vector<std::string>& tokens) {
  std::map<std::string, std::uint32_t> counts;
  for (const auto& t : tokens) ++counts[t];
  std::vector<TokenCount> out;
  out.reserve(counts.size());
  for (const auto& [t, c] : counts) out.push_back({t, c});
  return out;
}

inline QueryRecord make_query(const SynthConfig& cfg, const TokenDrawer& drawer, Rng& rng,
                              std::size_t cluster, const std::string& id, std::int64_t timestamp) {
  QueryRecord q;
  q.query_id = id;
  q.timestamp = timestamp;

  std::vector<std::string> qtokens;
  for (std::size_t i = 0; i < cfg.query_tokens; ++i) qtokens.push_back(drawer.draw(rng, cluster));
  q.sparse["ngram"] = to_counts(qtokens);
  q.sparse["language"] = {{"lang" + std::to_string(rng.below(cfg.num_languages)), 1}};
  q.dense["hour"] = rng.uniform();

  const std::set<std::string> distinct(qtokens.begin(), qtokens.end());
  const std::vector<std::string> distinct_list(distinct.begin(), distinct.end());

  std::vector<std::size_t> overlap(cfg.num_candidates);
  std::vector<double> recency(cfg.num_candidates);
  for (std::size_t j = 0; j < cfg.num_candidates; ++j) {
    DocumentRecord d;
    d.doc_id = id + "-d" + std::to_string(j);
    const std::size_t max_copy = std::min(distinct_list.size(), cfg.doc_tokens);
    const std::size_t copies = static_cast<std::size_t>(rng.below(max_copy + 1));
    // Pick `copies` distinct query tokens by partial shuffle.
    std::vector<std::string> pool = distinct_list;
    std::vector<std::string> dtokens;
    for (std::size_t k = 0; k < copies; ++k) {
      const auto pick = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[pick]);
      dtokens.push_back(pool[k]);
    }
    while (dtokens.size() < cfg.doc_tokens) {
      const bool on_topic = cfg.doc_topic_fraction >= 1.0 || rng.bernoulli(cfg.doc_topic_fraction);
      const auto source = on_topic ? cluster : static_cast<std::size_t>(rng.below(cfg.num_planted_clusters));
      dtokens.push_back(drawer.draw(rng, source));
    }
    d.sparse["ngram"] = to_counts(dtokens);
    d.sparse["category"] = {{"cat" + std::to_string(rng.below(cfg.num_categories)), 1}};

    std::size_t shared = 0;
    for (const auto& t : distinct)
      if (std::find(dtokens.begin(), dtokens.end(), t) != dtokens.end()) ++shared;
    overlap[j] = shared;
    recency[j] = rng.uniform();
    d.dense["recency"] = recency[j];
    d.dense["match"] = static_cast<double>(shared) / static_cast<double>(distinct.size());
    q.candidates.push_back(std::move(d));
  }

  std::size_t best = 0;
  for (std::size_t j = 1; j < cfg.num_candidates; ++j) {
    if (rule_for(cfg, cluster) == ClickRule::recency) {
      if (recency[j] > recency[best]) best = j;
    } else if (overlap[j] > overlap[best] ||
               (overlap[j] == overlap[best] && recency[j] > recency[best])) {
      best = j;
    }
  }
  if (rng.bernoulli(cfg.noise_rate)) best = static_cast<std::size_t>(rng.below(cfg.num_candidates));
  q.clicked_index = best;
  q.propensity_weight = cfg.propensity.empty() ? 1.0 : 1.0 / cfg.propensity[best];
  return q;
}

}  // namespace detail

/// Pure function of the config (seed included): equal configs give bit-identical corpora.
inline SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const detail::TokenDrawer drawer{cfg, detail::ZipfSampler(cfg.vocab_size, cfg.zipf_exponent)};
  Rng rng(derive_seed(cfg.seed, "synthetic"));
  const std::string provenance = nlohmann::json{{"generator", synth_config_to_json(cfg)}}.dump();

  SyntheticCorpus out;
  std::int64_t clock = 0;
  auto fill = [&](Dataset& ds, std::vector<std::size_t>& planted, std::size_t n, SplitTag tag) {
    ds.schema = synthetic_schema(cfg);
    ds.split = tag;
    ds.provenance = provenance;
    ds.records.reserve(n);
    planted.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cluster = static_cast<std::size_t>(rng.below(cfg.num_planted_clusters));
      const std::string id = std::string(to_string(tag)) + "-q" + std::to_string(i);
      ds.records.push_back(detail::make_query(cfg, drawer, rng, cluster, id, clock));
      planted.push_back(cluster);
      clock += 1000;
    }
  };
  fill(out.train, out.planted_train, cfg.num_train, SplitTag::train);
  fill(out.dev, out.planted_dev, cfg.num_dev, SplitTag::dev);
  fill(out.test, out.planted_test, cfg.num_test, SplitTag::test);
  return out;
}

/// The candidate the planted rule would click before noise is applied.
inline std::size_t rule_choice(const QueryRecord& q, ClickRule rule) {
  std::size_t best = 0;
  auto rec = [&](std::size_t j) { return q.candidates[j].dense.at("recency"); };
  auto match = [&](std::size_t j) { return q.candidates[j].dense.at("match"); };
  for (std::size_t j = 1; j < q.candidates.size(); ++j) {
    if (rule == ClickRule::recency) {
      if (rec(j) > rec(best)) best = j;
    } else if (match(j) > match(best) || (match(j) == match(best) && rec(j) > rec(best))) {
      best = j;
    }
  }
  return best;
}

}  // namespace qdrank::corpus
