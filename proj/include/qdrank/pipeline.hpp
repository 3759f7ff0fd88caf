#pragma once

// End-to-end stages behind the command-line driver: generate, cluster, train, eval, sweep.
// Each stage reads and writes plain files; every artifact carries the resolved run config.

#include <cstdio>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdrank/cluster/clusterer.hpp"
#include "qdrank/cluster/distinctive.hpp"
#include "qdrank/corpus/io.hpp"
#include "qdrank/corpus/synthetic.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/eval/metrics.hpp"
#include "qdrank/eval/significance.hpp"
#include "qdrank/rank/checkpoint.hpp"
#include "qdrank/rank/trainer.hpp"

namespace qdrank::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct ClusterStage {
  cluster::ClustererOptions options;
  std::size_t top_ngrams = 10;
  std::uint64_t min_support = 5;
};

struct EvalOptions {
  std::vector<int> ks = {1, 5};
  double alpha = 0.01;
};

struct SweepOptions {
  std::string parameter = "mix_rate";  // mix_rate | min_leaf | branch | depth
  std::vector<double> values = {0.0, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.4, 3.0};
  std::vector<std::uint64_t> seeds = {1};
};

struct RunConfig {
  corpus::SynthConfig synth;
  ClusterStage cluster;
  rank::ModelConfig model;
  EvalOptions eval;
  SweepOptions sweep;
};

// ---------------------------------------------------------------------------------------------
// Config file

namespace detail {

/// Reads keys out of one config section and rejects anything it did not consume.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    node_ = &root.at(name_);
    if (!node_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  bool has(const char* key) const { return node_ && node_->contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      node_->at(key).get_to(out);
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  std::optional<std::string> text(const char* key) {
    std::string s;
    if (!has(key)) return std::nullopt;
    get(key, s);
    return s;
  }

  void done() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json run_config_to_json(const RunConfig& c) {
  const auto& co = c.cluster.options;
  json cluster = cluster::cluster_params_to_json(co.cluster);
  cluster["top_k_docs"] = co.representation.top_k_docs;
  cluster["fields"] = co.representation.fields;
  cluster["k1"] = co.bm25.k1;
  cluster["b"] = co.bm25.b;
  cluster["recency_field"] = co.bm25.recency_field;
  cluster["top_ngrams"] = c.cluster.top_ngrams;
  cluster["min_support"] = c.cluster.min_support;
  return {{"generate", corpus::synth_config_to_json(c.synth)},
          {"cluster", std::move(cluster)},
          {"model", rank::config_to_json(c.model)},
          {"eval", {{"ks", c.eval.ks}, {"alpha", c.eval.alpha}}},
          {"sweep", {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}, {"seeds", c.sweep.seeds}}}};
}

inline void validate(const RunConfig& c) {
  corpus::validate(c.synth);
  cluster::validate(c.cluster.options.cluster);
  rank::validate(c.model);
  if (c.eval.ks.empty()) throw ConfigError("eval.ks must not be empty");
  for (int k : c.eval.ks)
    if (k < 1) throw ConfigError("eval.ks entries must be >= 1");
  if (!(c.eval.alpha > 0.0 && c.eval.alpha < 1.0)) throw ConfigError("eval.alpha must lie in (0, 1)");
  static const std::set<std::string> params = {"mix_rate", "min_leaf", "branch", "depth"};
  if (!params.count(c.sweep.parameter)) throw ConfigError("unknown sweep parameter '" + c.sweep.parameter + "'");
  if (c.sweep.values.empty()) throw ConfigError("sweep grid is empty");
  for (std::size_t i = 1; i < c.sweep.values.size(); ++i)
    if (!(c.sweep.values[i] > c.sweep.values[i - 1])) throw ConfigError("sweep values must be strictly increasing");
  if (c.sweep.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
}

/// Missing keys keep their defaults; unknown keys are configuration errors. A top-level "seed"
/// seeds every stage whose section does not name its own.
inline RunConfig run_config_from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections = {"seed", "generate", "cluster", "model", "eval", "sweep"};
  for (const auto& [k, v] : root.items())
    if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  RunConfig c;
  if (root.contains("seed")) {
    std::uint64_t s = 0;
    try {
      root.at("seed").get_to(s);
    } catch (const json::exception&) {
      throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    c.synth.seed = s;
    c.cluster.options.cluster.seed = s;
    c.model.seed = s;
  }

  {
    detail::Section g(root, "generate");
    auto& s = c.synth;
    g.get("num_train", s.num_train);
    g.get("num_dev", s.num_dev);
    g.get("num_test", s.num_test);
    g.get("num_planted_clusters", s.num_planted_clusters);
    g.get("vocab_size", s.vocab_size);
    if (g.has("click_rules")) {
      std::vector<std::string> rules;
      g.get("click_rules", rules);
      s.click_rules.clear();
      for (const auto& r : rules) s.click_rules.push_back(corpus::click_rule_from_string(r));
    }
    g.get("noise_rate", s.noise_rate);
    g.get("shared_token_fraction", s.shared_token_fraction);
    g.get("doc_topic_fraction", s.doc_topic_fraction);
    g.get("num_candidates", s.num_candidates);
    g.get("query_tokens", s.query_tokens);
    g.get("doc_tokens", s.doc_tokens);
    g.get("num_languages", s.num_languages);
    g.get("num_categories", s.num_categories);
    g.get("zipf_exponent", s.zipf_exponent);
    g.get("propensity", s.propensity);
    g.get("seed", s.seed);
    g.done();
  }
  {
    detail::Section k(root, "cluster");
    auto& o = c.cluster.options;
    k.get("depth", o.cluster.depth);
    k.get("branch", o.cluster.branch);
    k.get("min_leaf", o.cluster.min_leaf);
    if (auto t = k.text("count_transform")) o.cluster.transform = cluster::count_transform_from_string(*t);
    k.get("oversample", o.cluster.svd.oversample);
    k.get("power_iters", o.cluster.svd.power_iters);
    k.get("varimax_max_iters", o.cluster.varimax.max_iters);
    k.get("varimax_tol", o.cluster.varimax.tol);
    k.get("seed", o.cluster.seed);
    k.get("top_k_docs", o.representation.top_k_docs);
    k.get("fields", o.representation.fields);
    k.get("k1", o.bm25.k1);
    k.get("b", o.bm25.b);
    k.get("recency_field", o.bm25.recency_field);
    k.get("top_ngrams", c.cluster.top_ngrams);
    k.get("min_support", c.cluster.min_support);
    k.done();
  }
  {
    detail::Section m(root, "model");
    auto& mc = c.model;
    if (auto v = m.text("variant")) mc.variant = rank::variant_from_string(*v);
    m.get("embedding_dim", mc.embedding_dim);
    m.get("hidden_sizes", mc.hidden_sizes);
    m.get("dropout_rate", mc.dropout_rate);
    m.get("learning_rate", mc.learning_rate);
    if (auto v = m.text("optimizer")) mc.optimizer = rank::optimizer_from_string(*v);
    m.get("mix_rate", mc.mix_rate);
    m.get("vocab_min_freq", mc.vocab_min_freq);
    m.get("cluster_head_hidden", mc.cluster_head_hidden);
    m.get("shared_layers", mc.shared_layers);
    m.get("wide_fields", mc.wide_fields);
    m.get("wide_l2", mc.wide_l2);
    m.get("batch_size", mc.batch_size);
    m.get("max_epochs", mc.max_epochs);
    m.get("patience", mc.patience);
    m.get("seed", mc.seed);
    m.done();
  }
  {
    detail::Section e(root, "eval");
    e.get("ks", c.eval.ks);
    e.get("alpha", c.eval.alpha);
    e.done();
  }
  {
    detail::Section s(root, "sweep");
    s.get("parameter", c.sweep.parameter);
    s.get("values", c.sweep.values);
    s.get("seeds", c.sweep.seeds);
    s.done();
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------------------------
// Small file helpers

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string config_comment(const RunConfig& c) { return "# run_config: " + run_config_to_json(c).dump() + "\n"; }

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// generate

struct GenerateSummary {
  std::size_t train = 0, dev = 0, test = 0;
};

inline GenerateSummary cmd_generate(const RunConfig& cfg, const fs::path& out_dir) {
  auto corpus = corpus::generate_synthetic(cfg.synth);
  const auto provenance =
      json{{"generator", corpus::synth_config_to_json(cfg.synth)}, {"run_config", run_config_to_json(cfg)}}.dump();
  corpus.train.provenance = corpus.dev.provenance = corpus.test.provenance = provenance;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");
  corpus::save_dataset(corpus.train, out_dir / "train.jsonl");
  corpus::save_dataset(corpus.dev, out_dir / "dev.jsonl");
  corpus::save_dataset(corpus.test, out_dir / "test.jsonl");

  const auto planted_path = out_dir / "planted.tsv";
  auto out = detail::open_out(planted_path);
  out << detail::config_comment(cfg) << "split\tquery_id\tplanted_cluster\tclick_rule\n";
  auto dump = [&](const corpus::Dataset& ds, const std::vector<std::size_t>& planted) {
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      out << corpus::to_string(ds.split) << '\t' << ds.records[i].query_id << '\t' << planted[i] << '\t'
          << corpus::to_string(corpus::rule_for(cfg.synth, planted[i])) << '\n';
  };
  dump(corpus.train, corpus.planted_train);
  dump(corpus.dev, corpus.planted_dev);
  dump(corpus.test, corpus.planted_test);
  detail::finish(out, planted_path);

  GenerateSummary s{corpus.train.records.size(), corpus.dev.records.size(), corpus.test.records.size()};
  const auto manifest_path = out_dir / "manifest.json";
  auto m = detail::open_out(manifest_path);
  m << json{{"run_config", run_config_to_json(cfg)},
            {"counts", {{"train", s.train}, {"dev", s.dev}, {"test", s.test}}},
            {"files", {"train.jsonl", "dev.jsonl", "test.jsonl", "planted.tsv"}}}
           .dump(2)
    << '\n';
  detail::finish(m, manifest_path);
  return s;
}

// ---------------------------------------------------------------------------------------------
// cluster

struct ClusterSummary {
  std::size_t train_queries = 0;
  std::size_t valid_clusters = 0;
  std::size_t nodes = 0;
};

/// Distinctive n-gram table: one block of up to top_n rows per non-pruned cluster.
inline void write_ngram_report(std::ostream& out, const cluster::ClustererFit& fit, std::size_t top_n,
                               std::uint64_t min_support) {
  out << "cluster\tmembers\trank\ttoken\tscore\tin_cluster\toverall\n";
  std::map<std::string, std::size_t> members;
  for (const auto& a : fit.assignments)
    for (const auto& p : a) ++members[p];
  for (const auto& path : cluster::cluster_paths(fit.clusterer.tree())) {
    if (!members.count(path)) continue;
    const auto rows = cluster::distinctive_ngrams(fit.assignments, fit.tokens, path, top_n, min_support);
    for (std::size_t i = 0; i < rows.size(); ++i)
      out << path << '\t' << members[path] << '\t' << (i + 1) << '\t' << rows[i].token << '\t'
          << detail::fmt(rows[i].score) << '\t' << rows[i].in_cluster << '\t' << rows[i].overall << '\n';
  }
}

inline ClusterSummary cmd_cluster(const RunConfig& cfg, const fs::path& train_path, const fs::path& tree_out,
                                  const fs::path& report_out) {
  const auto train = corpus::load_dataset(train_path);
  const auto fit = cluster::fit_clusterer(train, cfg.cluster.options);
  auto out = detail::open_out(tree_out);
  out << cluster::clusterer_to_json(fit.clusterer, run_config_to_json(cfg)).dump() << '\n';
  detail::finish(out, tree_out);
  auto rep = detail::open_out(report_out);
  rep << detail::config_comment(cfg);
  write_ngram_report(rep, fit, cfg.cluster.top_ngrams, cfg.cluster.min_support);
  detail::finish(rep, report_out);
  return {train.records.size(), cluster::cluster_paths(fit.clusterer.tree()).size(),
          cluster::count_nodes(fit.clusterer.tree().root)};
}

// ---------------------------------------------------------------------------------------------
// train

struct TrainedModel {
  rank::Model model;
  rank::TrainResult result;
};

inline TrainedModel train_model(const rank::ModelConfig& mc, const corpus::Dataset& train,
                                const corpus::Dataset& dev, const cluster::QueryClusterer* clusterer,
                                const rank::EpochCallback& on_epoch = {}) {
  TrainedModel t{rank::make_model(mc, train, clusterer), {}};
  t.result = rank::train(t.model, train, dev, on_epoch);
  return t;
}

inline json training_summary(const RunConfig& cfg, const rank::TrainResult& r) {
  json log = json::array();
  for (const auto& e : r.log)
    log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_mrr", std::isfinite(e.dev_mrr) ? json(e.dev_mrr) : json()}});
  return {{"run_config", run_config_to_json(cfg)},
          {"log", std::move(log)},
          {"best_epoch", r.best_epoch},
          {"best_dev_mrr", std::isfinite(r.best_dev_mrr) ? json(r.best_dev_mrr) : json()},
          {"early_stopped", r.early_stopped}};
}

inline void write_training_log(std::ostream& out, const RunConfig& cfg, const rank::TrainResult& r) {
  out << detail::config_comment(cfg) << "epoch,train_loss,dev_mrr\n";
  for (const auto& e : r.log)
    out << e.epoch << ',' << rank::format_score(e.train_loss) << ','
        << (std::isfinite(e.dev_mrr) ? rank::format_score(e.dev_mrr) : std::string("nan")) << '\n';
}

inline rank::TrainResult cmd_train(const RunConfig& cfg, const fs::path& train_path, const fs::path& dev_path,
                                   const std::optional<fs::path>& tree_path, const fs::path& checkpoint_out,
                                   const fs::path& log_out, const rank::EpochCallback& on_epoch = {}) {
  std::optional<cluster::QueryClusterer> clusterer;
  if (rank::needs_tree(cfg.model.variant)) {
    if (!tree_path)
      throw ConfigError(std::string(rank::to_string(cfg.model.variant)) + " needs a cluster tree (--tree)");
    clusterer = cluster::load_clusterer(*tree_path);
  }
  const auto train = corpus::load_dataset(train_path);
  const auto dev = corpus::load_dataset(dev_path);
  auto t = train_model(cfg.model, train, dev, clusterer ? &*clusterer : nullptr, on_epoch);
  rank::save_model(t.model, checkpoint_out, training_summary(cfg, t.result));
  auto log = detail::open_out(log_out);
  write_training_log(log, cfg, t.result);
  detail::finish(log, log_out);
  return t.result;
}

// ---------------------------------------------------------------------------------------------
// eval

struct ModelEvaluation {
  std::string name;
  eval::MetricsReport report;
  std::vector<std::string> query_ids;
  std::vector<double> weights;
};

inline void check_compatible(const rank::Model& m, const corpus::Dataset& ds) {
  if (!(m.encoder.schema == ds.schema)) throw CompatibilityError("checkpoint schema does not match the dataset schema");
}

inline ModelEvaluation evaluate_model(const rank::Model& m, const corpus::Dataset& ds, const EvalOptions& opts,
                                      std::string name) {
  check_compatible(m, ds);
  if (ds.records.empty()) throw DataError("cannot evaluate on an empty split");
  ModelEvaluation e;
  e.name = std::move(name);
  const auto enc = m.encode(ds);
  const auto ranks = rank::clicked_ranks(m.spec, m.params, enc);
  for (const auto& q : ds.records) {
    e.query_ids.push_back(q.query_id);
    e.weights.push_back(q.propensity_weight);
  }
  e.report = eval::make_report(ranks, e.weights, opts.ks);
  return e;
}

inline void write_metrics(std::ostream& out, const std::vector<ModelEvaluation>& evals, const EvalOptions& opts) {
  out << "model\tn_queries\tmrr";
  for (int k : opts.ks) out << "\tsuccess@" << k;
  out << "\twmrr\twacp\n";
  for (const auto& e : evals) {
    out << e.name << '\t' << e.report.n_queries << '\t' << detail::fmt(e.report.mrr);
    for (int k : opts.ks) out << '\t' << detail::fmt(e.report.success_at.at(k));
    out << '\t' << detail::fmt(e.report.wmrr) << '\t' << detail::fmt(e.report.wacp) << '\n';
  }
}

inline void write_per_query(std::ostream& out, const ModelEvaluation& e) {
  out << "query_id\trank\treciprocal_rank\tweight\n";
  for (std::size_t i = 0; i < e.query_ids.size(); ++i)
    out << e.query_ids[i] << '\t' << rank::format_score(e.report.ranks[i]) << '\t'
        << rank::format_score(e.report.per_query_rr[i]) << '\t' << rank::format_score(e.weights[i]) << '\n';
}

inline double relative_change(double value, double base) { return base == 0.0 ? 0.0 : (value - base) / base; }

inline std::string with_delta(double value, double base) {
  return detail::fmt(value, "%.4f") + " (" + detail::fmt(100.0 * relative_change(value, base), "%+.2f") + "%)";
}

/// Comparison of a candidate against a baseline: metric table with relative deltas in
/// parentheses, then the paired t-test on per-query reciprocal ranks.
inline eval::TTestResult write_comparison(std::ostream& out, const ModelEvaluation& base, const ModelEvaluation& cand,
                                          const EvalOptions& opts) {
  if (base.query_ids != cand.query_ids) throw DimensionError("compared models were evaluated on different queries");
  out << "| Model | MRR";
  for (int k : opts.ks) out << " | success@" << k;
  out << " | WMRR | WACP |\n|---|---";
  for (std::size_t i = 0; i < opts.ks.size(); ++i) out << "|---";
  out << "|---|---|\n";
  out << "| " << base.name << " (baseline) | " << detail::fmt(base.report.mrr, "%.4f");
  for (int k : opts.ks) out << " | " << detail::fmt(base.report.success_at.at(k), "%.4f");
  out << " | " << detail::fmt(base.report.wmrr, "%.4f") << " | " << detail::fmt(base.report.wacp, "%.4f") << " |\n";
  out << "| " << cand.name << " | " << with_delta(cand.report.mrr, base.report.mrr);
  for (int k : opts.ks) out << " | " << with_delta(cand.report.success_at.at(k), base.report.success_at.at(k));
  out << " | " << with_delta(cand.report.wmrr, base.report.wmrr) << " | "
      << with_delta(cand.report.wacp, base.report.wacp) << " |\n\n";
  const auto t = eval::paired_t_test(cand.report.per_query_rr, base.report.per_query_rr, opts.alpha);
  out << "Paired two-tailed t-test on per-query reciprocal rank (n = " << cand.report.n_queries << "): ";
  if (t.degenerate) {
    out << "differences have zero variance; the models rank identically.\n";
  } else {
    out << "t = " << detail::fmt(t.t, "%.4f") << ", df = " << t.df << ", p = " << detail::fmt(t.p_value, "%.3g")
        << ", significant at " << detail::fmt(100.0 * (1.0 - opts.alpha), "%g")
        << "%: " << (t.significant ? "yes" : "no") << "\n";
  }
  return t;
}

struct EvalOutputs {
  std::vector<ModelEvaluation> evaluations;
  std::optional<eval::TTestResult> t_test;
};

/// One or two checkpoints on one split. With two, the first is the baseline.
inline EvalOutputs cmd_eval(const RunConfig& cfg, const std::vector<fs::path>& checkpoints, const fs::path& data_path,
                            const fs::path& out_dir, bool export_scores = false) {
  if (checkpoints.empty() || checkpoints.size() > 2) throw ConfigError("eval takes one or two checkpoints");
  const auto ds = corpus::load_dataset(data_path);
  std::vector<rank::Model> models;
  for (const auto& p : checkpoints) models.push_back(rank::load_model(p));
  EvalOutputs res;
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::string name = rank::to_string(models[i].config().variant);
    if (models.size() == 2 && models[0].config().variant == models[1].config().variant)
      name += "#" + std::to_string(i + 1);
    res.evaluations.push_back(evaluate_model(models[i], ds, cfg.eval, name));
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");

  const auto metrics_path = out_dir / "metrics.tsv";
  auto m = detail::open_out(metrics_path);
  m << detail::config_comment(cfg);
  write_metrics(m, res.evaluations, cfg.eval);
  detail::finish(m, metrics_path);
  for (std::size_t i = 0; i < res.evaluations.size(); ++i) {
    const auto path = out_dir / ("per_query_" + std::to_string(i + 1) + ".tsv");
    auto q = detail::open_out(path);
    write_per_query(q, res.evaluations[i]);
    detail::finish(q, path);
    if (export_scores) rank::export_scores(models[i], ds, out_dir / ("scores_" + std::to_string(i + 1) + ".tsv"));
  }
  if (res.evaluations.size() == 2) {
    const auto path = out_dir / "comparison.md";
    auto c = detail::open_out(path);
    res.t_test = write_comparison(c, res.evaluations[0], res.evaluations[1], cfg.eval);
    c << "\n<!-- run_config: " << run_config_to_json(cfg).dump() << " -->\n";
    detail::finish(c, path);
  }
  return res;
}

// ---------------------------------------------------------------------------------------------
// sweep

struct SweepRow {
  double value = 0.0;
  double relative_improvement = 0.0;  // mean MRR over seeds vs mean baseline MRR
  double mrr = 0.0;
  double baseline_mrr = 0.0;
  std::size_t valid_clusters = 0;
  std::vector<double> seed_mrr;
};

struct SweepInputs {
  const corpus::Dataset* train = nullptr;
  const corpus::Dataset* dev = nullptr;
  const corpus::Dataset* test = nullptr;
  const cluster::QueryClusterer* clusterer = nullptr;  // fixed tree for mix_rate sweeps
  std::vector<double> baseline_mrr;                    // per seed; empty: train DPRM baselines
};

using SweepProgress = std::function<void(const std::string&)>;

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// One row per grid value. Every row trains with the same seed list, and the baseline is DPRM
/// trained with those seeds, so differences between rows are paired.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, SweepInputs in, const SweepProgress& progress = {}) {
  validate(cfg);
  if (!in.train || !in.dev || !in.test) throw ConfigError("sweep needs train, dev and test splits");
  const auto& sw = cfg.sweep;
  const bool cluster_sweep = sw.parameter != "mix_rate";
  if (!rank::needs_tree(cfg.model.variant)) throw ConfigError("sweeps compare a QC variant against DPRM");
  if (!cluster_sweep && !rank::uses_cluster_head(cfg.model.variant))
    throw ConfigError("a mix_rate sweep needs the QC-MTLRM variant");

  std::optional<cluster::QueryClusterer> fixed;
  if (!cluster_sweep && in.clusterer == nullptr) {
    fixed = cluster::fit_clusterer(*in.train, cfg.cluster.options).clusterer;
    in.clusterer = &*fixed;
  }
  auto test_mrr = [&](const rank::ModelConfig& mc, const cluster::QueryClusterer* c) {
    auto t = train_model(mc, *in.train, *in.dev, c);
    return rank::evaluate(t.model, *in.test).mrr;
  };
  if (in.baseline_mrr.empty()) {
    for (auto seed : sw.seeds) {
      auto mc = cfg.model;
      mc.variant = rank::Variant::dprm;
      mc.seed = seed;
      in.baseline_mrr.push_back(test_mrr(mc, nullptr));
      if (progress) progress("baseline seed " + std::to_string(seed) + ": MRR " + detail::fmt(in.baseline_mrr.back()));
    }
  }
  if (in.baseline_mrr.size() == 1 && sw.seeds.size() > 1) in.baseline_mrr.assign(sw.seeds.size(), in.baseline_mrr[0]);
  if (in.baseline_mrr.size() != sw.seeds.size()) throw DimensionError("one baseline MRR per sweep seed is required");

  std::vector<SweepRow> rows;
  for (double value : sw.values) {
    SweepRow row;
    row.value = value;
    auto mc = cfg.model;
    std::optional<cluster::QueryClusterer> refit;
    const cluster::QueryClusterer* clusterer = in.clusterer;
    if (cluster_sweep) {
      if (!(value >= 0.0) || value != std::floor(value)) throw ConfigError("cluster sweep values must be whole numbers");
      auto co = cfg.cluster.options;
      const auto v = static_cast<std::size_t>(value);
      if (sw.parameter == "min_leaf") co.cluster.min_leaf = v;
      if (sw.parameter == "branch") co.cluster.branch = v;
      if (sw.parameter == "depth") co.cluster.depth = v;
      cluster::validate(co.cluster);
      refit = cluster::fit_clusterer(*in.train, co).clusterer;
      clusterer = &*refit;
    } else {
      if (value < 0.0) throw ConfigError("mix_rate values must be non-negative");
      mc.mix_rate = value;
    }
    row.valid_clusters = cluster::cluster_paths(clusterer->tree()).size();
    for (auto seed : sw.seeds) {
      mc.seed = seed;
      row.seed_mrr.push_back(test_mrr(mc, clusterer));
    }
    row.mrr = mean(row.seed_mrr);
    row.baseline_mrr = mean(in.baseline_mrr);
    row.relative_improvement = relative_change(row.mrr, row.baseline_mrr);
    if (progress)
      progress(sw.parameter + "=" + detail::fmt(value, "%g") + ": MRR " + detail::fmt(row.mrr) + " (" +
               detail::fmt(100.0 * row.relative_improvement, "%+.2f") + "%)");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const RunConfig& cfg, const std::vector<SweepRow>& rows) {
  out << detail::config_comment(cfg) << "parameter,value,relative_improvement,mrr,baseline_mrr,valid_clusters,seeds\n";
  for (const auto& r : rows)
    out << cfg.sweep.parameter << ',' << rank::format_score(r.value) << ',' << rank::format_score(r.relative_improvement)
        << ',' << rank::format_score(r.mrr) << ',' << rank::format_score(r.baseline_mrr) << ',' << r.valid_clusters
        << ',' << r.seed_mrr.size() << '\n';
}

inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const fs::path& train_path, const fs::path& dev_path,
                                       const fs::path& test_path, const std::optional<fs::path>& tree_path,
                                       const std::optional<fs::path>& baseline_path, const fs::path& csv_out,
                                       const SweepProgress& progress = {}) {
  validate(cfg);
  const auto train = corpus::load_dataset(train_path);
  const auto dev = corpus::load_dataset(dev_path);
  const auto test = corpus::load_dataset(test_path);
  std::optional<cluster::QueryClusterer> tree;
  if (tree_path) tree = cluster::load_clusterer(*tree_path);
  SweepInputs in{&train, &dev, &test, tree ? &*tree : nullptr, {}};
  if (baseline_path) {
    const auto base = rank::load_model(*baseline_path);
    check_compatible(base, test);
    in.baseline_mrr.push_back(rank::evaluate(base, test).mrr);
  }
  const auto rows = run_sweep(cfg, in, progress);
  auto out = detail::open_out(csv_out);
  write_sweep_csv(out, cfg, rows);
  detail::finish(out, csv_out);
  return rows;
}

}  // namespace qdrank::pipeline
