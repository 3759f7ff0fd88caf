// qdrank: command-line driver for the query-dependent ranking workbench.
//
//   qdrank generate --out-dir data/
//   qdrank cluster  --train data/train.jsonl --out run/tree.json
//   qdrank train    --train data/train.jsonl --dev data/dev.jsonl --tree run/tree.json --variant QC-MTLRM --out run/mtl.json
//   qdrank eval     --model run/dprm.json --model run/mtl.json --data data/test.jsonl --out-dir run/eval
//   qdrank sweep    --train ... --dev ... --test ... --tree run/tree.json --out run/mix_rate.csv
//
// Settings come from an optional JSON config (--config) with sections generate, cluster, model,
// eval and sweep; flags override the file. Exit codes: 0 ok, 2 configuration, 3 data, 4 numeric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdrank/errors.hpp"
#include "qdrank/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qdrank;

constexpr int kExitConfig = 2;

/// Flag values that override config-file keys. Each entry is written into the JSON config
/// before it is parsed, so flags and files go through the same validation.
struct Overrides {
  json patch = json::object();

  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
           const std::string& help) {
    auto holder = std::make_shared<std::optional<T>>();
    app->add_option(flag, *holder, help);
    pending.push_back([holder, section, key](json& p) {
      if (*holder) p[section][key] = **holder;
    });
  }

  json apply(json config) {
    for (auto& f : pending) f(patch);
    if (!patch.empty()) config.merge_patch(patch);
    return config;
  }

  std::vector<std::function<void(json&)>> pending;
};

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void add_model_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--variant", "model", "variant", "DPRM, QC-DPRM, QC-WDPRM or QC-MTLRM");
  o.add<std::size_t>(app, "--embedding-dim", "model", "embedding_dim", "Embedding width");
  o.add<std::vector<std::size_t>>(app, "--hidden-sizes", "model", "hidden_sizes", "Hidden layer widths");
  o.add<double>(app, "--dropout-rate", "model", "dropout_rate", "Dropout on hidden layers");
  o.add<double>(app, "--learning-rate", "model", "learning_rate", "Optimizer step size");
  o.add<std::string>(app, "--optimizer", "model", "optimizer", "adagrad or adam");
  o.add<double>(app, "--mix-rate", "model", "mix_rate", "Weight of the cluster loss (QC-MTLRM)");
  o.add<std::uint64_t>(app, "--vocab-min-freq", "model", "vocab_min_freq", "Rarer tokens map to UNK");
  o.add<std::size_t>(app, "--cluster-head-hidden", "model", "cluster_head_hidden", "Cluster head width");
  o.add<std::size_t>(app, "--shared-layers", "model", "shared_layers", "Hidden layers shared with the cluster head (0: all but the last)");
  o.add<std::vector<std::string>>(app, "--wide-fields", "model", "wide_fields", "Query fields crossed with clusters");
  o.add<double>(app, "--wide-l2", "model", "wide_l2", "L2 on wide weights");
  o.add<std::size_t>(app, "--batch-size", "model", "batch_size", "Pairs per step");
  o.add<std::size_t>(app, "--max-epochs", "model", "max_epochs", "Epoch limit");
  o.add<std::size_t>(app, "--patience", "model", "patience", "Early-stopping patience");
}

void add_cluster_flags(CLI::App* app, Overrides& o) {
  o.add<std::size_t>(app, "--depth", "cluster", "depth", "Tree depth D");
  o.add<std::size_t>(app, "--branch", "cluster", "branch", "Children per node B");
  o.add<std::size_t>(app, "--min-leaf", "cluster", "min_leaf", "Prune leaves smaller than E");
  o.add<std::string>(app, "--count-transform", "cluster", "count_transform", "raw or log1p");
}

void print_config_seed(const pipeline::RunConfig& c) {
  std::cout << "seeds: generate=" << c.synth.seed << " cluster=" << c.cluster.options.cluster.seed
            << " model=" << c.model.seed << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-dependent learning-to-rank workbench"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for every stage (overrides the config)");

  Overrides ov;

  auto* gen = app.add_subcommand("generate", "Write a synthetic click log (train/dev/test)");
  std::string gen_out;
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  ov.add<std::size_t>(gen, "--num-train", "generate", "num_train", "Training queries");
  ov.add<std::size_t>(gen, "--num-dev", "generate", "num_dev", "Development queries");
  ov.add<std::size_t>(gen, "--num-test", "generate", "num_test", "Test queries");
  ov.add<std::size_t>(gen, "--planted-clusters", "generate", "num_planted_clusters", "Planted query types");
  ov.add<std::size_t>(gen, "--vocab-size", "generate", "vocab_size", "Tokens per planted cluster");
  ov.add<double>(gen, "--noise-rate", "generate", "noise_rate", "Random-click probability");

  auto* clu = app.add_subcommand("cluster", "Fit the query cluster tree on a training split");
  std::string clu_train, clu_out, clu_report;
  clu->add_option("--train", clu_train, "Training split (.jsonl)")->required()->check(CLI::ExistingFile);
  clu->add_option("--out", clu_out, "Tree file to write")->required();
  clu->add_option("--report", clu_report, "Distinctive n-gram report (default: next to the tree)");
  add_cluster_flags(clu, ov);
  ov.add<std::size_t>(clu, "--top-ngrams", "cluster", "top_ngrams", "Rows per cluster in the report");

  auto* trn = app.add_subcommand("train", "Train one ranking model");
  std::string trn_train, trn_dev, trn_tree, trn_out, trn_log;
  trn->add_option("--train", trn_train, "Training split")->required()->check(CLI::ExistingFile);
  trn->add_option("--dev", trn_dev, "Development split")->required()->check(CLI::ExistingFile);
  trn->add_option("--tree", trn_tree, "Cluster tree (QC variants)");
  trn->add_option("--out", trn_out, "Checkpoint to write")->required();
  trn->add_option("--log", trn_log, "Per-epoch CSV log (default: next to the checkpoint)");
  add_model_flags(trn, ov);

  auto* evl = app.add_subcommand("eval", "Evaluate one checkpoint, or compare two (first is the baseline)");
  std::vector<std::string> evl_models;
  std::string evl_data, evl_out;
  bool evl_scores = false;
  evl->add_option("--model", evl_models, "Checkpoint (repeat for a comparison)")->required()->check(CLI::ExistingFile);
  evl->add_option("--data", evl_data, "Split to evaluate")->required()->check(CLI::ExistingFile);
  evl->add_option("--out-dir", evl_out, "Report directory")->required();
  evl->add_flag("--export-scores", evl_scores, "Also write per-candidate scores");
  ov.add<std::vector<int>>(evl, "--ks", "eval", "ks", "Cutoffs for success@k");
  ov.add<double>(evl, "--alpha", "eval", "alpha", "Significance level");

  auto* swp = app.add_subcommand("sweep", "Relative MRR improvement over DPRM across a parameter grid");
  std::string swp_train, swp_dev, swp_test, swp_tree, swp_base, swp_out;
  swp->add_option("--train", swp_train, "Training split")->required()->check(CLI::ExistingFile);
  swp->add_option("--dev", swp_dev, "Development split")->required()->check(CLI::ExistingFile);
  swp->add_option("--test", swp_test, "Evaluation split")->required()->check(CLI::ExistingFile);
  swp->add_option("--tree", swp_tree, "Fixed cluster tree for mix_rate sweeps (default: fit one)");
  swp->add_option("--baseline", swp_base, "Baseline checkpoint (default: train DPRM per seed)");
  swp->add_option("--out", swp_out, "CSV to write")->required();
  ov.add<std::string>(swp, "--parameter", "sweep", "parameter", "mix_rate, min_leaf, branch or depth");
  ov.add<std::vector<double>>(swp, "--values", "sweep", "values", "Grid values");
  ov.add<std::vector<std::uint64_t>>(swp, "--seeds", "sweep", "seeds", "Training seeds per row");
  add_model_flags(swp, ov);
  add_cluster_flags(swp, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    json raw = read_config_file(config_path);
    if (seed) {
      raw["seed"] = *seed;
      for (const char* s : {"generate", "cluster", "model"})
        if (raw.contains(s) && raw[s].is_object()) raw[s].erase("seed");
    }
    const auto cfg = pipeline::run_config_from_json(ov.apply(std::move(raw)));

    if (gen->parsed()) {
      const auto s = pipeline::cmd_generate(cfg, gen_out);
      print_config_seed(cfg);
      std::cout << "wrote " << s.train << " train, " << s.dev << " dev, " << s.test << " test queries to " << gen_out
                << "\n";
    } else if (clu->parsed()) {
      if (clu_report.empty()) clu_report = (fs::path(clu_out).parent_path() / "ngrams.tsv").string();
      const auto s = pipeline::cmd_cluster(cfg, clu_train, clu_out, clu_report);
      print_config_seed(cfg);
      std::cout << "fit on " << s.train_queries << " queries: " << s.valid_clusters << " valid clusters, " << s.nodes
                << " nodes\ntree: " << clu_out << "\nreport: " << clu_report << "\n";
    } else if (trn->parsed()) {
      if (trn_log.empty()) trn_log = (fs::path(trn_out).parent_path() / (fs::path(trn_out).stem().string() + "_log.csv")).string();
      std::optional<fs::path> tree;
      if (!trn_tree.empty()) tree = trn_tree;
      print_config_seed(cfg);
      const auto r = pipeline::cmd_train(cfg, trn_train, trn_dev, tree, trn_out, trn_log, [](const rank::EpochLog& e) {
        std::printf("epoch %zu  train_loss %.6f  dev_mrr %.6f\n", e.epoch, e.train_loss, e.dev_mrr);
        std::fflush(stdout);
      });
      std::cout << "best epoch " << r.best_epoch << " (dev MRR " << r.best_dev_mrr << ")\ncheckpoint: " << trn_out
                << "\nlog: " << trn_log << "\n";
    } else if (evl->parsed()) {
      std::vector<fs::path> models(evl_models.begin(), evl_models.end());
      const auto r = pipeline::cmd_eval(cfg, models, evl_data, evl_out, evl_scores);
      pipeline::write_metrics(std::cout, r.evaluations, cfg.eval);
      if (r.evaluations.size() == 2) {
        std::ifstream cmp(fs::path(evl_out) / "comparison.md");
        std::string line;
        while (std::getline(cmp, line) && line.rfind("<!--", 0) != 0) std::cout << line << "\n";
      }
    } else if (swp->parsed()) {
      std::optional<fs::path> tree, base;
      if (!swp_tree.empty()) tree = swp_tree;
      if (!swp_base.empty()) base = swp_base;
      print_config_seed(cfg);
      pipeline::cmd_sweep(cfg, swp_train, swp_dev, swp_test, tree, base, swp_out, [](const std::string& msg) {
        std::cout << msg << std::endl;
      });
      std::cout << "sweep: " << swp_out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "qdrank: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qdrank: unexpected failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
