#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdrank/errors.hpp"

namespace qdrank::rank {

/// DPRM: plain pairwise model. QC-DPRM: query clusters as an extra sparse input field.
/// QC-WDPRM: wide cross-product features (cluster x categorical token) added to the output logit.
/// QC-MTLRM: clusters as the label of an auxiliary softmax head on the shared layers.
enum class Variant { dprm, qc_dprm, qc_wdprm, qc_mtlrm };

enum class OptimizerKind { adagrad, adam };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::dprm: return "DPRM";
    case Variant::qc_dprm: return "QC-DPRM";
    case Variant::qc_wdprm: return "QC-WDPRM";
    case Variant::qc_mtlrm: return "QC-MTLRM";
  }
  return "DPRM";
}

inline Variant variant_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto& c : s)
    if (c == '_') c = '-';
  if (s == "DPRM") return Variant::dprm;
  if (s == "QC-DPRM") return Variant::qc_dprm;
  if (s == "QC-WDPRM") return Variant::qc_wdprm;
  if (s == "QC-MTLRM") return Variant::qc_mtlrm;
  throw ConfigError("unknown model variant '" + s + "'");
}

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::adagrad ? "adagrad" : "adam"; }

inline OptimizerKind optimizer_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "adagrad") return OptimizerKind::adagrad;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline bool uses_cluster_input(Variant v) { return v == Variant::qc_dprm; }
inline bool uses_wide(Variant v) { return v == Variant::qc_wdprm; }
inline bool uses_cluster_head(Variant v) { return v == Variant::qc_mtlrm; }
inline bool needs_tree(Variant v) { return v != Variant::dprm; }

struct ModelConfig {
  Variant variant = Variant::dprm;
  std::size_t embedding_dim = 40;
  std::vector<std::size_t> hidden_sizes = {256, 128, 64};
  double dropout_rate = 0.0;
  double learning_rate = 0.1;
  OptimizerKind optimizer = OptimizerKind::adagrad;
  double mix_rate = 0.9;                // lambda, QC-MTLRM only
  std::uint64_t vocab_min_freq = 1;     // rarer training tokens map to UNK
  std::size_t cluster_head_hidden = 64;  // QC-MTLRM extra hidden layer
  // QC-MTLRM: hidden layers shared by both tasks; the rest form the rank task's own tower.
  // 0 picks all but the last hidden layer (at least one).
  std::size_t shared_layers = 0;
  std::vector<std::string> wide_fields = {"language", "category"};  // QC-WDPRM cross partners
  double wide_l2 = 1e-6;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
};

inline void validate(const ModelConfig& c) {
  if (c.hidden_sizes.empty()) throw ConfigError("hidden_sizes must not be empty");
  for (auto h : c.hidden_sizes)
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  if (c.embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(c.mix_rate >= 0.0)) throw ConfigError("mix_rate must be non-negative");
  if (c.cluster_head_hidden == 0) throw ConfigError("cluster_head_hidden must be positive");
  if (c.shared_layers > c.hidden_sizes.size())
    throw ConfigError("shared_layers cannot exceed the number of hidden layers");
  if (!(c.wide_l2 >= 0.0)) throw ConfigError("wide_l2 must be non-negative");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

/// Number of hidden layers below the branch point of the cluster head.
inline std::size_t resolved_shared_layers(const ModelConfig& c) {
  if (c.shared_layers != 0) return c.shared_layers;
  return c.hidden_sizes.size() > 1 ? c.hidden_sizes.size() - 1 : 1;
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"embedding_dim", c.embedding_dim},
          {"hidden_sizes", c.hidden_sizes},
          {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"mix_rate", c.mix_rate},
          {"vocab_min_freq", c.vocab_min_freq},
          {"cluster_head_hidden", c.cluster_head_hidden},
          {"shared_layers", c.shared_layers},
          {"wide_fields", c.wide_fields},
          {"wide_l2", c.wide_l2},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("hidden_sizes").get_to(c.hidden_sizes);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("learning_rate").get_to(c.learning_rate);
  c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  j.at("mix_rate").get_to(c.mix_rate);
  j.at("vocab_min_freq").get_to(c.vocab_min_freq);
  j.at("cluster_head_hidden").get_to(c.cluster_head_hidden);
  j.at("shared_layers").get_to(c.shared_layers);
  j.at("wide_fields").get_to(c.wide_fields);
  j.at("wide_l2").get_to(c.wide_l2);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("seed").get_to(c.seed);
  return c;
}

}  // namespace qdrank::rank
