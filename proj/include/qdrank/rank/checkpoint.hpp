#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdrank/cluster/clusterer.hpp"
#include "qdrank/corpus/io.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/rank/model.hpp"

namespace qdrank::rank {

inline constexpr const char* kCheckpointFormat = "qdrank-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json model_to_json(const Model& m, const nlohmann::json& training = {}) {
  using nlohmann::json;
  const auto& enc = m.encoder;
  json vocabs = json::object();
  for (const auto& [name, v] : enc.vocabs) vocabs[name] = v.tokens();
  json tables = json::array();
  for (const auto& t : m.params.tables) tables.push_back(cluster::detail::matrix_to_json(t));
  json dense = json::array();
  for (const auto& d : m.params.dense) dense.push_back(cluster::detail::matrix_to_json(d));
  const Eigen::VectorXd& w = m.params.wide;
  json out = {{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"config", config_to_json(m.spec.config)},
              {"schema", corpus::schema_to_json(enc.schema)},
              {"vocabularies", std::move(vocabs)},
              {"cluster_vocabulary", enc.clusters.paths()},
              {"wide_vocabulary", enc.wide.keys()},
              {"training", training},
              {"parameters",
               {{"tables", std::move(tables)},
                {"dense", std::move(dense)},
                {"wide", std::vector<double>(w.data(), w.data() + w.size())}}}};
  if (m.clusterer) out["cluster_tree"] = cluster::clusterer_to_json(*m.clusterer);
  return out;
}

inline Model model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw DataError("not a qdrank checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw CompatibilityError("unsupported checkpoint version");
  Model m;
  const auto config = config_from_json(j.at("config"));
  validate(config);
  auto& enc = m.encoder;
  enc.variant = config.variant;
  enc.wide_fields = config.wide_fields;
  enc.schema = corpus::schema_from_json(j.at("schema"));
  for (const auto& [name, toks] : j.at("vocabularies").items())
    enc.vocabs.emplace(name, TokenVocabulary(toks.get<std::vector<std::string>>()));
  enc.clusters = ClusterVocabulary(j.at("cluster_vocabulary").get<std::vector<std::string>>());
  if (uses_cluster_input(config.variant)) enc.cluster_inputs = TokenVocabulary(enc.clusters.paths());
  enc.wide = WideVocabulary(j.at("wide_vocabulary").get<std::vector<std::string>>());
  if (j.contains("cluster_tree")) m.clusterer = cluster::clusterer_from_json(j.at("cluster_tree"));
  if (needs_tree(config.variant) && !m.clusterer)
    throw CompatibilityError("checkpoint for " + std::string(to_string(config.variant)) + " lacks its cluster tree");
  m.spec = make_spec(config, enc);

  const auto& p = j.at("parameters");
  for (const auto& t : p.at("tables")) m.params.tables.push_back(cluster::detail::matrix_from_json(t));
  for (const auto& d : p.at("dense")) m.params.dense.push_back(cluster::detail::matrix_from_json(d));
  const auto wide = p.at("wide").get<std::vector<double>>();
  m.params.wide = Eigen::Map<const Eigen::VectorXd>(wide.data(), static_cast<Eigen::Index>(wide.size()));

  const auto expected = zero_parameters(m.spec);
  bool ok = expected.tables.size() == m.params.tables.size() && expected.dense.size() == m.params.dense.size() &&
            expected.wide.size() == m.params.wide.size();
  for (std::size_t i = 0; ok && i < expected.tables.size(); ++i)
    ok = expected.tables[i].rows() == m.params.tables[i].rows() && expected.tables[i].cols() == m.params.tables[i].cols();
  for (std::size_t i = 0; ok && i < expected.dense.size(); ++i)
    ok = expected.dense[i].rows() == m.params.dense[i].rows() && expected.dense[i].cols() == m.params.dense[i].cols();
  if (!ok) throw CompatibilityError("checkpoint parameter shapes do not match its configuration");
  return m;
}

inline void save_model(const Model& m, const std::filesystem::path& path, const nlohmann::json& training = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << model_to_json(m, training).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "checkpoint '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------------------------
// Score export: tab-separated, header "query_id\tdoc_id\tscore", one row per candidate in
// dataset order, scores printed with 17 significant digits so they read back exactly.

struct ScoreRow {
  std::string query_id;
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

inline std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", s);
  return buf;
}

inline void write_scores(std::ostream& out, const Model& m, const corpus::Dataset& ds) {
  out << "query_id\tdoc_id\tscore\n";
  Workspace ws;
  for (const auto& q : ds.records) {
    const auto s = score_documents(m.spec, m.params, m.encode(q), ws);
    for (std::size_t i = 0; i < s.size(); ++i)
      out << q.query_id << '\t' << q.candidates[i].doc_id << '\t' << format_score(s[i]) << '\n';
  }
}

inline void export_scores(const Model& m, const corpus::Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_scores(out, m, ds);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<ScoreRow> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "query_id\tdoc_id\tscore")
    throw ParseError(1, "score file '" + path.string() + "' lacks the expected header");
  std::vector<ScoreRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError(lineno, "expected 3 tab-separated columns");
    ScoreRow r{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), 0.0};
    try {
      std::size_t used = 0;
      const std::string num = line.substr(t2 + 1);
      r.score = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad score value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qdrank::rank
