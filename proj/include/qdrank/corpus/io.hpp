#pragma once

// Dataset files are JSON Lines: a header line declaring the schema, then one query per line.
//
//   {"format":"qdrank-dataset","version":1,"split":"train","schema":{...},"provenance":"..."}
//   {"query_id":"q1","timestamp":0,"sparse_fields":{"ngram":[["a",2]]},"dense_fields":{"hour":0.5},
//    "candidates":[{"doc_id":"d1","sparse_fields":{...},"dense_fields":{...}}, ...],
//    "clicked_index":2,"propensity_weight":1.0}

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qdrank/corpus/types.hpp"
#include "qdrank/errors.hpp"

namespace qdrank::corpus {

inline constexpr const char* kDatasetFormat = "qdrank-dataset";
inline constexpr int kDatasetVersion = 1;

namespace detail {

using nlohmann::json;

inline json sparse_to_json(const SparseFields& sparse) {
  json out = json::object();
  for (const auto& [field, tokens] : sparse) {
    json arr = json::array();
    for (const auto& tc : tokens) arr.push_back(json::array({tc.token, tc.count}));
    out[field] = std::move(arr);
  }
  return out;
}

inline json dense_to_json(const DenseFields& dense) {
  json out = json::object();
  for (const auto& [field, value] : dense) out[field] = value;
  return out;
}

inline SparseFields sparse_from_json(const json& j) {
  SparseFields out;
  for (const auto& [field, arr] : j.items()) {
    auto& tokens = out[field];
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number_unsigned())
        throw json::type_error::create(302, "token entries must be [string, positive count]", &e);
      tokens.push_back({e[0].get<std::string>(), e[1].get<std::uint32_t>()});
    }
  }
  return out;
}

inline DenseFields dense_from_json(const json& j) {
  DenseFields out;
  for (const auto& [field, v] : j.items()) out[field] = v.get<double>();
  return out;
}

}  // namespace detail

inline nlohmann::json schema_to_json(const Schema& s) {
  return {{"query_sparse", s.query_sparse}, {"query_dense", s.query_dense},
          {"doc_sparse", s.doc_sparse},     {"doc_dense", s.doc_dense},
          {"num_candidates", s.num_candidates}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  j.at("query_sparse").get_to(s.query_sparse);
  j.at("query_dense").get_to(s.query_dense);
  j.at("doc_sparse").get_to(s.doc_sparse);
  j.at("doc_dense").get_to(s.doc_dense);
  j.at("num_candidates").get_to(s.num_candidates);
  return s;
}

inline nlohmann::json record_to_json(const QueryRecord& q) {
  using nlohmann::json;
  json cands = json::array();
  for (const auto& d : q.candidates)
    cands.push_back({{"doc_id", d.doc_id},
                     {"sparse_fields", detail::sparse_to_json(d.sparse)},
                     {"dense_fields", detail::dense_to_json(d.dense)}});
  return {{"query_id", q.query_id},
          {"timestamp", q.timestamp},
          {"sparse_fields", detail::sparse_to_json(q.sparse)},
          {"dense_fields", detail::dense_to_json(q.dense)},
          {"candidates", std::move(cands)},
          {"clicked_index", q.clicked_index},
          {"propensity_weight", q.propensity_weight}};
}

inline QueryRecord record_from_json(const nlohmann::json& j) {
  QueryRecord q;
  j.at("query_id").get_to(q.query_id);
  j.at("timestamp").get_to(q.timestamp);
  q.sparse = detail::sparse_from_json(j.at("sparse_fields"));
  q.dense = detail::dense_from_json(j.at("dense_fields"));
  for (const auto& c : j.at("candidates")) {
    DocumentRecord d;
    c.at("doc_id").get_to(d.doc_id);
    d.sparse = detail::sparse_from_json(c.at("sparse_fields"));
    d.dense = detail::dense_from_json(c.at("dense_fields"));
    q.candidates.push_back(std::move(d));
  }
  const auto& clicked = j.at("clicked_index");
  if (!clicked.is_number_integer() || clicked.get<std::int64_t>() < 0)
    throw nlohmann::json::type_error::create(302, "clicked_index must be a non-negative integer", &clicked);
  q.clicked_index = clicked.get<std::size_t>();
  j.at("propensity_weight").get_to(q.propensity_weight);
  return q;
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  nlohmann::json header = {{"format", kDatasetFormat},
                           {"version", kDatasetVersion},
                           {"split", to_string(ds.split)},
                           {"schema", schema_to_json(ds.schema)},
                           {"provenance", ds.provenance}};
  out << header.dump() << '\n';
  for (const auto& q : ds.records) out << record_to_json(q).dump() << '\n';
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(out, ds);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Parses a dataset stream. Syntax problems raise ParseError with the 1-based line number;
/// well-formed records that break the schema raise SchemaError.
inline Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      try {
        if (j.at("format").get<std::string>() != kDatasetFormat)
          throw ParseError(line_no, "not a qdrank dataset header");
        if (j.at("version").get<int>() != kDatasetVersion)
          throw ParseError(line_no, "unsupported dataset version");
        ds.schema = schema_from_json(j.at("schema"));
        ds.split = split_from_string(j.at("split").get<std::string>());
        ds.provenance = j.value("provenance", std::string{});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("bad header: ") + e.what());
      }
      have_header = true;
      continue;
    }
    QueryRecord q;
    try {
      q = record_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad record: ") + e.what());
    }
    try {
      validate(q, ds.schema);
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    ds.records.push_back(std::move(q));
  }
  if (!have_header) throw ParseError(line_no, "missing dataset header");
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

}  // namespace qdrank::corpus
