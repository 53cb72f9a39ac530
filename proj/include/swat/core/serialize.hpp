#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/core/budget.hpp"
#include "swat/core/errors.hpp"
#include "swat/core/transformer.hpp"

// Parameter files, schema "swat.transformer.v1":
//
//   { "schema": "swat.transformer.v1",
//     "embedding": { "matrix": <matrix>, "pe": <pe> },
//     "blocks": [ { "attention": { "window": U, "embed_dim": D,
//                                  "heads": [ { "key": <matrix>, "query": <matrix>,
//                                               "value": <matrix> } ] },
//                   "fnn": { "layers": [ { "weight": <matrix>, "bias": [..] } ] } } ],
//     "clip": R | null,
//     "budget": { "M", "U": [..], "D", "H", "L", "W", "S", "B", "R" }   (optional)
//     "construction": { free-form metadata }                           (optional) }
//
//   <matrix> = { "rows", "cols", "format": "dense", "data": [row-major values] }
//            | { "rows", "cols", "format": "coo",   "entries": [[row, col, value], ..] }
//   <pe>     = { "kind": "zero" | "constant" | "sinusoidal" | "sinusoidal_memory",
//                "dim": D, "phi": .., "value": [..], "bank": [[..], ..],
//                "trailing": n }

namespace swat {

using json = nlohmann::json;

inline constexpr const char* kTransformerSchema = "swat.transformer.v1";

inline json matrix_to_json(const SparseMatrix& m) {
  json j{{"rows", m.rows()}, {"cols", m.cols()}};
  const double density = m.size() ? static_cast<double>(m.nonZeros()) / static_cast<double>(m.size()) : 1.0;
  if (density < 0.25) {
    j["format"] = "coo";
    json entries = json::array();
    for (Eigen::Index r = 0; r < m.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) entries.push_back({it.row(), it.col(), it.value()});
    j["entries"] = std::move(entries);
  } else {
    j["format"] = "dense";
    const Eigen::MatrixXd d(m);
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(d.size()));
    for (Eigen::Index r = 0; r < d.rows(); ++r)
      for (Eigen::Index c = 0; c < d.cols(); ++c) data.push_back(d(r, c));
    j["data"] = std::move(data);
  }
  return j;
}

inline SparseMatrix matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const std::string format = j.at("format").get<std::string>();
  std::vector<Triplet> entries;
  if (format == "coo") {
    for (const auto& e : j.at("entries")) {
      const auto r = e.at(0).get<Eigen::Index>();
      const auto c = e.at(1).get<Eigen::Index>();
      if (r < 0 || r >= rows || c < 0 || c >= cols) throw UsageError("matrix entry out of range");
      entries.emplace_back(r, c, e.at(2).get<double>());
    }
  } else if (format == "dense") {
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw UsageError("dense matrix has wrong length");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (double v = data[static_cast<std::size_t>(r * cols + c)]; v != 0.0) entries.emplace_back(r, c, v);
  } else {
    throw UsageError("unknown matrix format '" + format + "'");
  }
  return sparse_from_triplets(rows, cols, entries);
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json pe_to_json(const PositionalEncoding& pe) {
  json j{{"dim", pe.dim()}};
  switch (pe.kind()) {
    case PositionalEncoding::Kind::zero:
      j["kind"] = "zero";
      break;
    case PositionalEncoding::Kind::constant:
      j["kind"] = "constant";
      j["value"] = vector_to_json(pe.constant_value());
      break;
    case PositionalEncoding::Kind::sinusoidal:
      j["kind"] = "sinusoidal";
      j["phi"] = pe.phi();
      break;
    case PositionalEncoding::Kind::sinusoidal_memory: {
      j["kind"] = "sinusoidal_memory";
      j["phi"] = pe.phi();
      json bank = json::array();
      for (const auto& u : pe.bank()) bank.push_back(vector_to_json(u));
      j["bank"] = std::move(bank);
      j["trailing"] = pe.trailing();
      break;
    }
  }
  return j;
}

inline PositionalEncoding pe_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const Eigen::Index dim = j.at("dim").get<Eigen::Index>();
  if (kind == "zero") return PositionalEncoding::zero(dim);
  if (kind == "constant") return PositionalEncoding::constant(vector_from_json(j.at("value")));
  if (kind == "sinusoidal") return PositionalEncoding::sinusoidal(dim, j.at("phi").get<double>());
  if (kind == "sinusoidal_memory") {
    std::vector<Eigen::VectorXd> bank;
    for (const auto& u : j.at("bank")) bank.push_back(vector_from_json(u));
    return PositionalEncoding::sinusoidal_memory(dim, j.at("phi").get<double>(), std::move(bank),
                                                 j.value("trailing", Eigen::Index{0}));
  }
  throw UsageError("unknown positional encoding '" + kind + "'");
}

inline json budget_to_json(const ClassBudget& b) {
  json j{{"M", b.M}, {"U", b.windows}, {"D", b.D}, {"H", b.H}, {"L", b.L}, {"W", b.W}, {"S", b.S}, {"B", b.B}};
  j["R"] = b.R ? json(*b.R) : json(nullptr);
  return j;
}

inline ClassBudget budget_from_json(const json& j) {
  ClassBudget b;
  b.M = j.at("M").get<int>();
  b.windows = j.at("U").get<std::vector<int>>();
  b.D = j.at("D").get<long>();
  b.H = j.at("H").get<int>();
  b.L = j.at("L").get<int>();
  b.W = j.at("W").get<long>();
  b.S = j.at("S").get<long>();
  b.B = j.at("B").get<double>();
  if (j.contains("R") && !j.at("R").is_null()) b.R = j.at("R").get<double>();
  return b;
}

inline json attention_to_json(const AttentionParams& g) {
  json heads = json::array();
  for (const auto& h : g.heads)
    heads.push_back(
        {{"key", matrix_to_json(h.key)}, {"query", matrix_to_json(h.query)}, {"value", matrix_to_json(h.value)}});
  return {{"window", g.window}, {"embed_dim", g.embed_dim}, {"heads", std::move(heads)}};
}

inline json fnn_to_json(const FnnParams& f) {
  json layers = json::array();
  for (const auto& l : f.layers) layers.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  return {{"layers", std::move(layers)}};
}

inline json transformer_to_json(const TransformerParams& t) {
  json blocks = json::array();
  for (const auto& b : t.blocks) blocks.push_back({{"attention", attention_to_json(b.attention)}, {"fnn", fnn_to_json(b.fnn)}});
  json j{{"schema", kTransformerSchema},
         {"embedding", {{"matrix", matrix_to_json(t.embedding.matrix)}, {"pe", pe_to_json(t.embedding.pe)}}},
         {"blocks", std::move(blocks)}};
  j["clip"] = t.clip ? json(*t.clip) : json(nullptr);
  return j;
}

inline TransformerParams transformer_from_json(const json& j) {
  if (j.value("schema", std::string{}) != kTransformerSchema)
    throw UsageError(std::string("parameter file is not ") + kTransformerSchema);
  TransformerParams t;
  try {
    t.embedding.matrix = matrix_from_json(j.at("embedding").at("matrix"));
    t.embedding.pe = pe_from_json(j.at("embedding").at("pe"));
    for (const auto& jb : j.at("blocks")) {
      TransformerBlock b;
      const auto& ja = jb.at("attention");
      b.attention.window = ja.at("window").get<int>();
      b.attention.embed_dim = ja.at("embed_dim").get<Eigen::Index>();
      for (const auto& jh : ja.at("heads"))
        b.attention.heads.push_back(
            {matrix_from_json(jh.at("key")), matrix_from_json(jh.at("query")), matrix_from_json(jh.at("value"))});
      for (const auto& jl : jb.at("fnn").at("layers"))
        b.fnn.layers.push_back({matrix_from_json(jl.at("weight")), vector_from_json(jl.at("bias"))});
      t.blocks.push_back(std::move(b));
    }
    if (j.contains("clip") && !j.at("clip").is_null()) t.clip = j.at("clip").get<double>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed parameter file: ") + e.what());
  }
  t.validate();
  return t;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os << j.dump(1) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

}  // namespace swat
