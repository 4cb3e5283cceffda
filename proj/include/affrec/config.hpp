// SPDX-License-Identifier: Apache-2.0
//
// JSON configs: {measure, experiment, seed}. Numbers are written with 17
// significant digits; probabilities may also be given as "p/q" strings.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "affrec/error.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/verification.hpp"

namespace affrec {

using Json = nlohmann::json;

namespace detail {

[[noreturn]] inline void schema(const std::string& what) { throw InputError("config: " + what); }

inline double number(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      std::size_t used = 0;
      if (slash == std::string::npos) {
        const double x = std::stod(s, &used);
        if (used == s.size()) return x;
      } else {
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        std::size_t ua = 0, ub = 0;
        const double num = std::stod(a, &ua);
        const double den = std::stod(b, &ub);
        if (ua == a.size() && ub == b.size() && den != 0.0) return num / den;
      }
    } catch (const std::exception&) {
    }
  }
  schema(where + " must be a number or a \"p/q\" string");
}

inline Vector vector(const Json& j, const std::string& where) {
  if (j.is_number() || j.is_string()) {
    Vector v(1);
    v(0) = number(j, where);
    return v;
  }
  if (!j.is_array() || j.empty()) schema(where + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

inline Matrix matrix(const Json& j, int dim, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) schema(where + " must have " + std::to_string(dim) + " rows");
  Matrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) schema(where + " rows must have length " + std::to_string(dim));
    for (int c = 0; c < dim; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) schema(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) schema("unknown key '" + k + "' in " + where);
  }
}

/// Orthogonal parts per block from "sign", "rotation" or "orthogonal".
inline std::vector<Matrix> orthogonal_parts(const Json& j, const BlockStructure& b, const std::string& where) {
  std::vector<Matrix> out;
  for (int k = 0; k < b.blocks(); ++k) out.push_back(Matrix::Identity(b.block_dim(k), b.block_dim(k)));
  const int given = static_cast<int>(j.contains("sign")) + static_cast<int>(j.contains("rotation")) +
                    static_cast<int>(j.contains("orthogonal"));
  if (given > 1) schema(where + ": give at most one of sign, rotation, orthogonal");
  auto per_block = [&](const Json& v, auto&& fill) {
    if (b.blocks() == 1 && !v.is_array()) {
      fill(0, v);
      return;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != b.blocks()) schema(where + ": one entry per block expected");
    for (int k = 0; k < b.blocks(); ++k) fill(k, v[static_cast<std::size_t>(k)]);
  };
  if (j.contains("sign")) {
    per_block(j["sign"], [&](int k, const Json& s) {
      const double x = number(s, where + ".sign");
      if (x != 1.0 && x != -1.0) schema(where + ".sign must be +1 or -1");
      out[static_cast<std::size_t>(k)] *= x;
    });
  } else if (j.contains("rotation")) {
    per_block(j["rotation"], [&](int k, const Json& a) {
      if (b.block_dim(k) != 2) schema(where + ".rotation applies to 2-dimensional blocks");
      const double t = number(a, where + ".rotation");
      out[static_cast<std::size_t>(k)] << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    });
  } else if (j.contains("orthogonal")) {
    const auto& o = j["orthogonal"];
    const bool single = b.blocks() == 1 && o.is_array() && !o.empty() && o[0].is_array() && !o[0].empty() &&
                        !o[0][0].is_array();
    if (single) {
      out[0] = matrix(o, b.block_dim(0), where + ".orthogonal");
    } else {
      if (!o.is_array() || static_cast<int>(o.size()) != b.blocks()) schema(where + ".orthogonal: one matrix per block");
      for (int k = 0; k < b.blocks(); ++k)
        out[static_cast<std::size_t>(k)] = matrix(o[static_cast<std::size_t>(k)], b.block_dim(k), where + ".orthogonal");
    }
  }
  return out;
}

}  // namespace detail

inline BlockStructure parse_blocks(const Json& j) {
  if (j.is_number_integer()) return BlockStructure::euclidean(j.get<int>());
  if (!j.is_array() || j.empty()) detail::schema("blocks must be a dimension or a list of {exponent, dim}");
  std::vector<double> ex;
  std::vector<int> dims;
  for (const auto& b : j) {
    detail::check_keys(b, {"exponent", "dim"}, "blocks[]");
    if (!b.contains("exponent") || !b.contains("dim")) detail::schema("each block needs exponent and dim");
    ex.push_back(detail::number(b["exponent"], "blocks[].exponent"));
    if (!b["dim"].is_number_integer()) detail::schema("blocks[].dim must be an integer");
    dims.push_back(b["dim"].get<int>());
  }
  return BlockStructure(ex, dims);
}

inline MuSpec parse_measure(const Json& j) {
  detail::check_keys(j, {"blocks", "atoms", "family", "name"}, "measure");
  if (!j.contains("blocks")) detail::schema("measure.blocks is required");
  const BlockStructure b = parse_blocks(j["blocks"]);
  std::vector<AffineAtom> atoms;
  if (j.contains("atoms")) {
    if (!j["atoms"].is_array()) detail::schema("measure.atoms must be an array");
    for (std::size_t i = 0; i < j["atoms"].size(); ++i) {
      const auto& a = j["atoms"][i];
      const std::string where = "atoms[" + std::to_string(i) + "]";
      detail::check_keys(a, {"prob", "scale", "block_scales", "sign", "rotation", "orthogonal", "translation"}, where);
      if (!a.contains("prob") || !a.contains("translation")) detail::schema(where + " needs prob and translation");
      if (a.contains("scale") == a.contains("block_scales")) detail::schema(where + " needs exactly one of scale, block_scales");
      auto orth = detail::orthogonal_parts(a, b, where);
      Similarity m = a.contains("scale")
                         ? Similarity(b, detail::number(a["scale"], where + ".scale"), std::move(orth))
                         : [&] {
                             const Vector s = detail::vector(a["block_scales"], where + ".block_scales");
                             return Similarity::from_block_scales(b, std::vector<double>(s.data(), s.data() + s.size()),
                                                                  std::move(orth));
                           }();
      atoms.push_back({detail::number(a["prob"], where + ".prob"), std::move(m),
                       detail::vector(a["translation"], where + ".translation")});
    }
  }
  std::optional<LogUniformFamily> fam;
  if (j.contains("family")) {
    const auto& f = j["family"];
    detail::check_keys(f, {"prob", "a", "b", "sign", "rotation", "orthogonal", "translation"}, "family");
    for (const char* k : {"prob", "a", "b", "translation"})
      if (!f.contains(k)) detail::schema(std::string("family.") + k + " is required");
    LogUniformFamily lf;
    lf.prob = detail::number(f["prob"], "family.prob");
    lf.a = detail::number(f["a"], "family.a");
    lf.b = detail::number(f["b"], "family.b");
    lf.orthogonal = detail::orthogonal_parts(f, b, "family");
    lf.q = detail::vector(f["translation"], "family.translation");
    fam = lf;
  }
  return MuSpec(b, std::move(atoms), std::move(fam));
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

inline Json measure_to_json(const MuSpec& mu) {
  Json j;
  const auto& b = mu.blocks();
  j["blocks"] = Json::array();
  for (int k = 0; k < b.blocks(); ++k) j["blocks"].push_back({{"exponent", b.exponent(k)}, {"dim", b.block_dim(k)}});
  j["atoms"] = Json::array();
  for (const auto& at : mu.atoms()) {
    Json o = Json::array();
    for (int k = 0; k < b.blocks(); ++k) o.push_back(to_json(Matrix(at.m.orthogonal(k))));
    j["atoms"].push_back({{"prob", at.prob}, {"scale", at.m.scale()}, {"orthogonal", o}, {"translation", to_json(at.q)}});
  }
  if (const auto& f = mu.family()) {
    Json o = Json::array();
    for (const auto& k : f->orthogonal) o.push_back(to_json(k));
    j["family"] = {{"prob", f->prob}, {"a", f->a}, {"b", f->b}, {"orthogonal", o}, {"translation", to_json(f->q)}};
  }
  return j;
}

struct ExperimentConfig {
  std::string kind;
  std::vector<long> n_list;
  Eigen::Index count = 100000;
  std::vector<Vector> v_grid;
  std::optional<Box> interval;
  VerificationTolerances tolerances;
  Json extra = Json::object();
};

struct Config {
  std::string name;
  MuSpec measure;
  ExperimentConfig experiment;
  std::uint64_t seed = 1;
  Json raw;
};

inline ExperimentConfig parse_experiment(const Json& j, int dim) {
  ExperimentConfig e;
  if (j.is_null()) return e;
  if (!j.is_object()) detail::schema("experiment must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") {
      if (!v.is_string()) detail::schema("experiment.kind must be a string");
      e.kind = v.get<std::string>();
    } else if (k == "n_list") {
      if (!v.is_array()) detail::schema("experiment.n_list must be an array");
      for (const auto& n : v) {
        if (!n.is_number_integer() || n.get<long>() < 0) detail::schema("experiment.n_list entries must be integers >= 0");
        e.n_list.push_back(n.get<long>());
      }
    } else if (k == "N") {
      if (!v.is_number() || v.get<double>() < 1) detail::schema("experiment.N must be a positive number");
      e.count = static_cast<Eigen::Index>(v.get<double>());
    } else if (k == "v_grid") {
      if (!v.is_array()) detail::schema("experiment.v_grid must be an array");
      for (const auto& p : v) {
        Vector x = detail::vector(p, "experiment.v_grid");
        if (x.size() != dim) detail::schema("experiment.v_grid points must match the dimension");
        e.v_grid.push_back(std::move(x));
      }
    } else if (k == "interval") {
      detail::check_keys(v, {"lo", "hi"}, "experiment.interval");
      Box b{detail::vector(v.value("lo", Json()), "interval.lo"), detail::vector(v.value("hi", Json()), "interval.hi")};
      if (b.lo.size() != dim || b.hi.size() != dim) detail::schema("experiment.interval must match the dimension");
      e.interval = b;
    } else if (k == "tolerances") {
      detail::check_keys(v, {"final_distance", "require_monotone", "plateau"}, "experiment.tolerances");
      if (v.contains("final_distance")) e.tolerances.final_distance = detail::number(v["final_distance"], "final_distance");
      if (v.contains("plateau")) e.tolerances.plateau = detail::number(v["plateau"], "plateau");
      if (v.contains("require_monotone")) {
        if (!v["require_monotone"].is_boolean()) detail::schema("require_monotone must be a boolean");
        e.tolerances.require_monotone = v["require_monotone"].get<bool>();
      }
    } else {
      e.extra[k] = v;
    }
  }
  return e;
}

inline Config parse_config(const Json& j) {
  detail::check_keys(j, {"name", "measure", "experiment", "seed"}, "config");
  if (!j.contains("measure")) detail::schema("config.measure is required");
  Config c{j.value("name", std::string{}), parse_measure(j["measure"]), {}, 1, j};
  c.experiment = parse_experiment(j.value("experiment", Json()), c.measure.dim());
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) detail::schema("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw InputError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace affrec
