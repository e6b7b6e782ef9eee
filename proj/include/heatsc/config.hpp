#ifndef HEATSC_CONFIG_HPP
#define HEATSC_CONFIG_HPP

// Experiment configuration: one JSON document plus dotted-path overrides.
//
//   {
//     "manifold":  {"kind": "circle"|"torus"|"sphere", "dim": n, "scale": [..]},
//     "V": field, "W": field (optional),
//     "t": 1.0, "T": 1.0,
//     "hbar_grid": {"max": 0.5, "min": 0.01, "count": 16} or [h0, h1, ...],
//     "parametrix": {"N", "eta", "ode_steps", "quad_tol", "fd_step", "fd_nest_factor"},
//     "oracle":     {"cutoff", "hbar", "count", "cache_dir"},
//     "bound":      {"alpha", "delta", "kappa", "w0", "K", "grid_alpha", "grid_delta"},
//     "expand":     {"seed", "diagonal_points", "pairs"},
//     "partition":  {"order", "fit_max_tau", "t_sweep"}
//   }
//
// field:
//   {"rank": m, "kind": "constant", "data": scalar or m x m nested list}
//   {"rank": m, "kind": "fourier", "data": [{"row", "col", "k": [..], "cos", "sin"}, ..]}
//   {"rank": m, "kind": "zonal", "data": {"pole": [x, y, z], "terms": [{"row", "col", "coeffs": [..]}, ..]}}
// with an optional "lower_bound".

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatsc/errors.hpp"
#include "heatsc/fields.hpp"
#include "heatsc/geometry.hpp"
#include "heatsc/parametrix.hpp"

namespace heatsc {

using json = nlohmann::json;

struct BoundInputs {
  double alpha = 2.0;
  double delta = 1.0;
  std::optional<double> kappa;  ///< default: 0 on the model manifolds (Ric >= 0)
  std::optional<double> w0;     ///< default: declared or sampled lower bound of W
  std::optional<double> K;      ///< default: the manifold curvature
  std::vector<double> grid_alpha{1.5, 2.0, 3.0, 4.0};
  std::vector<double> grid_delta{0.25, 0.5, 1.0, 2.0};
};

struct ExperimentConfig {
  json document;
  ModelManifold manifold = ModelManifold::circle(1.0);
  EndomorphismField V = EndomorphismField::zero(1);
  std::optional<EndomorphismField> W;
  double t = 1.0;
  double T = 1.0;
  std::vector<double> hbar_grid;
  ParametrixConfig parametrix;
  int oracle_cutoff = 0;
  double oracle_hbar = 1.0;
  int oracle_count = 50;
  std::string cache_dir;
  BoundInputs bound;
  std::uint64_t seed = 20240617;
  int diagonal_points = 8;
  int pairs = 24;
  int fit_order = 2;
  double fit_max_tau = 0.01;
  std::vector<double> t_sweep;
};

inline std::vector<double> geometric_grid(double hi, double lo, int count) {
  if (!(hi > 0.0) || !(lo > 0.0) || hi < lo) throw ValidationError("hbar grid bounds must satisfy 0 < min <= max");
  if (count < 1) throw ValidationError("hbar grid must be nonempty");
  if (count == 1) return {hi};
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = hi * std::pow(lo / hi, static_cast<double>(i) / (count - 1));
  g.back() = lo;
  return g;
}

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

inline ModelManifold parse_manifold(const json& j) {
  if (!j.is_object()) throw ValidationError("manifold must be an object");
  const auto kind = get_or<std::string>(j, "kind", "");
  std::vector<double> scale;
  if (j.contains("scale")) {
    if (j.at("scale").is_number())
      scale.push_back(j.at("scale").get<double>());
    else
      scale = get_or<std::vector<double>>(j, "scale", {});
  }
  if (kind == "circle") {
    if (j.contains("dim") && get_or<int>(j, "dim", 1) != 1) throw ValidationError("circle has dimension 1");
    return ModelManifold::circle(scale.empty() ? 1.0 : scale.at(0));
  }
  if (kind == "sphere") {
    return ModelManifold::round_sphere(scale.empty() ? 1.0 : scale.at(0), get_or<int>(j, "dim", 2));
  }
  if (kind == "torus") {
    const int dim = get_or<int>(j, "dim", scale.empty() ? 2 : static_cast<int>(scale.size()));
    if (scale.empty()) scale.assign(dim, 2.0 * std::numbers::pi);
    if (scale.size() == 1 && dim > 1) scale.assign(dim, scale[0]);
    if (static_cast<int>(scale.size()) != dim) throw DimensionMismatch("torus scale must list one length per dimension");
    return ModelManifold::flat_torus(scale);
  }
  throw ValidationError("unknown manifold kind '" + kind + "'");
}

inline EndomorphismField parse_field(const json& j, const ModelManifold& m) {
  if (!j.is_object()) throw ValidationError("field descriptor must be an object");
  const int rank = get_or<int>(j, "rank", 1);
  const auto kind = get_or<std::string>(j, "kind", "constant");
  const json data = j.contains("data") ? j.at("data") : json(0.0);
  std::optional<EndomorphismField> f;
  try {
    if (kind == "constant") {
      Eigen::MatrixXd a(rank, rank);
      if (data.is_number()) {
        a = data.get<double>() * Eigen::MatrixXd::Identity(rank, rank);
      } else {
        const auto rows = data.get<std::vector<std::vector<double>>>();
        if (static_cast<int>(rows.size()) != rank) throw DimensionMismatch("constant field data has wrong row count");
        for (int r = 0; r < rank; ++r) {
          if (static_cast<int>(rows[r].size()) != rank) throw DimensionMismatch("constant field data is not square");
          for (int c = 0; c < rank; ++c) a(r, c) = rows[r][c];
        }
      }
      f = EndomorphismField::constant(SymMatrix(a));
    } else if (kind == "fourier") {
      std::vector<FourierTerm> terms;
      for (const auto& t : data) {
        FourierTerm ft;
        ft.row = get_or<int>(t, "row", 0);
        ft.col = get_or<int>(t, "col", 0);
        ft.k = get_or<std::vector<int>>(t, "k", std::vector<int>(m.dim(), 0));
        ft.cos_coef = get_or<double>(t, "cos", 0.0);
        ft.sin_coef = get_or<double>(t, "sin", 0.0);
        terms.push_back(ft);
      }
      f = EndomorphismField::fourier(rank, m.dim(), terms);
    } else if (kind == "zonal") {
      const auto pole = get_or<std::vector<double>>(data, "pole", {0.0, 0.0, 1.0});
      if (pole.size() != 3) throw DimensionMismatch("zonal pole needs three components");
      std::vector<ZonalTerm> terms;
      for (const auto& t : data.at("terms")) {
        ZonalTerm zt;
        zt.row = get_or<int>(t, "row", 0);
        zt.col = get_or<int>(t, "col", 0);
        zt.coeffs = get_or<std::vector<double>>(t, "coeffs", {});
        terms.push_back(zt);
      }
      f = EndomorphismField::zonal(rank, Eigen::Vector3d(pole[0], pole[1], pole[2]), terms);
    } else {
      throw ValidationError("unknown field kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field descriptor: ") + e.what());
  }
  f->check_compatible(m);
  if (j.contains("lower_bound")) {
    f->set_lower_bound(get_or<double>(j, "lower_bound", 0.0));
    validate_lower_bound(*f, m);
  }
  return *f;
}

inline json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

}  // namespace detail

/// Applies KEY=VALUE with a dotted KEY; VALUE is parsed as JSON when possible,
/// otherwise taken as a string. Numeric segments index into arrays.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like KEY=VALUE: " + assignment);
  const std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::stringstream ss(key);
  std::string seg;
  std::vector<std::string> parts;
  while (std::getline(ss, seg, '.')) {
    if (seg.empty()) throw ValidationError("empty segment in override key: " + key);
    parts.push_back(seg);
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw ValidationError("override key indexes an array with '" + p + "'");
      }
      if (idx >= node->size()) throw ValidationError("override index out of range: " + key);
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ValidationError("override key descends into a scalar: " + key);
      node = &(*node)[p];
    }
    if (last) *node = detail::parse_override_value(assignment.substr(eq + 1));
  }
}

inline ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.document = doc;
  using detail::get_or;
  cfg.manifold = detail::parse_manifold(doc.contains("manifold") ? doc.at("manifold") : json::object({{"kind", "circle"}}));
  if (doc.contains("V")) cfg.V = detail::parse_field(doc.at("V"), cfg.manifold);
  if (doc.contains("W") && !doc.at("W").is_null()) {
    cfg.W = detail::parse_field(doc.at("W"), cfg.manifold);
    if (cfg.W->rank() != cfg.V.rank()) throw DimensionMismatch("V and W must have the same rank");
  }
  cfg.t = get_or<double>(doc, "t", 1.0);
  cfg.T = get_or<double>(doc, "T", 1.0);
  if (!(cfg.t > 0.0) || !(cfg.T > 0.0)) throw DomainError("t and T must be positive");

  const json grid = doc.contains("hbar_grid") ? doc.at("hbar_grid") : json::object();
  if (grid.is_array()) {
    cfg.hbar_grid = grid.get<std::vector<double>>();
    for (double h : cfg.hbar_grid)
      if (!(h > 0.0)) throw DomainError("hbar values must be positive");
  } else {
    cfg.hbar_grid = geometric_grid(get_or<double>(grid, "max", 0.5), get_or<double>(grid, "min", 0.01),
                                   get_or<int>(grid, "count", 16));
  }
  if (cfg.hbar_grid.empty()) throw ValidationError("hbar grid must be nonempty");

  const json pc = doc.contains("parametrix") ? doc.at("parametrix") : json::object();
  cfg.parametrix.N = get_or<int>(pc, "N", cfg.parametrix.N);
  cfg.parametrix.eta = get_or<double>(pc, "eta", cfg.parametrix.eta);
  cfg.parametrix.ode_steps = get_or<int>(pc, "ode_steps", cfg.parametrix.ode_steps);
  cfg.parametrix.quad_tol = get_or<double>(pc, "quad_tol", cfg.parametrix.quad_tol);
  cfg.parametrix.fd_step = get_or<double>(pc, "fd_step", cfg.parametrix.fd_step);
  cfg.parametrix.fd_nest_factor = get_or<double>(pc, "fd_nest_factor", cfg.parametrix.fd_nest_factor);
  cfg.parametrix.validate(cfg.manifold);

  const json oc = doc.contains("oracle") ? doc.at("oracle") : json::object();
  cfg.oracle_cutoff = get_or<int>(oc, "cutoff", 0);
  cfg.oracle_hbar = get_or<double>(oc, "hbar", 1.0);
  cfg.oracle_count = get_or<int>(oc, "count", 50);
  cfg.cache_dir = get_or<std::string>(oc, "cache_dir", "");
  if (cfg.oracle_cutoff < 0 || cfg.oracle_count < 1 || !(cfg.oracle_hbar > 0.0))
    throw ValidationError("oracle settings out of range");

  const json bc = doc.contains("bound") ? doc.at("bound") : json::object();
  cfg.bound.alpha = get_or<double>(bc, "alpha", 2.0);
  cfg.bound.delta = get_or<double>(bc, "delta", 1.0);
  if (bc.contains("kappa")) cfg.bound.kappa = get_or<double>(bc, "kappa", 0.0);
  if (bc.contains("w0")) cfg.bound.w0 = get_or<double>(bc, "w0", 0.0);
  if (bc.contains("K")) cfg.bound.K = get_or<double>(bc, "K", 0.0);
  cfg.bound.grid_alpha = get_or<std::vector<double>>(bc, "grid_alpha", cfg.bound.grid_alpha);
  cfg.bound.grid_delta = get_or<std::vector<double>>(bc, "grid_delta", cfg.bound.grid_delta);

  const json ec = doc.contains("expand") ? doc.at("expand") : json::object();
  cfg.seed = get_or<std::uint64_t>(ec, "seed", cfg.seed);
  cfg.diagonal_points = get_or<int>(ec, "diagonal_points", 8);
  cfg.pairs = get_or<int>(ec, "pairs", 24);
  if (cfg.diagonal_points < 0 || cfg.pairs < 0 || cfg.diagonal_points + cfg.pairs == 0)
    throw ValidationError("expand needs at least one sample point");

  const json pt = doc.contains("partition") ? doc.at("partition") : json::object();
  cfg.fit_order = get_or<int>(pt, "order", 2);
  cfg.fit_max_tau = get_or<double>(pt, "fit_max_tau", 0.01);
  cfg.t_sweep = get_or<std::vector<double>>(pt, "t_sweep", {0.25 * cfg.T, 0.5 * cfg.T, cfg.T});
  for (double s : cfg.t_sweep)
    if (!(s > 0.0) || s > cfg.T * (1 + 1e-12)) throw DomainError("t_sweep entries must lie in (0, T]");
  return cfg;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path + ": " + e.what());
  }
}

/// Loads a config file (or the empty document) and applies overrides in order.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = path.empty() ? json::object() : read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace heatsc

#endif  // HEATSC_CONFIG_HPP
