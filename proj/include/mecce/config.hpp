#pragma once

// Experiment configs (JSON). Requires nlohmann/json on the include path.
//
// Units: every frequency field (a_max, j, j_max, a, J) is entered in plain
// frequency and multiplied by 2 pi on load. Rates (gamma, exchange) and times
// are taken as given. The nv_surface model has fixed physical units: nm, us,
// rad/us, and its T1 is in us.
//
// {
//   "model": {
//     "kind": "chain",          n, j_max, a_max, state
//     "kind": "lattice2d",      side, j, a_max, periodic, state
//     "kind": "nv_surface",     depth_nm, density_per_nm2, t1_us, extent_nm, field_axis
//     "kind": "explicit",       spins: [{"a": .., "position": [x, y, z]}], edges: [[i, j, J]], state
//   },                          state: neel | maximally_mixed | random_pure | random_basis
//   "dissipation": {"gamma": rate} or {"t1": time}, optional "exchange": rate,
//   "pulses": {"p": 0, "timing": "cpmg" | "equidistant"},
//   "solver": {"method": "mecce" | "exact" | "both", "orders": [..], "neighbor": {"rule": .., "value": ..},
//              "guard_epsilon": 1e-10, "time": {"t_max": .., "points": ..}, "seeds": [..],
//              "unitary_reference": false, "diagnostics": false},
//   "output": {"directory": "out", "formats": ["csv"]}
// }

#include "mecce/cce.hpp"
#include "mecce/spin_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecce {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ModelKind { chain, lattice2d, nv_surface, explicit_spec };
enum class Method { mecce, exact, both };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::chain: return "chain";
    case ModelKind::lattice2d: return "lattice2d";
    case ModelKind::nv_surface: return "nv_surface";
    case ModelKind::explicit_spec: return "explicit";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::mecce: return "mecce";
    case Method::exact: return "exact";
    case Method::both: return "both";
  }
  return "?";
}

struct ExplicitSpin {
  double a = 0.0;  // plain frequency
  std::optional<Vec3> position;
};

struct ExplicitEdge {
  int i = 0, j = 0;
  double J = 0.0;  // plain frequency
};

struct ExperimentConfig {
  ModelKind kind = ModelKind::chain;
  // chain / lattice2d (plain frequencies)
  std::size_t n = 8;
  std::size_t side = 6;
  double j = 0.0;
  double a_max = 0.0;
  bool periodic = false;
  std::string state = "neel";
  // nv_surface
  NvSurfaceParams nv;
  // explicit
  std::vector<ExplicitSpin> spins;
  std::vector<ExplicitEdge> edges;

  std::optional<double> gamma;
  std::optional<double> t1;
  double exchange = 0.0;

  int p = 0;
  PulseTiming timing = PulseTiming::cpmg;

  Method method = Method::mecce;
  std::vector<std::size_t> orders{1, 2, 3, 4};
  NeighborRule neighbor;
  double guard_epsilon = 1e-10;
  double t_max = 1.0;
  std::size_t points = 101;
  std::vector<std::uint64_t> seeds{1};
  bool unitary_reference = false;
  bool diagnostics = false;

  std::string out_dir = "out";
  std::vector<std::string> formats{"csv"};
};

namespace config_detail {

using nlohmann::json;

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key, "missing required field");
  return j.at(key);
}

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(path + "." + it.key(), "unknown field");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

inline double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be > 0");
  return v;
}

inline double nonnegative(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (v < 0.0) throw ConfigError(path, "must be >= 0");
  return v;
}

inline std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

inline std::string text(const json& j, const std::string& path, std::initializer_list<const char*> choices) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  const auto s = j.get<std::string>();
  std::string list;
  for (const char* c : choices) {
    if (s == c) return s;
    list += (list.empty() ? "" : ", ") + std::string(c);
  }
  throw ConfigError(path, "'" + s + "' is not one of " + list);
}

inline Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected [x, y, z]");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

inline void parse_model(const json& m, ExperimentConfig& c) {
  const std::string kind = text(need(m, "kind", "model"), "model.kind", {"chain", "lattice2d", "nv_surface", "explicit"});
  const auto state = [&] {
    if (m.contains("state")) {
      c.state = text(m["state"], "model.state", {"neel", "maximally_mixed", "random_pure", "random_basis"});
    }
  };
  if (kind == "chain") {
    only_keys(m, "model", {"kind", "n", "j_max", "a_max", "state"});
    c.kind = ModelKind::chain;
    c.n = count(need(m, "n", "model"), "model.n");
    if (c.n == 0) throw ConfigError("model.n", "must be >= 1");
    c.j = nonnegative(need(m, "j_max", "model"), "model.j_max");
    c.a_max = nonnegative(need(m, "a_max", "model"), "model.a_max");
    c.state = "neel";
    state();
  } else if (kind == "lattice2d") {
    only_keys(m, "model", {"kind", "side", "j", "a_max", "periodic", "state"});
    c.kind = ModelKind::lattice2d;
    c.side = count(need(m, "side", "model"), "model.side");
    if (c.side == 0) throw ConfigError("model.side", "must be >= 1");
    c.j = number(need(m, "j", "model"), "model.j");
    c.a_max = nonnegative(need(m, "a_max", "model"), "model.a_max");
    if (m.contains("periodic")) c.periodic = boolean(m["periodic"], "model.periodic");
    c.state = "random_pure";
    state();
    if (c.state == "neel") throw ConfigError("model.state", "lattice2d supports random_pure, random_basis or maximally_mixed");
  } else if (kind == "nv_surface") {
    only_keys(m, "model", {"kind", "depth_nm", "density_per_nm2", "t1_us", "extent_nm", "field_axis"});
    c.kind = ModelKind::nv_surface;
    if (m.contains("depth_nm")) c.nv.depth_nm = nonnegative(m["depth_nm"], "model.depth_nm");
    if (m.contains("density_per_nm2")) c.nv.density_per_nm2 = positive(m["density_per_nm2"], "model.density_per_nm2");
    if (m.contains("t1_us")) c.nv.t1_us = positive(m["t1_us"], "model.t1_us");
    if (m.contains("extent_nm")) c.nv.extent_nm = positive(m["extent_nm"], "model.extent_nm");
    if (m.contains("field_axis")) {
      const Vec3 v = vec3(m["field_axis"], "model.field_axis");
      const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      if (std::abs(norm - 1.0) > 1e-9) throw ConfigError("model.field_axis", "must be a unit vector");
      c.nv.field_axis = v;
    }
    c.state = "maximally_mixed";
  } else {
    only_keys(m, "model", {"kind", "spins", "edges", "state"});
    c.kind = ModelKind::explicit_spec;
    const auto& spins = need(m, "spins", "model");
    if (!spins.is_array() || spins.empty()) throw ConfigError("model.spins", "expected a non-empty array");
    for (std::size_t k = 0; k < spins.size(); ++k) {
      const std::string path = "model.spins[" + std::to_string(k) + "]";
      only_keys(spins[k], path, {"a", "position"});
      ExplicitSpin s;
      s.a = number(need(spins[k], "a", path), path + ".a");
      if (spins[k].contains("position")) s.position = vec3(spins[k]["position"], path + ".position");
      c.spins.push_back(s);
    }
    if (m.contains("edges")) {
      const auto& edges = m["edges"];
      if (!edges.is_array()) throw ConfigError("model.edges", "expected an array of [i, j, J]");
      std::set<std::pair<int, int>> seen;
      for (std::size_t k = 0; k < edges.size(); ++k) {
        const std::string path = "model.edges[" + std::to_string(k) + "]";
        const auto& e = edges[k];
        if (!e.is_array() || e.size() != 3) throw ConfigError(path, "expected [i, j, J]");
        ExplicitEdge edge;
        edge.i = static_cast<int>(count(e[0], path + "[0]"));
        edge.j = static_cast<int>(count(e[1], path + "[1]"));
        edge.J = number(e[2], path + "[2]");
        if (edge.i >= static_cast<int>(c.spins.size()) || edge.j >= static_cast<int>(c.spins.size())) {
          throw ConfigError(path, "references a spin that does not exist");
        }
        if (edge.i == edge.j) throw ConfigError(path, "self edge");
        if (!seen.insert(std::minmax(edge.i, edge.j)).second) throw ConfigError(path, "duplicate edge");
        c.edges.push_back(edge);
      }
    }
    c.state = "maximally_mixed";
    state();
  }
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using namespace config_detail;
  ExperimentConfig c;
  only_keys(root, "config", {"model", "dissipation", "pulses", "solver", "output"});
  parse_model(need(root, "model", "config"), c);

  if (root.contains("dissipation")) {
    const auto& d = root["dissipation"];
    only_keys(d, "dissipation", {"gamma", "t1", "exchange"});
    if (d.contains("gamma") && d.contains("t1")) throw ConfigError("dissipation", "give either gamma or t1, not both");
    if (d.contains("gamma")) c.gamma = nonnegative(d["gamma"], "dissipation.gamma");
    if (d.contains("t1")) c.t1 = positive(d["t1"], "dissipation.t1");
    if (d.contains("exchange")) c.exchange = nonnegative(d["exchange"], "dissipation.exchange");
  }

  if (root.contains("pulses")) {
    const auto& p = root["pulses"];
    only_keys(p, "pulses", {"p", "timing"});
    if (p.contains("p")) c.p = static_cast<int>(count(p["p"], "pulses.p"));
    if (p.contains("timing")) {
      c.timing = text(p["timing"], "pulses.timing", {"cpmg", "equidistant"}) == "cpmg" ? PulseTiming::cpmg
                                                                                      : PulseTiming::equidistant;
    }
  }

  const auto& s = need(root, "solver", "config");
  only_keys(s, "solver", {"method", "orders", "neighbor", "guard_epsilon", "time", "seeds", "unitary_reference", "diagnostics"});
  if (s.contains("method")) {
    const auto m = text(s["method"], "solver.method", {"mecce", "exact", "both"});
    c.method = m == "mecce" ? Method::mecce : m == "exact" ? Method::exact : Method::both;
  }
  if (s.contains("orders")) {
    const auto& o = s["orders"];
    if (!o.is_array() || o.empty()) throw ConfigError("solver.orders", "expected a non-empty array of orders");
    c.orders.clear();
    for (std::size_t k = 0; k < o.size(); ++k) {
      const std::string path = "solver.orders[" + std::to_string(k) + "]";
      const auto v = count(o[k], path);
      if (v < 1 || v > kDefaultOrderCap) throw ConfigError(path, "order must be in 1.." + std::to_string(kDefaultOrderCap));
      c.orders.push_back(v);
    }
    std::sort(c.orders.begin(), c.orders.end());
    if (std::adjacent_find(c.orders.begin(), c.orders.end()) != c.orders.end()) throw ConfigError("solver.orders", "duplicate order");
  }
  if (s.contains("neighbor")) {
    const auto& n = s["neighbor"];
    only_keys(n, "solver.neighbor", {"rule", "value"});
    const auto rule = text(need(n, "rule", "solver.neighbor"), "solver.neighbor.rule", {"graph_edges", "distance", "magnitude"});
    if (rule == "graph_edges") {
      if (n.contains("value")) throw ConfigError("solver.neighbor.value", "graph_edges takes no value");
      c.neighbor = NeighborRule::graph_edges();
    } else if (rule == "distance") {
      c.neighbor = NeighborRule::distance(positive(need(n, "value", "solver.neighbor"), "solver.neighbor.value"));
    } else {
      c.neighbor = NeighborRule::magnitude(positive(need(n, "value", "solver.neighbor"), "solver.neighbor.value"));
    }
  }
  if (s.contains("guard_epsilon")) c.guard_epsilon = positive(s["guard_epsilon"], "solver.guard_epsilon");
  {
    const auto& t = need(s, "time", "solver");
    only_keys(t, "solver.time", {"t_max", "points"});
    c.t_max = positive(need(t, "t_max", "solver.time"), "solver.time.t_max");
    c.points = count(need(t, "points", "solver.time"), "solver.time.points");
    if (c.points < 2) throw ConfigError("solver.time.points", "need at least 2 points");
  }
  if (s.contains("seeds")) {
    const auto& sd = s["seeds"];
    if (!sd.is_array() || sd.empty()) throw ConfigError("solver.seeds", "expected a non-empty array");
    c.seeds.clear();
    for (std::size_t k = 0; k < sd.size(); ++k) c.seeds.push_back(count(sd[k], "solver.seeds[" + std::to_string(k) + "]"));
  }
  if (s.contains("unitary_reference")) c.unitary_reference = boolean(s["unitary_reference"], "solver.unitary_reference");
  if (s.contains("diagnostics")) c.diagnostics = boolean(s["diagnostics"], "solver.diagnostics");
  if (c.diagnostics) {
    if (c.method == Method::exact) throw ConfigError("solver.diagnostics", "needs the mecce method");
  }

  if (root.contains("output")) {
    const auto& o = root["output"];
    only_keys(o, "output", {"directory", "formats"});
    if (o.contains("directory")) {
      if (!o["directory"].is_string() || o["directory"].get<std::string>().empty()) {
        throw ConfigError("output.directory", "expected a non-empty string");
      }
      c.out_dir = o["directory"].get<std::string>();
    }
    if (o.contains("formats")) {
      const auto& f = o["formats"];
      if (!f.is_array()) throw ConfigError("output.formats", "expected an array");
      c.formats.clear();
      for (std::size_t k = 0; k < f.size(); ++k) c.formats.push_back(text(f[k], "output.formats[" + std::to_string(k) + "]", {"csv"}));
    }
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Canonical form: every field explicit, keys sorted.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json model;
  model["kind"] = to_string(c.kind);
  switch (c.kind) {
    case ModelKind::chain:
      model["n"] = c.n;
      model["j_max"] = c.j;
      model["a_max"] = c.a_max;
      model["state"] = c.state;
      break;
    case ModelKind::lattice2d:
      model["side"] = c.side;
      model["j"] = c.j;
      model["a_max"] = c.a_max;
      model["periodic"] = c.periodic;
      model["state"] = c.state;
      break;
    case ModelKind::nv_surface:
      model["depth_nm"] = c.nv.depth_nm;
      model["density_per_nm2"] = c.nv.density_per_nm2;
      model["t1_us"] = c.nv.t1_us;
      model["extent_nm"] = c.nv.extent_nm;
      model["field_axis"] = {c.nv.field_axis[0], c.nv.field_axis[1], c.nv.field_axis[2]};
      break;
    case ModelKind::explicit_spec: {
      json spins = json::array();
      for (const auto& s : c.spins) {
        json e{{"a", s.a}};
        if (s.position) e["position"] = {(*s.position)[0], (*s.position)[1], (*s.position)[2]};
        spins.push_back(e);
      }
      json edges = json::array();
      for (const auto& e : c.edges) edges.push_back({e.i, e.j, e.J});
      model["spins"] = spins;
      model["edges"] = edges;
      model["state"] = c.state;
      break;
    }
  }
  json dissipation = json::object();
  if (c.gamma) dissipation["gamma"] = *c.gamma;
  if (c.t1) dissipation["t1"] = *c.t1;
  dissipation["exchange"] = c.exchange;

  const char* rule = c.neighbor.mode == NeighborRule::Mode::graph_edges       ? "graph_edges"
                     : c.neighbor.mode == NeighborRule::Mode::distance_cutoff ? "distance"
                                                                              : "magnitude";
  json neighbor{{"rule", rule}};
  if (c.neighbor.mode != NeighborRule::Mode::graph_edges) neighbor["value"] = c.neighbor.value;

  return json{
      {"model", model},
      {"dissipation", dissipation},
      {"pulses", {{"p", c.p}, {"timing", c.timing == PulseTiming::cpmg ? "cpmg" : "equidistant"}}},
      {"solver",
       {{"method", to_string(c.method)},
        {"orders", c.orders},
        {"neighbor", neighbor},
        {"guard_epsilon", c.guard_epsilon},
        {"time", {{"t_max", c.t_max}, {"points", c.points}}},
        {"seeds", c.seeds},
        {"unitary_reference", c.unitary_reference},
        {"diagnostics", c.diagnostics}}},
      {"output", {{"directory", c.out_dir}, {"formats", c.formats}}},
  };
}

inline std::string canonical_text(const ExperimentConfig& c) { return to_json(c).dump(); }

/// FNV-1a 64 of the canonical text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline BathState make_state(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (name == "neel") return BathState::neel(n);
  if (name == "maximally_mixed") return BathState::maximally_mixed(n);
  return BathState::random_product(n, seed, name == "random_pure");
}

/// Builds the model for one seed (angular units).
inline SystemSpec build_spec(const ExperimentConfig& c, std::uint64_t seed) {
  SystemSpec spec;
  switch (c.kind) {
    case ModelKind::chain:
      spec = build_chain(c.n, kTwoPi * c.j, kTwoPi * c.a_max, seed);
      if (c.state != "neel") spec.initial = make_state(c.state, c.n, seed ^ 0x9e3779b97f4a7c15ULL);
      break;
    case ModelKind::lattice2d:
      spec = build_lattice2d(c.side, kTwoPi * c.j, kTwoPi * c.a_max, seed, c.periodic, c.state != "random_basis");
      if (c.state == "maximally_mixed") spec.initial = BathState::maximally_mixed(c.side * c.side);
      break;
    case ModelKind::nv_surface: {
      NvSurfaceParams p = c.nv;
      p.seed = seed;
      spec = build_nv_surface(p);
      break;
    }
    case ModelKind::explicit_spec:
      for (std::size_t k = 0; k < c.spins.size(); ++k) spec.bath.push_back({static_cast<int>(k), c.spins[k].position, kTwoPi * c.spins[k].a});
      for (const auto& e : c.edges) spec.graph.add(e.i, e.j, kTwoPi * e.J);
      spec.initial = make_state(c.state, c.spins.size(), seed);
      break;
  }
  if (c.gamma) set_uniform_depolarization(spec, *c.gamma);
  if (c.t1) set_uniform_depolarization(spec, 1.0 / (2.0 * *c.t1));
  add_edge_exchange(spec, c.exchange);
  spec.pulses = {c.p, c.timing, c.t_max};
  spec.time_grid = uniform_grid(c.t_max, c.points);
  return spec;
}

}  // namespace mecce
