#pragma once

// Runs an ExperimentConfig and writes CSV curves, a summary table and a
// manifest. Requires nlohmann/json on the include path.

#include "mecce/cce.hpp"
#include "mecce/config.hpp"
#include "mecce/exact.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecce {

/// A solver stage failed; exit status 1.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(std::string stage, std::uint64_t seed, const std::string& what)
      : std::runtime_error("stage " + stage + ", seed " + std::to_string(seed) + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t bath_size = 0;
  std::vector<CoherenceCurve> curves;       // exact first when present, then mecce{k}, cce{k}
  std::optional<FactorizationDiagnostic> diagnostic;
  std::map<std::string, double> timings;    // stage -> seconds
  std::vector<std::string> files;

  const CoherenceCurve* find(const std::string& label) const {
    for (const auto& c : curves)
      if (c.label == label) return &c;
    return nullptr;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_t2(const std::optional<double>& t2) { return t2 ? format_double(*t2) : "none"; }

inline RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed, std::size_t threads) {
  RunRecord rec;
  rec.config_hash = config_hash(config);
  rec.seed = seed;
  SystemSpec spec;
  try {
    spec = build_spec(config, seed);
    spec.validate();
  } catch (const SpecError& e) {
    throw ConfigError("model", e.what());
  }
  rec.bath_size = spec.size();
  const PulseSchedule schedule{config.p, config.timing, 0.0};
  CceOptions options;
  options.threads = threads;
  options.guard_epsilon = config.guard_epsilon;
  options.rule = config.neighbor;

  const auto timed = [&](const std::string& stage, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const ClusterFailure& e) {
      throw SolverFailure(stage, seed, e.what());
    } catch (const std::exception& e) {
      throw SolverFailure(stage, seed, e.what());
    }
    rec.timings[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  if (config.method != Method::mecce) {
    timed("exact", [&] { rec.curves.push_back(exact_coherence(spec, schedule, spec.time_grid)); });
  }
  if (config.method != Method::exact) {
    timed("mecce", [&] {
      for (auto& c : run_mecce_orders(spec, config.orders, schedule, options)) rec.curves.push_back(std::move(c));
    });
    if (config.unitary_reference) {
      auto unitary = options;
      unitary.solver = Solver::unitary;
      timed("cce", [&] {
        for (auto& c : run_mecce_orders(spec, config.orders, schedule, unitary)) rec.curves.push_back(std::move(c));
      });
    }
    if (config.diagnostics) {
      timed("diagnostics", [&] { rec.diagnostic = factorization_diagnostic(spec, schedule, options, config.orders.back()); });
    }
  }
  for (auto& c : rec.curves) c.seed = seed;
  return rec;
}

namespace experiment_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string curve_csv(const CoherenceCurve& c) {
  std::string s = "t,re,im,abs\n";
  for (std::size_t k = 0; k < c.size(); ++k) {
    s += format_double(c.t[k]) + "," + format_double(c.values[k].real()) + "," + format_double(c.values[k].imag()) + "," +
         format_double(std::abs(c.values[k])) + "\n";
  }
  return s;
}

}  // namespace experiment_detail

/// Writes one CSV per curve plus deviation and diagnostic tables; returns the
/// file names relative to `dir`.
inline std::vector<std::string> write_run(const RunRecord& rec, const std::filesystem::path& dir) {
  using experiment_detail::write_text;
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const std::string suffix = "_seed" + std::to_string(rec.seed) + ".csv";
  for (const auto& c : rec.curves) {
    const std::string name = c.label + suffix;
    write_text(dir / name, experiment_detail::curve_csv(c));
    files.push_back(name);
  }
  if (const auto* exact = rec.find("exact")) {
    std::vector<const CoherenceCurve*> others;
    for (const auto& c : rec.curves)
      if (c.label.rfind("mecce", 0) == 0 || c.label.rfind("cce", 0) == 0) others.push_back(&c);
    if (!others.empty()) {
      std::string s = "t";
      for (const auto* c : others) s += ",dev_" + c->label;
      s += "\n";
      for (std::size_t k = 0; k < exact->size(); ++k) {
        s += format_double(exact->t[k]);
        for (const auto* c : others) s += "," + format_double(std::abs(c->values[k] - exact->values[k]));
        s += "\n";
      }
      const std::string name = "deviation" + suffix;
      write_text(dir / name, s);
      files.push_back(name);
    }
  }
  if (rec.diagnostic) {
    const auto& d = *rec.diagnostic;
    std::string s = "t,re_full,im_full,re_incoherent,im_incoherent,re_coherent,im_coherent,re_delta,im_delta\n";
    for (std::size_t k = 0; k < d.full.size(); ++k) {
      s += format_double(d.full.t[k]);
      for (const auto* c : {&d.full, &d.incoherent, &d.coherent, &d.delta}) {
        s += "," + format_double(c->values[k].real()) + "," + format_double(c->values[k].imag());
      }
      s += "\n";
    }
    const std::string name = "factorization" + suffix;
    write_text(dir / name, s);
    files.push_back(name);
  }
  return files;
}

struct SummaryRow {
  std::string group;  // sweep value, empty for plain runs
  std::uint64_t seed = 0;
  std::string label;
  std::size_t order = 0;
  std::size_t bath_size = 0;
  std::optional<double> t2;
  std::size_t clusters = 0;
  std::size_t guard_events = 0;
};

inline std::vector<SummaryRow> summarize(const RunRecord& rec, const std::string& group = {}) {
  std::vector<SummaryRow> rows;
  for (const auto& c : rec.curves) {
    rows.push_back({group, rec.seed, c.label, c.order, rec.bath_size, extract_t2(c), c.cluster_count, c.guard_events});
  }
  return rows;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows, const std::string& group_name = {}) {
  std::string s = (group_name.empty() ? "" : group_name + ",") + "seed,label,order,bath_size,t2,clusters,guard_events\n";
  for (const auto& r : rows) {
    s += (group_name.empty() ? "" : r.group + ",") + std::to_string(r.seed) + "," + r.label + "," + std::to_string(r.order) + "," +
         std::to_string(r.bath_size) + "," + format_t2(r.t2) + "," + std::to_string(r.clusters) + "," +
         std::to_string(r.guard_events) + "\n";
  }
  return s;
}

inline nlohmann::json manifest(const ExperimentConfig& config, const std::vector<RunRecord>& records, std::size_t threads,
                               const std::string& command) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : records) runs.push_back({{"seed", r.seed}, {"bath_size", r.bath_size}, {"files", r.files}, {"timings_s", r.timings}});
  return {
      {"command", command},
      {"config_hash", config_hash(config)},
      {"config", to_json(config)},
      {"versions",
       {{"mecce", MECCE_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"threads", threads},
      {"runs", runs},
  };
}

using RunLog = std::function<void(const std::string&)>;

/// `run`: every seed of the config into `dir`.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir, std::size_t threads,
                                             const RunLog& log = {}) {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> rows;
  for (std::uint64_t seed : config.seeds) {
    auto rec = run_seed(config, seed, threads);
    rec.files = write_run(rec, dir);
    for (auto& row : summarize(rec)) rows.push_back(row);
    if (log) log("seed " + std::to_string(seed) + ": " + std::to_string(rec.curves.size()) + " curves, " + std::to_string(rec.bath_size) + " spins");
    records.push_back(std::move(rec));
  }
  experiment_detail::write_text(dir / "summary.csv", summary_csv(rows));
  experiment_detail::write_text(dir / "manifest.json", manifest(config, records, threads, "run").dump(2) + "\n");
  return records;
}

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"gamma", "depth", "p", "order"};
  return names;
}

inline ExperimentConfig with_parameter(ExperimentConfig c, const std::string& name, double value) {
  if (name == "gamma") {
    if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("--values", "gamma must be >= 0");
    c.gamma = value;
    c.t1.reset();
  } else if (name == "depth") {
    if (c.kind != ModelKind::nv_surface) throw ConfigError("--param", "depth needs model.kind = nv_surface");
    if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("--values", "depth must be >= 0");
    c.nv.depth_nm = value;
  } else if (name == "p") {
    if (value < 0 || value != std::floor(value)) throw ConfigError("--values", "p must be a non-negative integer");
    c.p = static_cast<int>(value);
  } else if (name == "order") {
    if (value < 1 || value > kDefaultOrderCap || value != std::floor(value)) {
      throw ConfigError("--values", "order must be an integer in 1.." + std::to_string(kDefaultOrderCap));
    }
    if (c.method == Method::exact) throw ConfigError("--param", "order sweep needs the mecce method");
    c.orders = {static_cast<std::size_t>(value)};
  } else {
    throw ConfigError("--param", "unknown parameter '" + name + "' (gamma, depth, p, order)");
  }
  return c;
}

/// `sweep`: one run per value, each in its own subdirectory, plus an
/// aggregate sweep.csv of (value, T2).
inline void run_sweep(const ExperimentConfig& config, const std::string& name, const std::vector<double>& values,
                      const std::filesystem::path& dir, std::size_t threads, const RunLog& log = {}) {
  if (values.empty()) throw ConfigError("--values", "need at least one value");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(with_parameter(config, name, v));
  std::vector<SummaryRow> rows;
  std::vector<RunRecord> all;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string group = format_double(values[i]);
    char sub[64];
    std::snprintf(sub, sizeof sub, "%s_%g", name.c_str(), values[i]);
    for (std::uint64_t seed : configs[i].seeds) {
      auto rec = run_seed(configs[i], seed, threads);
      for (auto& f : write_run(rec, dir / sub)) rec.files.push_back(std::string(sub) + "/" + f);
      for (auto& row : summarize(rec, group)) rows.push_back(row);
      if (log) log(name + " = " + group + ", seed " + std::to_string(seed) + " done");
      all.push_back(std::move(rec));
    }
  }
  experiment_detail::write_text(dir / "sweep.csv", summary_csv(rows, name));
  auto m = manifest(config, all, threads, "sweep");
  m["sweep"] = {{"parameter", name}, {"values", values}};
  experiment_detail::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace mecce
