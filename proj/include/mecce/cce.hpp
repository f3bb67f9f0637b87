#pragma once

// Cluster-correlation expansion of the central-spin coherence:
//
//   L(t) = prod_C Lt_C(t),   Lt_C(t) = L_C(t) / prod_{C' < C} Lt_C'(t)
//
// where L_C is the coherence with only the spins of C present and the
// product over C' runs over enumerated proper subclusters.

#include "mecce/cluster.hpp"
#include "mecce/lindblad.hpp"
#include "mecce/parallel.hpp"
#include "mecce/spin_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecce {

class CceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when one cluster fails to propagate; carries the cluster id.
class ClusterFailure : public CceError {
 public:
  ClusterFailure(std::string cluster_id, const std::string& what)
      : CceError("cluster " + cluster_id + ": " + what), cluster_(std::move(cluster_id)) {}
  const std::string& cluster_id() const { return cluster_; }

 private:
  std::string cluster_;
};

inline constexpr std::size_t kDefaultOrderCap = 8;

// ------------------------------------------------------------ neighbors

struct NeighborRule {
  enum class Mode { graph_edges, distance_cutoff, magnitude_cutoff };
  Mode mode = Mode::graph_edges;
  double value = 0.0;  // cutoff radius, or minimum |J|

  static NeighborRule graph_edges() { return {}; }
  static NeighborRule distance(double r) { return {Mode::distance_cutoff, r}; }
  static NeighborRule magnitude(double j_min) { return {Mode::magnitude_cutoff, j_min}; }
};

inline const char* to_string(NeighborRule::Mode m) {
  switch (m) {
    case NeighborRule::Mode::graph_edges: return "graph-edges";
    case NeighborRule::Mode::distance_cutoff: return "distance-cutoff";
    case NeighborRule::Mode::magnitude_cutoff: return "magnitude-cutoff";
  }
  return "?";
}

using Adjacency = std::vector<std::vector<int>>;

/// Symmetric, sorted adjacency lists of the active neighbor relation.
inline Adjacency neighbor_lists(const SystemSpec& spec, const NeighborRule& rule) {
  const std::size_t n = spec.bath.size();
  std::vector<std::set<int>> adj(n);
  const auto link = [&](int i, int j) {
    adj[static_cast<std::size_t>(i)].insert(j);
    adj[static_cast<std::size_t>(j)].insert(i);
  };
  switch (rule.mode) {
    case NeighborRule::Mode::graph_edges:
      for (const auto& e : spec.graph.edges()) link(e.i, e.j);
      break;
    case NeighborRule::Mode::magnitude_cutoff:
      for (const auto& e : spec.graph.edges()) {
        if (std::abs(e.J) >= rule.value) link(e.i, e.j);
      }
      break;
    case NeighborRule::Mode::distance_cutoff:
      if (!(rule.value > 0.0)) throw CceError("neighbor rule: distance cutoff must be > 0");
      for (std::size_t i = 0; i < n; ++i) {
        if (!spec.bath[i].position) throw CceError("neighbor rule: distance cutoff needs spin positions");
        for (std::size_t j = i + 1; j < n; ++j) {
          const auto& a = *spec.bath[i].position;
          const auto& b = *spec.bath[j].position;
          const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
          if (std::sqrt(dx * dx + dy * dy + dz * dz) <= rule.value) link(static_cast<int>(i), static_cast<int>(j));
        }
      }
      break;
  }
  Adjacency out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

inline bool is_connected(const std::vector<int>& spins, const Adjacency& adj) {
  if (spins.empty()) return false;
  std::vector<int> seen{spins.front()}, stack{spins.front()};
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int nb : adj[static_cast<std::size_t>(s)]) {
      if (std::binary_search(spins.begin(), spins.end(), nb) && std::find(seen.begin(), seen.end(), nb) == seen.end()) {
        seen.push_back(nb);
        stack.push_back(nb);
      }
    }
  }
  return seen.size() == spins.size();
}

// ---------------------------------------------------------- enumeration

/// All connected subsets of size <= max_order, sorted by (size, lex).
inline std::vector<Cluster> enumerate_clusters(const Adjacency& adj, std::size_t max_order,
                                               std::size_t hard_cap = kDefaultOrderCap) {
  if (max_order < 1) throw CceError("enumerate_clusters: max_order must be >= 1");
  if (max_order > hard_cap) {
    throw CceError("enumerate_clusters: max_order " + std::to_string(max_order) + " exceeds the cap of " +
                   std::to_string(hard_cap));
  }
  std::vector<Cluster> out;
  std::set<std::vector<int>> level;
  for (std::size_t i = 0; i < adj.size(); ++i) level.insert({static_cast<int>(i)});
  for (std::size_t size = 1; !level.empty(); ++size) {
    for (const auto& s : level) out.emplace_back(s);
    if (size == max_order) break;
    std::set<std::vector<int>> grown;
    for (const auto& s : level) {
      for (int member : s) {
        for (int nb : adj[static_cast<std::size_t>(member)]) {
          if (std::binary_search(s.begin(), s.end(), nb)) continue;
          std::vector<int> bigger = s;
          bigger.insert(std::upper_bound(bigger.begin(), bigger.end(), nb), nb);
          grown.insert(std::move(bigger));
        }
      }
    }
    level = std::move(grown);
  }
  return out;
}

inline std::vector<Cluster> enumerate_clusters(const SystemSpec& spec, const NeighborRule& rule, std::size_t max_order,
                                               std::size_t hard_cap = kDefaultOrderCap) {
  return enumerate_clusters(neighbor_lists(spec, rule), max_order, hard_cap);
}

// --------------------------------------------------------------- curves

struct CoherenceCurve {
  std::vector<double> t;
  std::vector<Complex> values;
  std::string label;
  std::size_t order = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::size_t cluster_count = 0;
  std::size_t guard_events = 0;

  std::size_t size() const { return values.size(); }
};

inline double max_deviation(const CoherenceCurve& a, const CoherenceCurve& b) {
  if (a.size() != b.size()) throw CceError("max_deviation: curves have different lengths");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
  return worst;
}

/// First time |L| drops below |L(t0)|/e, linearly interpolated; none if it
/// never does.
inline std::optional<double> extract_t2(const CoherenceCurve& curve) {
  if (curve.values.empty() || curve.t.size() != curve.values.size()) throw CceError("extract_t2: empty curve");
  const double level = std::abs(curve.values.front()) / std::numbers::e;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double hi = std::abs(curve.values[k - 1]);
    const double lo = std::abs(curve.values[k]);
    if (lo < level) {
      const double frac = (hi - level) / (hi - lo);
      return curve.t[k - 1] + frac * (curve.t[k] - curve.t[k - 1]);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------- contribution table

enum class Solver { master_equation, unitary };

inline const char* to_string(Solver s) { return s == Solver::master_equation ? "master_equation" : "unitary"; }

struct CceOptions {
  Solver solver = Solver::master_equation;
  std::size_t threads = 0;  // 0 = all cores
  double guard_epsilon = 1e-10;
  std::size_t hard_cap = kDefaultOrderCap;
  NeighborRule rule;
  PropagationOptions propagation;
};

class ContributionTable {
 public:
  struct Entry {
    std::vector<Complex> raw;
    std::vector<Complex> irreducible;
    bool reduced = false;
    bool guarded = false;
  };

  ContributionTable(std::vector<double> grid, Adjacency adj) : grid_(std::move(grid)), adj_(std::move(adj)) {}

  const std::vector<double>& grid() const { return grid_; }
  const Adjacency& adjacency() const { return adj_; }
  const std::map<Cluster, Entry>& entries() const { return entries_; }
  std::size_t max_order() const { return entries_.empty() ? 0 : entries_.rbegin()->first.order(); }

  void insert(const Cluster& c, std::vector<Complex> raw) {
    if (raw.size() != grid_.size()) throw CceError("contribution table: curve length mismatch for " + c.id());
    entries_[c] = Entry{std::move(raw), {}, false, false};
  }

  const Entry& at(const Cluster& c) const {
    auto it = entries_.find(c);
    if (it == entries_.end()) throw CceError("contribution table: missing cluster " + c.id());
    return it->second;
  }

  /// Lt_C for every cluster up to `order`, by increasing size.
  void reduce(std::size_t order, double epsilon) {
    for (auto& [c, e] : entries_) {
      if (c.order() > order) break;
      if (e.reduced) continue;
      const std::size_t k = c.order();
      const std::size_t n = grid_.size();
      std::vector<Complex> denom(n, Complex(1.0, 0.0));
      std::size_t cut = n;
      std::vector<int> sub;
      for (std::uint32_t mask = 1; mask + 1 < (1u << k); ++mask) {
        sub.clear();
        for (std::size_t b = 0; b < k; ++b) {
          if (mask & (1u << (k - 1 - b))) sub.push_back(c[b]);
        }
        auto it = entries_.find(Cluster(sub));
        if (it == entries_.end()) {
          if (is_connected(sub, adj_)) throw CceError("internal: subcluster of " + c.id() + " missing from table");
          continue;
        }
        const auto& lower = it->second;
        if (!lower.reduced) throw CceError("internal: subcluster of " + c.id() + " reduced out of order");
        for (std::size_t i = 0; i < cut; ++i) {
          if (std::abs(lower.irreducible[i]) < epsilon) {
            cut = i;
            break;
          }
          denom[i] *= lower.irreducible[i];
        }
      }
      e.irreducible.assign(n, Complex(1.0, 0.0));
      for (std::size_t i = 0; i < cut; ++i) e.irreducible[i] = e.raw[i] / denom[i];
      e.guarded = cut < n;
      e.reduced = true;
    }
  }

 private:
  std::vector<double> grid_;
  Adjacency adj_;
  std::map<Cluster, Entry> entries_;
};

/// Pointwise product of irreducible contributions of clusters up to `order`,
/// taken in canonical cluster order.
inline CoherenceCurve assemble(ContributionTable& table, std::size_t order, double epsilon = 1e-10) {
  table.reduce(order, epsilon);
  CoherenceCurve out;
  out.t = table.grid();
  out.values.assign(out.t.size(), Complex(1.0, 0.0));
  out.order = order;
  for (const auto& [c, e] : table.entries()) {
    if (c.order() > order) break;
    ++out.cluster_count;
    if (e.guarded) ++out.guard_events;
    for (std::size_t i = 0; i < out.t.size(); ++i) out.values[i] *= e.irreducible[i];
  }
  return out;
}

/// Propagates every enumerated cluster in parallel and fills the table.
inline ContributionTable evaluate_clusters(const SystemSpec& spec, const PulseSchedule& schedule,
                                           std::span<const double> grid, std::size_t max_order,
                                           const CceOptions& options) {
  const Adjacency adj = neighbor_lists(spec, options.rule);
  const auto clusters = enumerate_clusters(adj, max_order, options.hard_cap);
  std::vector<std::vector<Complex>> curves(clusters.size());
  parallel_for(clusters.size(), options.threads, [&](std::size_t i) {
    try {
      curves[i] = options.solver == Solver::master_equation
                      ? propagate_curve(spec, clusters[i], schedule, grid, options.propagation)
                      : unitary_curve(spec, clusters[i], schedule, grid);
    } catch (const std::exception& e) {
      throw ClusterFailure(clusters[i].id(), e.what());
    }
  });
  ContributionTable table(std::vector<double>(grid.begin(), grid.end()), adj);
  for (std::size_t i = 0; i < clusters.size(); ++i) table.insert(clusters[i], std::move(curves[i]));
  return table;
}

inline std::span<const double> grid_of(const SystemSpec& spec) {
  if (spec.time_grid.empty()) throw CceError("run_mecce: time grid is empty");
  return spec.time_grid;
}

/// One curve per requested order, all assembled from a single table at the
/// highest order (irreducible contributions do not depend on the order).
inline std::vector<CoherenceCurve> run_mecce_orders(const SystemSpec& spec, const std::vector<std::size_t>& orders,
                                                    const PulseSchedule& schedule, const CceOptions& options = {}) {
  if (orders.empty()) throw CceError("run_mecce: no orders requested");
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t top = *std::max_element(orders.begin(), orders.end());
  auto table = evaluate_clusters(spec, schedule, grid_of(spec), top, options);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::vector<CoherenceCurve> out;
  for (std::size_t k : orders) {
    auto curve = assemble(table, k, options.guard_epsilon);
    curve.seed = spec.initial.seed;
    curve.wall_seconds = wall;
    curve.label = std::string(options.solver == Solver::master_equation ? "mecce" : "cce") + std::to_string(k);
    out.push_back(std::move(curve));
  }
  return out;
}

inline CoherenceCurve run_mecce(const SystemSpec& spec, std::size_t max_order, const PulseSchedule& schedule,
                                const CceOptions& options = {}) {
  return run_mecce_orders(spec, {max_order}, schedule, options).front();
}

// ----------------------------------------------------------- diagnostics

struct FactorizationDiagnostic {
  CoherenceCurve full;         // ME-CCE at `order`
  CoherenceCurve incoherent;   // ME-CCE at order 1
  CoherenceCurve coherent;     // CCE at `order`, all rates zeroed
  CoherenceCurve delta;        // full - incoherent * coherent
};

/// Delta L = L_MECCE(order) - L_MECCE1 * L_CCE(order). For free evolution
/// the coherent singleton phases appear in both factors of the product.
inline FactorizationDiagnostic factorization_diagnostic(const SystemSpec& spec, const PulseSchedule& schedule,
                                                        const CceOptions& options = {}, std::size_t order = 4) {
  FactorizationDiagnostic d;
  const auto me = run_mecce_orders(spec, {1, order}, schedule, options);
  d.incoherent = me[0];
  d.full = me[1];
  d.coherent = run_mecce(without_dissipation(spec), order, schedule, options);
  d.coherent.label = "cce" + std::to_string(order);
  d.delta = d.full;
  d.delta.label = "delta";
  for (std::size_t i = 0; i < d.delta.size(); ++i) {
    d.delta.values[i] = d.full.values[i] - d.incoherent.values[i] * d.coherent.values[i];
  }
  return d;
}

struct ConvergenceReport {
  std::vector<CoherenceCurve> curves;
  std::vector<double> consecutive_deviation;  // between orders k and k+1 in the list
  double hamiltonian_norm = 0.0;              // max over clusters and branches of ||H||_F
  double dissipator_norm = 0.0;               // max over jumps of rate * ||L^dag L||_F
  double hamiltonian_criterion = 0.0;         // norm * t_final
  double dissipator_criterion = 0.0;
  /// Beyond this time either criterion exceeds 1.
  double guaranteed_until = 0.0;
  bool beyond_guaranteed = false;
};

inline double frobenius(const SparseComplexMatrix& m) {
  double s = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseComplexMatrix::InnerIterator it(m, k); it; ++it) s += std::norm(it.value());
  }
  return std::sqrt(s);
}

inline ConvergenceReport convergence_report(const SystemSpec& spec, const std::vector<std::size_t>& orders,
                                            const PulseSchedule& schedule, const CceOptions& options = {}) {
  if (orders.empty()) throw CceError("convergence_report: no orders requested");
  for (std::size_t k = 1; k < orders.size(); ++k) {
    if (orders[k] < orders[k - 1]) throw CceError("convergence_report: orders must be ascending");
  }
  ConvergenceReport r;
  r.curves = run_mecce_orders(spec, orders, schedule, options);
  for (std::size_t k = 1; k < r.curves.size(); ++k) r.consecutive_deviation.push_back(max_deviation(r.curves[k - 1], r.curves[k]));

  for (const auto& c : enumerate_clusters(spec, options.rule, orders.back(), options.hard_cap)) {
    const auto ops = sparse_operators(spec, c);
    r.hamiltonian_norm = std::max({r.hamiltonian_norm, frobenius(ops.h0), frobenius(ops.h1)});
    for (const auto& [l, rate] : ops.jumps) {
      const SparseComplexMatrix k = SparseComplexMatrix(l.adjoint()) * l;
      r.dissipator_norm = std::max(r.dissipator_norm, rate * frobenius(k));
    }
  }
  const double t_final = spec.time_grid.empty() ? 0.0 : spec.time_grid.back();
  r.hamiltonian_criterion = r.hamiltonian_norm * t_final;
  r.dissipator_criterion = r.dissipator_norm * t_final;
  const double worst = std::max(r.hamiltonian_norm, r.dissipator_norm);
  r.guaranteed_until = worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
  r.beyond_guaranteed = std::max(r.hamiltonian_criterion, r.dissipator_criterion) > 1.0;
  return r;
}

}  // namespace mecce
