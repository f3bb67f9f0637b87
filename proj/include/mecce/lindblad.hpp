#pragma once

// Projected master equation for the off-diagonal block rho_01 of a central
// spin coupled to a bath cluster:
//
//   d rho_01 / dt = -i H0 rho_01 + i rho_01 H1 + sum_i g_i D[L_i](rho_01)
//
// with branch Hamiltonians
//
//   H^(0/1) = sum_i (+/-) a_i/2 Iz^i + sum_<ij> J_ij/2 (I+^i I-^j + I-^i I+^j - 4 Iz^i Iz^j).
//
// A pi-pulse on the central spin swaps the roles of H0 and H1.
//
// Basis convention: cluster spin k is the k-th Kronecker factor (most
// significant bit of the state index), bit value 0 is spin up (Iz = +1/2).

#include "mecce/cluster.hpp"
#include "mecce/operator_algebra.hpp"
#include "mecce/spin_model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mecce {

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- operators

namespace spin_half {

inline ComplexMatrix iz() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 0.5;
  m(1, 1) = -0.5;
  return m;
}
inline ComplexMatrix iplus() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}
inline ComplexMatrix iminus() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

}  // namespace spin_half

/// op acting on site `site` of a k-spin register, identity elsewhere.
inline ComplexMatrix embed(const ComplexMatrix& op, std::size_t site, std::size_t k) {
  const auto left = Eigen::Index{1} << site;
  const auto right = Eigen::Index{1} << (k - site - 1);
  return kron(kron(ComplexMatrix::Identity(left, left), op), ComplexMatrix::Identity(right, right));
}

struct BranchHamiltonians {
  ComplexMatrix h0;
  ComplexMatrix h1;
};

/// Jump channel expressed in cluster-local site indices.
struct LocalJump {
  JumpKind kind;
  std::vector<int> sites;
  double rate;
};

/// Jumps whose targets all lie inside the cluster; zero-rate channels dropped.
inline std::vector<LocalJump> cluster_jumps(const SystemSpec& spec, const Cluster& cluster) {
  std::vector<LocalJump> out;
  for (const auto& j : spec.jumps) {
    if (j.rate == 0.0) continue;
    LocalJump local{j.kind, {}, j.rate};
    bool inside = true;
    for (int t : j.targets) {
      const int li = cluster.local_index(t);
      if (li < 0) {
        inside = false;
        break;
      }
      local.sites.push_back(li);
    }
    if (inside) out.push_back(std::move(local));
  }
  return out;
}

struct LocalEdge {
  int u;
  int v;
  double J;
};

inline std::vector<LocalEdge> cluster_edges(const SystemSpec& spec, const Cluster& cluster) {
  std::vector<LocalEdge> out;
  for (const auto& e : spec.graph.edges()) {
    const int u = cluster.local_index(e.i);
    const int v = cluster.local_index(e.j);
    if (u >= 0 && v >= 0) out.push_back({u, v, e.J});
  }
  return out;
}

inline ComplexMatrix jump_operator(const LocalJump& j, std::size_t k) {
  using namespace spin_half;
  switch (j.kind) {
    case JumpKind::raise: return embed(iplus(), j.sites[0], k);
    case JumpKind::lower: return embed(iminus(), j.sites[0], k);
    case JumpKind::exchange_up: return embed(iminus(), j.sites[0], k) * embed(iplus(), j.sites[1], k);
    case JumpKind::exchange_down: return embed(iplus(), j.sites[0], k) * embed(iminus(), j.sites[1], k);
  }
  throw PropagationError("unknown jump kind");
}

/// Dense branch Hamiltonians built from Kronecker embeddings.
inline BranchHamiltonians project_hamiltonians(const SystemSpec& spec, const Cluster& cluster) {
  if (cluster.order() == 0) throw PropagationError("project_hamiltonians: empty cluster");
  using namespace spin_half;
  const std::size_t k = cluster.order();
  const Eigen::Index d = Eigen::Index{1} << k;
  ComplexMatrix zeeman = ComplexMatrix::Zero(d, d);
  ComplexMatrix coupling = ComplexMatrix::Zero(d, d);
  for (std::size_t s = 0; s < k; ++s) {
    zeeman += 0.5 * spec.bath.at(static_cast<std::size_t>(cluster[s])).a * embed(iz(), s, k);
  }
  for (const auto& e : cluster_edges(spec, cluster)) {
    const ComplexMatrix pu = embed(iplus(), e.u, k), mu = embed(iminus(), e.u, k), zu = embed(iz(), e.u, k);
    const ComplexMatrix pv = embed(iplus(), e.v, k), mv = embed(iminus(), e.v, k), zv = embed(iz(), e.v, k);
    coupling += 0.5 * e.J * (pu * mv + mu * pv - 4.0 * zu * zv);
  }
  return {coupling + zeeman, coupling - zeeman};
}

/// Full superoperators on vec(rho_01) (dimension 4^k): g01 before any
/// pulse, g10 with the branch Hamiltonians swapped.
struct ProjectedGenerator {
  ComplexMatrix g01;
  ComplexMatrix g10;
};

struct WeightedOperator {
  ComplexMatrix op;
  double rate;
};

inline ComplexMatrix projected_superoperator(const ComplexMatrix& left, const ComplexMatrix& right,
                                             const std::vector<WeightedOperator>& jumps) {
  const Eigen::Index d = left.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  ComplexMatrix g = -kI * kron(id, left) + kI * kron(right.transpose(), id);
  for (const auto& j : jumps) {
    const ComplexMatrix k = j.op.adjoint() * j.op;
    g += j.rate * (kron(j.op.conjugate(), j.op) - 0.5 * kron(id, k) - 0.5 * kron(k.transpose(), id));
  }
  return g;
}

inline ProjectedGenerator build_generator(const BranchHamiltonians& h, const std::vector<WeightedOperator>& jumps) {
  if (h.h0.rows() != h.h1.rows() || h.h0.rows() != h.h0.cols()) {
    throw PropagationError("build_generator: inconsistent branch dimensions");
  }
  for (const auto& j : jumps) {
    if (j.op.rows() != h.h0.rows() || j.op.cols() != h.h0.cols()) {
      throw PropagationError("build_generator: jump operator dimension mismatch");
    }
  }
  return {projected_superoperator(h.h0, h.h1, jumps), projected_superoperator(h.h1, h.h0, jumps)};
}

inline std::vector<WeightedOperator> dense_jumps(const SystemSpec& spec, const Cluster& cluster) {
  std::vector<WeightedOperator> out;
  for (const auto& j : cluster_jumps(spec, cluster)) out.push_back({jump_operator(j, cluster.order()), j.rate});
  return out;
}

/// Product of the per-spin density matrices restricted to the cluster.
inline ComplexMatrix cluster_density(const SystemSpec& spec, const Cluster& cluster) {
  ComplexMatrix rho = ComplexMatrix::Identity(1, 1);
  for (int s : cluster.spins()) rho = kron(rho, ComplexMatrix(spec.initial.spins.at(static_cast<std::size_t>(s))));
  return rho;
}

// ----------------------------------------------------------- segment plans

enum class Branch { b01 = 0, b10 = 1 };

struct Segment {
  double duration;
  Branch branch;
};

using SegmentPlan = std::vector<Segment>;

/// Free-evolution segments between pi-pulses; the branch order starts at 01
/// and alternates at every pulse.
inline SegmentPlan segment_plan(const PulseSchedule& schedule) {
  if (!(schedule.total_time >= 0.0)) throw PropagationError("segment_plan: negative total time");
  SegmentPlan plan;
  double last = 0.0;
  Branch branch = Branch::b01;
  for (double tp : pulse_times(schedule)) {
    plan.push_back({tp - last, branch});
    last = tp;
    branch = branch == Branch::b01 ? Branch::b10 : Branch::b01;
  }
  plan.push_back({schedule.total_time - last, branch});
  return plan;
}

// ----------------------------------------------- magnetization sectors

/// The dynamics conserve m(row) - m(col) of rho_01 (H0, H1 conserve total
/// Iz and every jump shifts it by a fixed amount), and the trace only sees
/// the m(row) == m(col) sector, so propagation is restricted to it.
/// Sector element (r, c) lives at offset[m] + pos[r] + size[m] * pos[c].
class MagnetizationSectors {
 public:
  explicit MagnetizationSectors(std::size_t k) : k_(k), d_(std::size_t{1} << k) {
    blocks_.resize(k + 1);
    pos_.resize(d_);
    up_.resize(d_);
    for (std::size_t s = 0; s < d_; ++s) {
      const auto up = static_cast<int>(k - static_cast<std::size_t>(std::popcount(s)));
      up_[s] = up;
      pos_[s] = static_cast<int>(blocks_[static_cast<std::size_t>(up)].size());
      blocks_[static_cast<std::size_t>(up)].push_back(static_cast<int>(s));
    }
    offset_.resize(k + 2, 0);
    for (std::size_t m = 0; m <= k; ++m) offset_[m + 1] = offset_[m] + blocks_[m].size() * blocks_[m].size();
  }

  std::size_t qubits() const { return k_; }
  std::size_t dim() const { return d_; }
  std::size_t size() const { return offset_.back(); }
  int up_count(std::size_t state) const { return up_[state]; }

  std::ptrdiff_t index(std::size_t r, std::size_t c) const {
    if (up_[r] != up_[c]) return -1;
    const auto m = static_cast<std::size_t>(up_[r]);
    return static_cast<std::ptrdiff_t>(offset_[m] + static_cast<std::size_t>(pos_[r]) +
                                       blocks_[m].size() * static_cast<std::size_t>(pos_[c]));
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t m = 0; m <= k_; ++m) {
      const auto& b = blocks_[m];
      for (std::size_t pc = 0; pc < b.size(); ++pc) {
        for (std::size_t pr = 0; pr < b.size(); ++pr) {
          fn(offset_[m] + pr + b.size() * pc, static_cast<std::size_t>(b[pr]), static_cast<std::size_t>(b[pc]));
        }
      }
    }
  }

 private:
  std::size_t k_;
  std::size_t d_;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> pos_;
  std::vector<int> up_;
  std::vector<std::size_t> offset_;
};

/// Sparse cluster operators assembled directly from bit patterns.
struct SparseClusterOperators {
  std::size_t k = 0;
  SparseComplexMatrix h0;
  SparseComplexMatrix h1;
  std::vector<std::pair<SparseComplexMatrix, double>> jumps;
};

inline SparseClusterOperators sparse_operators(const SystemSpec& spec, const Cluster& cluster) {
  const std::size_t k = cluster.order();
  if (k == 0) throw PropagationError("sparse_operators: empty cluster");
  if (k > 20) throw PropagationError("sparse_operators: cluster too large");
  const std::size_t d = std::size_t{1} << k;
  const auto mask = [k](int site) { return std::size_t{1} << (k - 1 - static_cast<std::size_t>(site)); };
  const auto sz = [&](std::size_t s, int site) { return (s & mask(site)) ? -0.5 : 0.5; };

  std::vector<double> a(k);
  for (std::size_t i = 0; i < k; ++i) a[i] = spec.bath.at(static_cast<std::size_t>(cluster[i])).a;
  const auto edges = cluster_edges(spec, cluster);

  std::vector<Eigen::Triplet<Complex>> t0, t1;
  t0.reserve(d * (1 + edges.size()));
  t1.reserve(d * (1 + edges.size()));
  for (std::size_t s = 0; s < d; ++s) {
    double zeeman = 0.0;
    for (std::size_t i = 0; i < k; ++i) zeeman += 0.5 * a[i] * sz(s, static_cast<int>(i));
    double ising = 0.0;
    for (const auto& e : edges) {
      ising += -2.0 * e.J * sz(s, e.u) * sz(s, e.v);
      if (sz(s, e.u) != sz(s, e.v)) {
        const std::size_t flipped = s ^ mask(e.u) ^ mask(e.v);
        t0.emplace_back(static_cast<int>(flipped), static_cast<int>(s), 0.5 * e.J);
        t1.emplace_back(static_cast<int>(flipped), static_cast<int>(s), 0.5 * e.J);
      }
    }
    t0.emplace_back(static_cast<int>(s), static_cast<int>(s), ising + zeeman);
    t1.emplace_back(static_cast<int>(s), static_cast<int>(s), ising - zeeman);
  }
  SparseClusterOperators ops;
  ops.k = k;
  ops.h0.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  ops.h1.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  ops.h0.setFromTriplets(t0.begin(), t0.end());
  ops.h1.setFromTriplets(t1.begin(), t1.end());

  for (const auto& j : cluster_jumps(spec, cluster)) {
    std::vector<Eigen::Triplet<Complex>> tl;
    for (std::size_t s = 0; s < d; ++s) {
      const bool up0 = !(s & mask(j.sites[0]));
      switch (j.kind) {
        case JumpKind::raise:
          if (!up0) tl.emplace_back(static_cast<int>(s ^ mask(j.sites[0])), static_cast<int>(s), 1.0);
          break;
        case JumpKind::lower:
          if (up0) tl.emplace_back(static_cast<int>(s ^ mask(j.sites[0])), static_cast<int>(s), 1.0);
          break;
        case JumpKind::exchange_up:
        case JumpKind::exchange_down: {
          const bool up1 = !(s & mask(j.sites[1]));
          const bool fires = j.kind == JumpKind::exchange_up ? (up0 && !up1) : (!up0 && up1);
          if (fires) tl.emplace_back(static_cast<int>(s ^ mask(j.sites[0]) ^ mask(j.sites[1])), static_cast<int>(s), 1.0);
          break;
        }
      }
    }
    SparseComplexMatrix l(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    l.setFromTriplets(tl.begin(), tl.end());
    ops.jumps.emplace_back(std::move(l), j.rate);
  }
  return ops;
}

/// Projected generator restricted to the m(row) == m(col) sector, as a
/// sparse matrix acting on sector vectors.
inline SparseComplexMatrix sector_generator(const MagnetizationSectors& sectors, const SparseComplexMatrix& left,
                                            const SparseComplexMatrix& right,
                                            const std::vector<std::pair<SparseComplexMatrix, double>>& jumps) {
  const auto d = static_cast<Eigen::Index>(sectors.dim());
  SparseComplexMatrix damping(d, d);
  for (const auto& [l, rate] : jumps) damping += (rate * SparseComplexMatrix(l.adjoint() * l)).pruned();
  const SparseComplexMatrix a = left - 0.5 * kI * damping;
  const SparseComplexMatrix bt = SparseComplexMatrix((right + 0.5 * kI * damping).transpose());

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(sectors.size() * static_cast<std::size_t>(4 + 2 * jumps.size()));
  const auto target = [&](std::size_t r, std::size_t c) {
    const auto idx = sectors.index(r, c);
    if (idx < 0) throw PropagationError("sector_generator: operator does not conserve magnetization");
    return static_cast<int>(idx);
  };
  sectors.for_each([&](std::size_t src, std::size_t r, std::size_t c) {
    const int col = static_cast<int>(src);
    for (SparseComplexMatrix::InnerIterator it(a, static_cast<Eigen::Index>(r)); it; ++it) {
      trip.emplace_back(target(static_cast<std::size_t>(it.row()), c), col, -kI * it.value());
    }
    for (SparseComplexMatrix::InnerIterator it(bt, static_cast<Eigen::Index>(c)); it; ++it) {
      trip.emplace_back(target(r, static_cast<std::size_t>(it.row())), col, kI * it.value());
    }
    for (const auto& [l, rate] : jumps) {
      for (SparseComplexMatrix::InnerIterator ir(l, static_cast<Eigen::Index>(r)); ir; ++ir) {
        for (SparseComplexMatrix::InnerIterator ic(l, static_cast<Eigen::Index>(c)); ic; ++ic) {
          trip.emplace_back(target(static_cast<std::size_t>(ir.row()), static_cast<std::size_t>(ic.row())), col,
                            rate * ir.value() * std::conj(ic.value()));
        }
      }
    }
  });
  const auto n = static_cast<Eigen::Index>(sectors.size());
  SparseComplexMatrix g(n, n);
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

// ------------------------------------------------------------ propagation

struct PropagationOptions {
  /// Sector dimensions up to this size use dense expm with cached
  /// exponentials; larger ones use the sparse Taylor action.
  std::size_t dense_sector_limit = 128;
  double action_tolerance = 0x1p-53;
};

namespace detail {

/// If the grid is (numerically) t_k = t_0 + k h, returns h so that every
/// step can reuse one cached exponential.
inline std::optional<double> uniform_step(std::span<const double> grid) {
  if (grid.size() < 2) return std::nullopt;
  const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  const double tol = 1e-12 * std::max(1.0, std::abs(grid.back()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(grid[k] - (grid.front() + static_cast<double>(k) * h)) > tol) return std::nullopt;
  }
  return h;
}

}  // namespace detail

/// Coherence of the central spin coupled to one cluster, for any pulse
/// schedule and time grid. Each grid point is an independent experiment of
/// that total duration.
class ClusterEvolution {
 public:
  ClusterEvolution(const SystemSpec& spec, const Cluster& cluster, PropagationOptions options = {})
      : options_(options), sectors_(cluster.order()) {
    if (cluster.order() == 0) throw PropagationError("propagate: empty cluster");
    for (int s : cluster.spins()) {
      if (s < 0 || static_cast<std::size_t>(s) >= spec.bath.size()) {
        throw PropagationError("propagate: cluster " + cluster.id() + " references a missing spin");
      }
    }
    const auto ops = sparse_operators(spec, cluster);
    gen_[0] = sector_generator(sectors_, ops.h0, ops.h1, ops.jumps);
    gen_[1] = sector_generator(sectors_, ops.h1, ops.h0, ops.jumps);

    const auto n = static_cast<Eigen::Index>(sectors_.size());
    rho0_ = ComplexVector::Zero(n);
    trace_ = ComplexVector::Zero(n);
    const std::size_t k = cluster.order();
    std::vector<const SpinDensity*> local(k);
    for (std::size_t i = 0; i < k; ++i) local[i] = &spec.initial.spins.at(static_cast<std::size_t>(cluster[i]));
    sectors_.for_each([&](std::size_t idx, std::size_t r, std::size_t c) {
      Complex value = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t shift = k - 1 - i;
        value *= (*local[i])(static_cast<Eigen::Index>((r >> shift) & 1u), static_cast<Eigen::Index>((c >> shift) & 1u));
      }
      rho0_(static_cast<Eigen::Index>(idx)) = value;
      if (r == c) trace_(static_cast<Eigen::Index>(idx)) = 1.0;
    });
    trace0_ = trace_.transpose() * rho0_;
    if (std::abs(trace0_) < 1e-300) throw PropagationError("propagate: ill-posed initial state (zero trace)");

    dense_ = sectors_.size() <= options_.dense_sector_limit;
    if (dense_) {
      dense_gen_[0] = ComplexMatrix(gen_[0]);
      dense_gen_[1] = ComplexMatrix(gen_[1]);
    } else {
      gen_t_[0] = gen_[0].transpose();
      gen_t_[1] = gen_[1].transpose();
    }
  }

  std::size_t sector_size() const { return sectors_.size(); }
  bool uses_dense_exponentials() const { return dense_; }
  const SparseComplexMatrix& generator(Branch b) const { return gen_[static_cast<int>(b)]; }

  std::vector<Complex> coherence(const PulseSchedule& schedule, std::span<const double> grid) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (!(grid[k] >= 0.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
        throw PropagationError("propagate: time grid must be nonnegative and strictly increasing");
      }
    }
    std::vector<Complex> out(grid.size());
    const auto step = detail::uniform_step(grid);
    const auto dt = [&](std::size_t k) {
      if (k == 0) return grid[0];
      return step ? *step : grid[k] - grid[k - 1];
    };

    if (schedule.p == 0) {
      ComplexVector v = rho0_;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        forward(Branch::b01, dt(k), v);
        out[k] = Complex(trace_.transpose() * v) / trace0_;
      }
    } else if (schedule.p == 1) {
      // Tr E10(t/2) E01(t/2) rho0: both halves advance incrementally.
      ComplexVector v = rho0_;
      ComplexVector u = trace_;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        forward(Branch::b01, 0.5 * dt(k), v);
        backward(Branch::b10, 0.5 * dt(k), u);
        out[k] = Complex(u.transpose() * v) / trace0_;
      }
    } else {
      for (std::size_t k = 0; k < grid.size(); ++k) {
        ComplexVector v = rho0_;
        for (const auto& seg : segment_plan(schedule.at(grid[k]))) forward(seg.branch, seg.duration, v);
        out[k] = Complex(trace_.transpose() * v) / trace0_;
      }
    }
    return out;
  }

  /// exp(G_b t), cached per (branch, duration); dense mode only.
  const ComplexMatrix& exponential(Branch b, double t) {
    for (const auto& e : cache_) {
      if (e.branch == b && e.duration == t) return e.value;
    }
    if (cache_.size() >= kCacheLimit) cache_.erase(cache_.begin());
    cache_.push_back({b, t, expm(dense_gen_[static_cast<int>(b)], t)});
    return cache_.back().value;
  }

 private:
  struct CacheEntry {
    Branch branch;
    double duration;
    ComplexMatrix value;
  };
  static constexpr std::size_t kCacheLimit = 16;

  void forward(Branch b, double t, ComplexVector& v) {
    if (t == 0.0) return;
    if (dense_) {
      v = exponential(b, t) * v;
    } else {
      v = expm_action(gen_[static_cast<int>(b)], t, std::move(v), options_.action_tolerance);
    }
  }

  // u^T <- u^T exp(G_b t)
  void backward(Branch b, double t, ComplexVector& u) {
    if (t == 0.0) return;
    if (dense_) {
      u = exponential(b, t).transpose() * u;
    } else {
      u = expm_action(gen_t_[static_cast<int>(b)], t, std::move(u), options_.action_tolerance);
    }
  }

  PropagationOptions options_;
  MagnetizationSectors sectors_;
  SparseComplexMatrix gen_[2];
  SparseComplexMatrix gen_t_[2];
  ComplexMatrix dense_gen_[2];
  ComplexVector rho0_;
  ComplexVector trace_;
  Complex trace0_{1.0, 0.0};
  bool dense_ = true;
  std::vector<CacheEntry> cache_;
};

/// Coherence curve of one cluster; grid points are total evolution times.
inline std::vector<Complex> propagate_curve(const SystemSpec& spec, const Cluster& cluster, const PulseSchedule& schedule,
                                            std::span<const double> grid, const PropagationOptions& options = {}) {
  ClusterEvolution evo(spec, cluster, options);
  return evo.coherence(schedule, grid);
}

/// Tr[rho_01(t)] / Tr[rho_01(0)] after one experiment of total time t.
inline Complex propagate(const SystemSpec& spec, const Cluster& cluster, const PulseSchedule& schedule, double t) {
  if (!(t >= 0.0)) throw PropagationError("propagate: negative time");
  const double grid[1] = {t};
  return propagate_curve(spec, cluster, schedule, grid).front();
}

inline Complex propagate(const SystemSpec& spec, const Cluster& cluster, const PulseSchedule& schedule) {
  return propagate(spec, cluster, schedule, schedule.total_time);
}

// --------------------------------------------------- unitary (gamma = 0)

/// Conventional two-branch Schrodinger evolution of the cluster, ignoring
/// all jump channels: Tr[W_L rho W_R^dagger] / Tr[rho].
inline std::vector<Complex> unitary_curve(const SystemSpec& spec, const Cluster& cluster, const PulseSchedule& schedule,
                                          std::span<const double> grid) {
  const auto h = project_hamiltonians(spec, cluster);
  const ComplexMatrix rho = cluster_density(spec, cluster);
  const Complex tr0 = rho.trace();
  if (std::abs(tr0) < 1e-300) throw PropagationError("propagate: ill-posed initial state (zero trace)");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> e0(h.h0), e1(h.h1);
  const auto evolve = [](const Eigen::SelfAdjointEigenSolver<ComplexMatrix>& e, double t) {
    const ComplexVector phases = (-kI * t * e.eigenvalues().cast<Complex>()).array().exp();
    return ComplexMatrix(e.eigenvectors() * phases.asDiagonal() * e.eigenvectors().adjoint());
  };
  std::vector<Complex> out;
  out.reserve(grid.size());
  const Eigen::Index d = rho.rows();
  for (double t : grid) {
    ComplexMatrix wl = ComplexMatrix::Identity(d, d);
    ComplexMatrix wr = wl;
    for (const auto& seg : segment_plan(schedule.at(t))) {
      const bool straight = seg.branch == Branch::b01;
      wl = evolve(straight ? e0 : e1, seg.duration) * wl;
      wr = evolve(straight ? e1 : e0, seg.duration) * wr;
    }
    out.push_back((wl * rho * wr.adjoint()).trace() / tr0);
  }
  return out;
}

// ------------------------------------------------------------- analytic

/// Free-evolution coherence of the central spin coupled to one
/// infinite-temperature bath spin with equal raise/lower rates gamma:
///   e^{-gamma t} (cosh(w t / 2) + (2 gamma / w) sinh(w t / 2)),  w = sqrt(4 gamma^2 - a^2).
inline Complex single_spin_analytic(double a, double gamma, double t) {
  const Complex w = std::sqrt(Complex(4.0 * gamma * gamma - a * a, 0.0));
  const Complex x = 0.5 * w * t;
  if (std::abs(x) < 1e-6) {
    // cosh x ~ 1 + x^2/2, (2 gamma / w) sinh x = gamma t (sinh x / x) ~ gamma t (1 + x^2/6)
    return std::exp(-gamma * t) * (1.0 + 0.5 * x * x + gamma * t * (1.0 + x * x / 6.0));
  }
  const Complex c = 2.0 * gamma / w;
  if (std::abs(x.real()) < 20.0) return std::exp(-gamma * t) * (std::cosh(x) + c * std::sinh(x));
  // cosh/sinh would overflow
  return 0.5 * ((1.0 + c) * std::exp(x - gamma * t) + (1.0 - c) * std::exp(-x - gamma * t));
}

}  // namespace mecce
