#pragma once

// Physical system description: bath spins, intrabath couplings, dissipative
// channels, initial bath state, pulse schedule and time grid, plus the
// generators for the chain, square-lattice and near-surface NV models.
//
// Units: couplings a_i and J_ij are angular frequencies (rad / time unit),
// rates are 1 / time unit. The NV builder works in microseconds and
// nanometres.

#include "mecce/operator_algebra.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mecce {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vec3 = std::array<double, 3>;
using SpinDensity = Eigen::Matrix2cd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct BathSpin {
  int index = 0;
  std::optional<Vec3> position;  // nm; absent for abstract lattices
  double a = 0.0;                // coupling to the central spin
};

struct Coupling {
  int i = 0;
  int j = 0;
  double J = 0.0;
};

class CouplingGraph {
 public:
  CouplingGraph() = default;

  void add(int i, int j, double J) {
    if (i == j) throw SpecError("coupling graph: self edge on spin " + std::to_string(i));
    if (!std::isfinite(J)) throw SpecError("coupling graph: non-finite J on edge");
    auto key = std::minmax(i, j);
    if (!pairs_.insert(key).second) {
      throw SpecError("coupling graph: duplicate edge (" + std::to_string(key.first) + ", " +
                      std::to_string(key.second) + ")");
    }
    edges_.push_back({i, j, J});
  }

  const std::vector<Coupling>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }

  CouplingGraph scaled(double factor) const {
    CouplingGraph out = *this;
    for (auto& e : out.edges_) e.J *= factor;
    return out;
  }

 private:
  std::vector<Coupling> edges_;
  std::set<std::pair<int, int>> pairs_;
};

/// raise: I+ ; lower: I- ; exchange_up on (i, j): I-^i I+^j ;
/// exchange_down on (i, j): I+^i I-^j.
enum class JumpKind { raise, lower, exchange_up, exchange_down };

inline bool is_exchange(JumpKind k) {
  return k == JumpKind::exchange_up || k == JumpKind::exchange_down;
}

inline const char* to_string(JumpKind k) {
  switch (k) {
    case JumpKind::raise: return "raise";
    case JumpKind::lower: return "lower";
    case JumpKind::exchange_up: return "exchange-up";
    case JumpKind::exchange_down: return "exchange-down";
  }
  return "?";
}

struct JumpSpec {
  JumpKind kind = JumpKind::lower;
  std::vector<int> targets;
  double rate = 0.0;
};

enum class PulseTiming { cpmg, equidistant };

struct PulseSchedule {
  int p = 0;
  PulseTiming timing = PulseTiming::cpmg;
  double total_time = 0.0;

  PulseSchedule at(double t) const { return {p, timing, t}; }
};

/// Pi-pulse times inside (0, total_time).
inline std::vector<double> pulse_times(const PulseSchedule& s) {
  if (s.p < 0) throw SpecError("pulse schedule: negative pulse count");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(s.p));
  for (int k = 1; k <= s.p; ++k) {
    if (s.timing == PulseTiming::cpmg) {
      times.push_back(s.total_time * (2.0 * k - 1.0) / (2.0 * s.p));
    } else {
      times.push_back(s.total_time * k / (s.p + 1.0));
    }
  }
  return times;
}

enum class BathStateKind { neel, maximally_mixed, random_product, explicit_state };

struct BathState {
  BathStateKind kind = BathStateKind::maximally_mixed;
  std::vector<SpinDensity> spins;
  std::uint64_t seed = 0;
  bool pure = true;  // random_product: Haar pure states, otherwise random basis states

  static BathState neel(std::size_t n) {
    BathState s;
    s.kind = BathStateKind::neel;
    for (std::size_t i = 0; i < n; ++i) {
      SpinDensity rho = SpinDensity::Zero();
      rho(i % 2 == 0 ? 0 : 1, i % 2 == 0 ? 0 : 1) = 1.0;
      s.spins.push_back(rho);
    }
    return s;
  }

  static BathState maximally_mixed(std::size_t n) {
    BathState s;
    s.kind = BathStateKind::maximally_mixed;
    s.spins.assign(n, SpinDensity::Identity() * 0.5);
    return s;
  }

  /// Independent single-spin states drawn from the seed: Haar-random pure
  /// states, or uniformly random basis states when pure == false.
  static BathState random_product(std::size_t n, std::uint64_t seed, bool pure = true) {
    BathState s;
    s.kind = BathStateKind::random_product;
    s.seed = seed;
    s.pure = pure;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      SpinDensity rho = SpinDensity::Zero();
      if (pure) {
        Eigen::Vector2cd psi;
        psi << Complex(gauss(rng), gauss(rng)), Complex(gauss(rng), gauss(rng));
        psi.normalize();
        rho = psi * psi.adjoint();
      } else {
        const int b = coin(rng) ? 1 : 0;
        rho(b, b) = 1.0;
      }
      s.spins.push_back(rho);
    }
    return s;
  }

  static BathState from_matrices(std::vector<SpinDensity> spins) {
    BathState s;
    s.kind = BathStateKind::explicit_state;
    s.spins = std::move(spins);
    return s;
  }
};

inline const char* to_string(BathStateKind k) {
  switch (k) {
    case BathStateKind::neel: return "neel";
    case BathStateKind::maximally_mixed: return "maximally-mixed";
    case BathStateKind::random_product: return "random-product";
    case BathStateKind::explicit_state: return "explicit";
  }
  return "?";
}

inline void validate_density(const SpinDensity& rho, std::size_t index) {
  const std::string where = "bath state of spin " + std::to_string(index);
  if (!rho.allFinite()) throw SpecError(where + ": non-finite entries");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw SpecError(where + ": not Hermitian");
  if (std::abs(rho.trace() - 1.0) > 1e-12) throw SpecError(where + ": trace is not 1");
  Eigen::SelfAdjointEigenSolver<SpinDensity> eig(rho);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw SpecError(where + ": not positive semidefinite");
}

struct SystemSpec {
  std::vector<BathSpin> bath;
  CouplingGraph graph;
  std::vector<JumpSpec> jumps;
  BathState initial;
  PulseSchedule pulses;
  std::vector<double> time_grid;
  std::vector<std::string> warnings;

  std::size_t size() const { return bath.size(); }

  void validate() const {
    const int n = static_cast<int>(bath.size());
    std::set<int> seen;
    for (std::size_t k = 0; k < bath.size(); ++k) {
      const auto& s = bath[k];
      if (s.index != static_cast<int>(k)) {
        throw SpecError("bath spin " + std::to_string(k) + " has index " + std::to_string(s.index) +
                        " (indices must equal positions 0..n-1)");
      }
      if (!std::isfinite(s.a)) throw SpecError("bath spin " + std::to_string(k) + ": non-finite a");
    }
    for (const auto& e : graph.edges()) {
      if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) {
        throw SpecError("coupling graph: edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                        ") references a missing spin");
      }
    }
    for (const auto& jmp : jumps) {
      if (!(jmp.rate >= 0.0) || !std::isfinite(jmp.rate)) throw SpecError("jump: rate must be finite and >= 0");
      const std::size_t want = is_exchange(jmp.kind) ? 2 : 1;
      if (jmp.targets.size() != want) {
        throw SpecError(std::string("jump ") + to_string(jmp.kind) + ": expected " +
                        std::to_string(want) + " target(s)");
      }
      for (int t : jmp.targets) {
        if (t < 0 || t >= n) throw SpecError("jump: target " + std::to_string(t) + " is not a bath spin");
      }
      if (want == 2 && jmp.targets[0] == jmp.targets[1]) throw SpecError("jump: exchange targets must differ");
    }
    if (initial.spins.size() != bath.size()) {
      throw SpecError("bath state covers " + std::to_string(initial.spins.size()) + " spins, bath has " +
                      std::to_string(bath.size()));
    }
    for (std::size_t k = 0; k < initial.spins.size(); ++k) validate_density(initial.spins[k], k);
    if (pulses.p < 0) throw SpecError("pulse schedule: negative pulse count");
    for (std::size_t k = 0; k < time_grid.size(); ++k) {
      if (!std::isfinite(time_grid[k]) || time_grid[k] < 0.0) throw SpecError("time grid: negative or non-finite time");
      if (k > 0 && !(time_grid[k] > time_grid[k - 1])) throw SpecError("time grid: not strictly increasing");
    }
  }
};

/// Uniform time grid 0, h, 2h, ..., t_max with `points` entries.
inline std::vector<double> uniform_grid(double t_max, std::size_t points) {
  if (points < 2 || !(t_max > 0.0)) throw SpecError("time grid: need >= 2 points and t_max > 0");
  std::vector<double> grid(points);
  const double h = t_max / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) grid[k] = static_cast<double>(k) * h;
  return grid;
}

/// Replaces the single-spin channels with raise + lower at rate gamma each
/// (infinite-temperature depolarization, population T1 = 1 / (2 gamma)).
inline void set_uniform_depolarization(SystemSpec& spec, double gamma) {
  std::erase_if(spec.jumps, [](const JumpSpec& j) { return !is_exchange(j.kind); });
  if (gamma <= 0.0) return;
  for (const auto& s : spec.bath) {
    spec.jumps.push_back({JumpKind::raise, {s.index}, gamma});
    spec.jumps.push_back({JumpKind::lower, {s.index}, gamma});
  }
}

/// Adds incoherent exchange I-^i I+^j and I+^i I-^j on every graph edge.
inline void add_edge_exchange(SystemSpec& spec, double gamma) {
  if (gamma <= 0.0) return;
  for (const auto& e : spec.graph.edges()) {
    spec.jumps.push_back({JumpKind::exchange_up, {e.i, e.j}, gamma});
    spec.jumps.push_back({JumpKind::exchange_down, {e.i, e.j}, gamma});
  }
}

inline SystemSpec without_dissipation(SystemSpec spec) {
  spec.jumps.clear();
  return spec;
}

// Draw order is part of the contract: all a_i first, then J along the chain.
inline SystemSpec build_chain(std::size_t n, double j_max, double a_max, std::uint64_t seed) {
  if (n == 0) throw SpecError("build_chain: n must be >= 1");
  SystemSpec spec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> a_dist(0.0, a_max);
  std::uniform_real_distribution<double> j_dist(0.0, j_max);
  for (std::size_t i = 0; i < n; ++i) spec.bath.push_back({static_cast<int>(i), std::nullopt, a_dist(rng)});
  for (std::size_t i = 0; i + 1 < n; ++i) spec.graph.add(static_cast<int>(i), static_cast<int>(i + 1), j_dist(rng));
  spec.initial = BathState::neel(n);
  return spec;
}

inline SystemSpec build_lattice2d(std::size_t side, double j, double a_max, std::uint64_t seed,
                                  bool periodic = false, bool pure_state = true) {
  if (side == 0) throw SpecError("build_lattice2d: side must be >= 1");
  SystemSpec spec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> a_dist(0.0, a_max);
  const auto id = [side](std::size_t r, std::size_t c) { return static_cast<int>(r * side + c); };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      spec.bath.push_back({id(r, c), Vec3{double(c), double(r), 0.0}, a_dist(rng)});
    }
  }
  std::set<std::pair<int, int>> added;
  const auto link = [&](int u, int v) {
    if (u == v) return;
    if (added.insert(std::minmax(u, v)).second) spec.graph.add(u, v, j);
  };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      if (c + 1 < side) link(id(r, c), id(r, c + 1));
      else if (periodic) link(id(r, c), id(r, 0));
      if (r + 1 < side) link(id(r, c), id(r + 1, c));
      else if (periodic) link(id(r, c), id(0, c));
    }
  }
  // separate stream for the state so the couplings do not depend on its kind
  spec.initial = BathState::random_product(side * side, seed ^ 0x9e3779b97f4a7c15ULL, pure_state);
  return spec;
}

/// Electron-electron dipolar constant mu0/(4 pi) * hbar * gamma_e^2 in
/// rad * nm^3 / us (about 2 pi * 52.04 MHz nm^3).
inline double electron_dipolar_constant() {
  constexpr double mu0_over_4pi = 1e-7;          // T m / A
  constexpr double hbar = 1.054571817e-34;       // J s
  constexpr double mu_bohr = 9.2740100783e-24;   // J / T
  constexpr double g_e = 2.00231930436256;
  const double gamma_e = g_e * mu_bohr / hbar;   // rad / (s T)
  const double si = mu0_over_4pi * hbar * gamma_e * gamma_e;  // rad m^3 / s
  return si * 1e27 * 1e-6;
}

/// Secular point-dipole coupling D (1 - 3 cos^2 theta) / r^3 for the
/// separation vector r and field axis (unit vector).
inline double secular_dipolar(const Vec3& r, const Vec3& axis, double prefactor) {
  const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  if (!(r2 > 0.0)) throw SpecError("dipolar coupling: coincident spins");
  const double dist = std::sqrt(r2);
  const double c = (r[0] * axis[0] + r[1] * axis[1] + r[2] * axis[2]) / dist;
  return prefactor * (1.0 - 3.0 * c * c) / (r2 * dist);
}

struct NvSurfaceParams {
  double depth_nm = 10.0;
  double density_per_nm2 = 1e-3;
  double t1_us = 100.0;
  double extent_nm = 200.0;
  std::uint64_t seed = 0;
  Vec3 field_axis{1.0 / std::numbers::sqrt3, 1.0 / std::numbers::sqrt3, 1.0 / std::numbers::sqrt3};
};

/// Electron spins on a square patch of the (100) surface above an NV
/// centre at (0, 0, -depth). Times in us, couplings in rad/us.
inline SystemSpec build_nv_surface(const NvSurfaceParams& p) {
  if (!(p.depth_nm >= 0.0)) throw SpecError("build_nv_surface: depth must be >= 0");
  if (!(p.density_per_nm2 > 0.0)) throw SpecError("build_nv_surface: density must be > 0");
  if (!(p.t1_us > 0.0)) throw SpecError("build_nv_surface: T1 must be > 0");
  if (!(p.extent_nm > 0.0)) throw SpecError("build_nv_surface: extent must be > 0");
  const double axis_norm = std::sqrt(p.field_axis[0] * p.field_axis[0] + p.field_axis[1] * p.field_axis[1] +
                                     p.field_axis[2] * p.field_axis[2]);
  if (!(axis_norm > 0.0)) throw SpecError("build_nv_surface: field axis must be nonzero");
  const Vec3 axis{p.field_axis[0] / axis_norm, p.field_axis[1] / axis_norm, p.field_axis[2] / axis_norm};

  SystemSpec spec;
  std::mt19937_64 rng(p.seed);
  std::poisson_distribution<long> count_dist(p.density_per_nm2 * p.extent_nm * p.extent_nm);
  std::uniform_real_distribution<double> coord(-0.5 * p.extent_nm, 0.5 * p.extent_nm);
  const long count = count_dist(rng);
  const double dee = electron_dipolar_constant();
  const Vec3 nv{0.0, 0.0, -p.depth_nm};
  for (long k = 0; k < count; ++k) {
    const Vec3 pos{coord(rng), coord(rng), 0.0};
    const Vec3 r{pos[0] - nv[0], pos[1] - nv[1], pos[2] - nv[2]};
    spec.bath.push_back({static_cast<int>(k), pos, secular_dipolar(r, axis, dee)});
  }
  for (std::size_t i = 0; i < spec.bath.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.bath.size(); ++j) {
      const auto& pi = *spec.bath[i].position;
      const auto& pj = *spec.bath[j].position;
      const Vec3 r{pj[0] - pi[0], pj[1] - pi[1], pj[2] - pi[2]};
      spec.graph.add(static_cast<int>(i), static_cast<int>(j), secular_dipolar(r, axis, dee));
    }
  }
  spec.initial = BathState::maximally_mixed(spec.bath.size());
  set_uniform_depolarization(spec, 1.0 / (2.0 * p.t1_us));
  if (spec.bath.empty()) spec.warnings.push_back("build_nv_surface: patch contains no surface spins");
  return spec;
}

}  // namespace mecce
