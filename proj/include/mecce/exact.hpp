#pragma once

// Brute-force references on the whole bath: the projected equation with the
// entire bath as one cluster, and the full GKSL evolution of central spin
// plus bath with physical pi-pulses.

#include "mecce/cce.hpp"
#include "mecce/lindblad.hpp"
#include "mecce/operator_algebra.hpp"
#include "mecce/spin_model.hpp"

#include <Eigen/Eigenvalues>

#include <span>
#include <string>
#include <vector>

namespace mecce {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kExactCap = 12;
inline constexpr std::size_t kUnprojectedCap = 11;

inline CoherenceCurve exact_coherence(const SystemSpec& spec, const PulseSchedule& schedule, std::span<const double> grid,
                                      std::size_t cap = kExactCap, const PropagationOptions& options = {}) {
  const std::size_t n = spec.bath.size();
  if (n == 0) throw OracleError("exact_coherence: empty bath");
  if (n > cap) throw OracleError("exact_coherence: " + std::to_string(n) + " spins exceeds the cap of " + std::to_string(cap));
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  CoherenceCurve out;
  out.t.assign(grid.begin(), grid.end());
  out.values = propagate_curve(spec, Cluster::whole(n), schedule, grid, options);
  out.label = "exact";
  out.order = n;
  out.seed = spec.initial.seed;
  out.cluster_count = 1;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct UnprojectedReport {
  std::vector<double> t;
  std::vector<double> trace_error;     // |Tr rho - 1|
  std::vector<double> min_eigenvalue;  // of the Hermitian part of rho
  std::vector<double> hermiticity;     // max |rho - rho^dag|
  std::vector<Complex> coherence;      // Tr_bath <0|rho|1> / Tr_bath <0|rho(0)|1>

  double worst_trace_error() const { return t.empty() ? 0.0 : *std::max_element(trace_error.begin(), trace_error.end()); }
  double lowest_eigenvalue() const { return t.empty() ? 0.0 : *std::min_element(min_eigenvalue.begin(), min_eigenvalue.end()); }
};

/// Full Liouvillian of central spin (first factor) plus bath, with
/// H = |0><0| (x) H0 + |1><1| (x) H1 and jumps acting on the bath only.
inline SparseComplexMatrix full_liouvillian(const SystemSpec& spec) {
  const std::size_t n = spec.bath.size();
  const auto ops = sparse_operators(spec, Cluster::whole(n));
  const Eigen::Index d = Eigen::Index(2) << n;

  SparseComplexMatrix p0(2, 2), p1(2, 2), id2(2, 2);
  p0.insert(0, 0) = 1.0;
  p1.insert(1, 1) = 1.0;
  id2.setIdentity();
  const SparseComplexMatrix h = kron(p0, ops.h0) + kron(p1, ops.h1);
  SparseComplexMatrix id(d, d);
  id.setIdentity();

  SparseComplexMatrix g = Complex(0.0, -1.0) * kron(id, h) + Complex(0.0, 1.0) * kron(SparseComplexMatrix(h.transpose()), id);
  for (const auto& [l_bath, rate] : ops.jumps) {
    const SparseComplexMatrix l = kron(id2, l_bath);
    const SparseComplexMatrix k = SparseComplexMatrix(l.adjoint()) * l;
    g += rate * (kron(SparseComplexMatrix(l.conjugate()), l) - 0.5 * kron(id, k) - 0.5 * kron(SparseComplexMatrix(k.transpose()), id));
  }
  g.prune(Complex(0.0, 0.0));
  return g;
}

/// Evolves the full state rho = |+><+| (x) rho_bath; pi-pulses are X on the
/// central spin. After an odd number of pulses the tracked block is the
/// adjoint of the projected one, so the coherence is conjugated back.
inline UnprojectedReport exact_unprojected(const SystemSpec& spec, const PulseSchedule& schedule, std::span<const double> grid,
                                           std::size_t cap = kUnprojectedCap) {
  const std::size_t n = spec.bath.size();
  if (n == 0) throw OracleError("exact_unprojected: empty bath");
  if (n + 1 > cap) {
    throw OracleError("exact_unprojected: " + std::to_string(n + 1) + " spins exceeds the cap of " + std::to_string(cap));
  }
  spec.validate();
  const Eigen::Index d = Eigen::Index(2) << n;
  const Eigen::Index half = d / 2;
  const SparseComplexMatrix g = full_liouvillian(spec);

  const ComplexMatrix bath = cluster_density(spec, Cluster::whole(n));
  ComplexMatrix plus(2, 2);
  plus.setConstant(0.5);
  const ComplexMatrix rho0 = kron(plus, bath);
  const Complex block0 = rho0.block(0, half, half, half).trace();
  if (std::abs(block0) < 1e-300) throw OracleError("exact_unprojected: ill-posed initial state (zero trace)");

  const auto flip = [&](const ComplexMatrix& r) {
    ComplexMatrix out(d, d);
    out.block(0, 0, half, half) = r.block(half, half, half, half);
    out.block(half, half, half, half) = r.block(0, 0, half, half);
    out.block(0, half, half, half) = r.block(half, 0, half, half);
    out.block(half, 0, half, half) = r.block(0, half, half, half);
    return out;
  };

  UnprojectedReport rep;
  for (double t : grid) {
    if (!(t >= 0.0)) throw OracleError("exact_unprojected: negative time");
    ComplexVector v = vec(rho0);
    double last = 0.0;
    const auto pulses = pulse_times(schedule.at(t));
    for (double tp : pulses) {
      v = expm_action(g, tp - last, std::move(v));
      v = vec(flip(unvec(v, d, d)));
      last = tp;
    }
    v = expm_action(g, t - last, std::move(v));
    const ComplexMatrix rho = unvec(v, d, d);
    Complex c = rho.block(0, half, half, half).trace() / block0;
    if (pulses.size() % 2 == 1) c = std::conj(c);
    const ComplexMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(herm, Eigen::EigenvaluesOnly);

    rep.t.push_back(t);
    rep.trace_error.push_back(std::abs(rho.trace() - 1.0));
    rep.min_eigenvalue.push_back(eig.eigenvalues().minCoeff());
    rep.hermiticity.push_back((rho - rho.adjoint()).cwiseAbs().maxCoeff());
    rep.coherence.push_back(c);
  }
  return rep;
}

}  // namespace mecce
