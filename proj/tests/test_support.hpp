#pragma once

// Test-only helpers: random matrices and brute-force reference oracles that
// deliberately avoid the library's code paths.

#include "mecce/operator_algebra.hpp"
#include "mecce/spin_model.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>

namespace mecce::testing {

inline ComplexMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  const ComplexMatrix m = random_matrix(n, n, rng);
  return 0.5 * (m + m.adjoint());
}

/// Maximum absolute entrywise difference.
template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Superoperator of an arbitrary linear map on d x d matrices, obtained by
/// applying it to every matrix unit E_rc and stacking columns.
inline ComplexMatrix superoperator_by_action(Eigen::Index d, const std::function<ComplexMatrix(const ComplexMatrix&)>& map) {
  ComplexMatrix out(d * d, d * d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      ComplexMatrix unit = ComplexMatrix::Zero(d, d);
      unit(r, c) = 1.0;
      const ComplexMatrix image = map(unit);
      for (Eigen::Index cc = 0; cc < d; ++cc)
        for (Eigen::Index rr = 0; rr < d; ++rr) out(rr + d * cc, r + d * c) = image(rr, cc);
    }
  }
  return out;
}

/// Projected Lindblad map applied directly in matrix form.
struct DirectProjectedMap {
  ComplexMatrix h_left;
  ComplexMatrix h_right;
  std::vector<std::pair<ComplexMatrix, double>> jumps;

  ComplexMatrix operator()(const ComplexMatrix& x) const {
    const Complex i(0.0, 1.0);
    ComplexMatrix out = -i * h_left * x + i * x * h_right;
    for (const auto& [l, g] : jumps) {
      const ComplexMatrix k = l.adjoint() * l;
      out += g * (l * x * l.adjoint() - 0.5 * (k * x + x * k));
    }
    return out;
  }
};

/// Integrates dv/dt = G v with classical RK4 on a fine fixed step.
inline ComplexVector rk4(const ComplexMatrix& g, ComplexVector v, double t, int steps) {
  const double h = t / steps;
  for (int s = 0; s < steps; ++s) {
    const ComplexVector k1 = g * v;
    const ComplexVector k2 = g * (v + 0.5 * h * k1);
    const ComplexVector k3 = g * (v + 0.5 * h * k2);
    const ComplexVector k4 = g * (v + h * k3);
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return v;
}


/// Small random bath: chain couplings plus a few extra edges, random
/// product state, optional depolarization and exchange channels.
inline SystemSpec random_spec(std::size_t n, std::uint64_t seed, double gamma = 0.0, double exchange = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SystemSpec spec;
  for (std::size_t i = 0; i < n; ++i) spec.bath.push_back({int(i), std::nullopt, 3.0 * u(rng)});
  for (std::size_t i = 0; i + 1 < n; ++i) spec.graph.add(int(i), int(i + 1), 1.5 * u(rng));
  if (n > 3) spec.graph.add(0, int(n - 1), 0.7 * u(rng));
  spec.initial = BathState::random_product(n, seed + 1);
  set_uniform_depolarization(spec, gamma);
  add_edge_exchange(spec, exchange);
  return spec;
}

}  // namespace mecce::testing
