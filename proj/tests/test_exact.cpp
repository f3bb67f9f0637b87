#include <catch2/catch_amalgamated.hpp>

#include "mecce/exact.hpp"
#include "test_support.hpp"

using namespace mecce;

TEST_CASE("one-spin oracle equals the analytic coherence") {
  SystemSpec spec;
  spec.bath.push_back({0, std::nullopt, 3.0});
  spec.initial = BathState::maximally_mixed(1);
  set_uniform_depolarization(spec, 0.9);
  const auto grid = uniform_grid(5.0, 51);
  const auto c = exact_coherence(spec, {}, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(c.values[k] - single_spin_analytic(3.0, 0.9, grid[k])) < 1e-10);
}

TEST_CASE("oracle size caps") {
  auto spec = testing::random_spec(4, 1);
  CHECK_THROWS_AS(exact_coherence(spec, {}, uniform_grid(1.0, 3), 3), OracleError);
  CHECK_THROWS_AS(exact_unprojected(spec, {}, uniform_grid(1.0, 3), 4), OracleError);
}

TEST_CASE("unprojected evolution preserves trace and positivity") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto spec = testing::random_spec(4, seed, 0.3, 0.2);
    const auto grid = uniform_grid(3.0, 7);
    for (int p : {0, 1, 2}) {
      const auto rep = exact_unprojected(spec, {p, PulseTiming::cpmg, 0.0}, grid);
      CHECK(rep.worst_trace_error() < 1e-10);
      CHECK(rep.lowest_eigenvalue() >= -1e-10);
      for (double h : rep.hermiticity) CHECK(h < 1e-10);
    }
  }
}

TEST_CASE("unprojected off-diagonal block matches the projected oracle") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto spec = testing::random_spec(4, 10 + seed, 0.25, 0.15);
    const auto grid = uniform_grid(2.5, 11);
    for (int p : {0, 1, 2, 3}) {
      const PulseSchedule s{p, PulseTiming::cpmg, 0.0};
      const auto full = exact_unprojected(spec, s, grid);
      const auto proj = exact_coherence(spec, s, grid);
      for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(full.coherence[k] - proj.values[k]) < 1e-9);
    }
  }
}

TEST_CASE("two-site exchange channel matches a hand-built Liouvillian") {
  SystemSpec spec;
  spec.bath = {{0, std::nullopt, 1.3}, {1, std::nullopt, -0.4}};
  spec.graph.add(0, 1, 0.7);
  spec.initial = BathState::random_product(2, 3);
  add_edge_exchange(spec, 0.35);
  const Cluster c({0, 1});
  const auto gen = build_generator(project_hamiltonians(spec, c), dense_jumps(spec, c));

  // basis |uu>, |ud>, |du>, |dd>; exchange_up moves |ud> -> |du>, i.e. spin 0
  // is lowered and spin 1 raised; exchange_down is the reverse
  ComplexMatrix h0 = ComplexMatrix::Zero(4, 4), h1 = h0, up = h0, down = h0;
  const double a0 = 1.3, a1 = -0.4, J = 0.7;
  for (int b = 0; b < 2; ++b) {
    const double s = b == 0 ? 1.0 : -1.0;
    ComplexMatrix& h = b == 0 ? h0 : h1;
    h(0, 0) = s * (a0 + a1) / 4 - J / 2;
    h(1, 1) = s * (a0 - a1) / 4 + J / 2;
    h(2, 2) = s * (a1 - a0) / 4 + J / 2;
    h(3, 3) = -s * (a0 + a1) / 4 - J / 2;
    h(1, 2) = h(2, 1) = J / 2;
  }
  up(2, 1) = 1.0;
  down(1, 2) = 1.0;
  ComplexMatrix want = ComplexMatrix::Zero(16, 16);
  const Complex i(0, 1);
  // entrywise: (H rho)_{rc} = sum_k H_rk rho_kc, (rho H)_{rc} = sum_k rho_rk H_kc
  for (int r = 0; r < 4; ++r)
    for (int c2 = 0; c2 < 4; ++c2)
      for (int k = 0; k < 4; ++k) {
        want(r + 4 * c2, k + 4 * c2) += -i * h0(r, k);
        want(r + 4 * c2, r + 4 * k) += i * h1(k, c2);
      }
  for (const ComplexMatrix* l : {&up, &down}) {
    const ComplexMatrix k = l->adjoint() * *l;
    for (int r = 0; r < 4; ++r)
      for (int c2 = 0; c2 < 4; ++c2)
        for (int p = 0; p < 4; ++p)
          for (int q = 0; q < 4; ++q) {
            // L rho L^dag: (r, c2) <- L_rp rho_pq conj(L_c2 q)
            want(r + 4 * c2, p + 4 * q) += 0.35 * (*l)(r, p) * std::conj((*l)(c2, q));
            if (q == c2) want(r + 4 * c2, p + 4 * q) -= 0.35 * 0.5 * k(r, p);
            if (p == r) want(r + 4 * c2, p + 4 * q) -= 0.35 * 0.5 * k(q, c2);
          }
  }
  CHECK(testing::max_abs_diff(gen.g01, want) < 1e-12);
}
