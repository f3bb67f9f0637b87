#include <catch2/catch_amalgamated.hpp>

#include "mecce/lindblad.hpp"
#include "test_support.hpp"

#include <random>

using namespace mecce;
using mecce::testing::max_abs_diff;

namespace {

SystemSpec single_spin(double a, double gamma, const SpinDensity& rho = SpinDensity::Identity() * 0.5) {
  SystemSpec spec;
  spec.bath.push_back({0, std::nullopt, a});
  spec.initial = BathState::from_matrices({rho});
  set_uniform_depolarization(spec, gamma);
  return spec;
}

ComplexMatrix dense_from_sparse(const SparseComplexMatrix& m) { return ComplexMatrix(m); }

}  // namespace

TEST_CASE("single-spin branches are +a/2 Iz and -a/2 Iz") {
  const auto spec = single_spin(1.7, 0.0);
  const auto h = project_hamiltonians(spec, Cluster({0}));
  ComplexMatrix want = ComplexMatrix::Zero(2, 2);
  want.diagonal() << 1.7 / 4.0, -1.7 / 4.0;
  CHECK(max_abs_diff(h.h0, want) == 0.0);
  CHECK(max_abs_diff(h.h1, -want) == 0.0);
}

TEST_CASE("pair Hamiltonian matches the hand-written 4x4 matrix") {
  const double a1 = 0.8, a2 = -2.3, J = 0.45;
  SystemSpec spec;
  spec.bath = {{0, std::nullopt, a1}, {1, std::nullopt, a2}};
  spec.graph.add(0, 1, J);
  spec.initial = BathState::maximally_mixed(2);
  const auto h = project_hamiltonians(spec, Cluster({0, 1}));
  // basis |uu>, |ud>, |du>, |dd>
  for (int branch = 0; branch < 2; ++branch) {
    const double sgn = branch == 0 ? 1.0 : -1.0;
    ComplexMatrix want = ComplexMatrix::Zero(4, 4);
    want(0, 0) = sgn * (a1 + a2) / 4.0 - J / 2.0;
    want(1, 1) = sgn * (a1 - a2) / 4.0 + J / 2.0;
    want(2, 2) = sgn * (-a1 + a2) / 4.0 + J / 2.0;
    want(3, 3) = -sgn * (a1 + a2) / 4.0 - J / 2.0;
    want(1, 2) = want(2, 1) = J / 2.0;
    CHECK(max_abs_diff(branch == 0 ? h.h0 : h.h1, want) < 1e-15);
  }
}

TEST_CASE("branch Hamiltonians are Hermitian and agree with the bit-level builder") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto spec = testing::random_spec(5, seed, 0.3, 0.2);
    const Cluster c({0, 1, 3, 4});
    const auto h = project_hamiltonians(spec, c);
    CHECK(max_abs_diff(h.h0, ComplexMatrix(h.h0.adjoint())) < 1e-12);
    CHECK(max_abs_diff(h.h1, ComplexMatrix(h.h1.adjoint())) < 1e-12);
    const auto ops = sparse_operators(spec, c);
    CHECK(max_abs_diff(dense_from_sparse(ops.h0), h.h0) < 1e-14);
    CHECK(max_abs_diff(dense_from_sparse(ops.h1), h.h1) < 1e-14);
    const auto dj = dense_jumps(spec, c);
    REQUIRE(dj.size() == ops.jumps.size());
    for (std::size_t k = 0; k < dj.size(); ++k) {
      CHECK(max_abs_diff(dense_from_sparse(ops.jumps[k].first), dj[k].op) == 0.0);
      CHECK(ops.jumps[k].second == dj[k].rate);
    }
  }
}

TEST_CASE("jumps enter a cluster only when all their targets are inside") {
  auto spec = testing::random_spec(4, 3, 0.5, 0.25);
  const auto in_pair = cluster_jumps(spec, Cluster({1, 2}));
  // raise + lower on spins 1 and 2, plus the two exchange channels on edge (1, 2)
  CHECK(in_pair.size() == 6);
  const auto singleton = cluster_jumps(spec, Cluster({3}));
  CHECK(singleton.size() == 2);
  for (const auto& j : singleton) CHECK_FALSE(is_exchange(j.kind));
}

TEST_CASE("projected generator equals the superoperator of the direct matrix map") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto spec = testing::random_spec(3, seed, 0.4, 0.3);
    const Cluster c({0, 1, 2});
    const auto h = project_hamiltonians(spec, c);
    const auto jumps = dense_jumps(spec, c);
    const auto gen = build_generator(h, jumps);
    testing::DirectProjectedMap m01{h.h0, h.h1, {}}, m10{h.h1, h.h0, {}};
    for (const auto& j : jumps) {
      m01.jumps.emplace_back(j.op, j.rate);
      m10.jumps.emplace_back(j.op, j.rate);
    }
    CHECK(max_abs_diff(gen.g01, testing::superoperator_by_action(8, m01)) < 1e-13);
    CHECK(max_abs_diff(gen.g10, testing::superoperator_by_action(8, m10)) < 1e-13);
  }
}

TEST_CASE("commutator generator annihilates vec(I) when the branches coincide") {
  std::mt19937_64 rng(4);
  const ComplexMatrix h = testing::random_hermitian(8, rng);
  const auto gen = build_generator({h, h}, {});
  CHECK((gen.g01 * vec(ComplexMatrix::Identity(8, 8))).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sector generator is the restriction of the full generator") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto spec = testing::random_spec(4, seed, 0.2, 0.35);
    const Cluster c({0, 1, 2, 3});
    const auto gen = build_generator(project_hamiltonians(spec, c), dense_jumps(spec, c));
    const auto ops = sparse_operators(spec, c);
    const MagnetizationSectors sectors(4);
    const ComplexMatrix s01 = dense_from_sparse(sector_generator(sectors, ops.h0, ops.h1, ops.jumps));
    const ComplexMatrix s10 = dense_from_sparse(sector_generator(sectors, ops.h1, ops.h0, ops.jumps));
    REQUIRE(s01.rows() == 70);
    double worst = 0.0;
    sectors.for_each([&](std::size_t i, std::size_t r, std::size_t c1) {
      sectors.for_each([&](std::size_t j, std::size_t r2, std::size_t c2) {
        const auto fi = static_cast<Eigen::Index>(r + 16 * c1), fj = static_cast<Eigen::Index>(r2 + 16 * c2);
        worst = std::max(worst, std::abs(s01(Eigen::Index(i), Eigen::Index(j)) - gen.g01(fi, fj)));
        worst = std::max(worst, std::abs(s10(Eigen::Index(i), Eigen::Index(j)) - gen.g10(fi, fj)));
      });
    });
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("single-spin population-block eigenvalues are -gamma +- sqrt(4 gamma^2 - a^2) / 2") {
  for (auto [a, gamma] : {std::pair{2.0, 0.1}, {2.0, 1.0}, {2.0, 3.0}, {0.5, 0.25}}) {
    const auto spec = single_spin(a, gamma);
    const auto gen = build_generator(project_hamiltonians(spec, Cluster({0})), dense_jumps(spec, Cluster({0})));
    // rho_01 diagonal entries (0,0) and (1,1) sit at vec indices 0 and 3
    Eigen::Matrix2cd block;
    block << gen.g01(0, 0), gen.g01(0, 3), gen.g01(3, 0), gen.g01(3, 3);
    // characteristic polynomial x^2 - tr x + det of the hand-derived block
    const Complex tr = Complex(-2.0 * gamma, 0.0);
    const Complex det = Complex(-gamma, -a / 2) * Complex(-gamma, a / 2) - gamma * gamma;
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    CHECK(std::abs(block(0, 0) - Complex(-gamma, -a / 2)) < 1e-15);
    CHECK(std::abs(block.trace() - tr) < 1e-14);
    CHECK(std::abs(block.determinant() - det) < 1e-13);
    const Complex root = 0.5 * std::sqrt(Complex(4 * gamma * gamma - a * a));
    const Complex r1 = 0.5 * (tr + disc), r2 = 0.5 * (tr - disc);
    CHECK(std::min(std::abs(r1 - (-gamma + root)), std::abs(r2 - (-gamma + root))) < 1e-13);
    CHECK(std::min(std::abs(r1 - (-gamma - root)), std::abs(r2 - (-gamma - root))) < 1e-13);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(block);
    auto ev = es.eigenvalues();
    auto near = [&](Complex z) { return std::min(std::abs(ev(0) - z), std::abs(ev(1) - z)) < 1e-12; };
    CHECK(near(-gamma + root));
    CHECK(near(-gamma - root));
  }
}

TEST_CASE("segment plans alternate branches and sum to the total time") {
  const auto plan = segment_plan({3, PulseTiming::cpmg, 6.0});
  REQUIRE(plan.size() == 4);
  CHECK(plan[0].branch == Branch::b01);
  CHECK(plan[1].branch == Branch::b10);
  CHECK(plan[2].branch == Branch::b01);
  CHECK(plan[3].branch == Branch::b10);
  CHECK(plan[0].duration == Catch::Approx(1.0));
  CHECK(plan[1].duration == Catch::Approx(2.0));
  CHECK(plan[3].duration == Catch::Approx(1.0));
  double sum = 0.0;
  for (const auto& s : plan) sum += s.duration;
  CHECK(sum == Catch::Approx(6.0).epsilon(1e-15));
  CHECK(segment_plan({0, PulseTiming::cpmg, 2.0}).size() == 1);
}

TEST_CASE("propagate returns exactly 1 at t = 0") {
  const auto spec = testing::random_spec(3, 8, 0.3);
  for (int p : {0, 1, 2}) CHECK(propagate(spec, Cluster({0, 1, 2}), {p, PulseTiming::cpmg, 0.0}, 0.0) == Complex(1.0));
}

TEST_CASE("single mixed spin without dissipation dephases as cos(a t / 2)") {
  const double a = 2.0 * kTwoPi;
  const auto spec = single_spin(a, 0.0);
  for (double t : {0.01, 0.3, 1.1, 4.0}) {
    CHECK(std::abs(propagate(spec, Cluster({0}), {0, PulseTiming::cpmg, t}, t) - std::cos(a * t / 2)) < 1e-12);
  }
}

TEST_CASE("single spin with a = 0 keeps unit coherence under depolarization") {
  const auto spec = single_spin(0.0, 0.7);
  for (double t : {0.5, 3.0, 20.0}) CHECK(std::abs(propagate(spec, Cluster({0}), {}, t) - 1.0) < 1e-13);
}

TEST_CASE("propagate matches the analytic single-spin coherence") {
  const double a = 2.0;
  const auto grid = uniform_grid(10.0 / a, 201);
  for (double ratio : {0.0, 0.1, 0.5, 1.0, 5.0}) {
    const auto spec = single_spin(a, ratio * a);
    const auto curve = propagate_curve(spec, Cluster({0}), {}, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(std::abs(curve[k] - single_spin_analytic(a, ratio * a, grid[k])) < 1e-9);
    }
  }
}

TEST_CASE("static bath under a Hahn echo is fully refocused") {
  SystemSpec spec;
  for (int i = 0; i < 3; ++i) spec.bath.push_back({i, std::nullopt, 1.3 * (i + 1)});
  spec.initial = BathState::random_product(3, 5);
  const auto grid = uniform_grid(7.0, 50);
  for (const auto& v : propagate_curve(spec, Cluster({0, 1, 2}), {1, PulseTiming::cpmg, 0.0}, grid)) {
    CHECK(std::abs(v - 1.0) < 1e-12);
  }
}

TEST_CASE("without dissipation propagation equals two-branch unitary evolution") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto spec = testing::random_spec(4, seed);
    const Cluster c({0, 1, 2, 3});
    const auto grid = uniform_grid(3.0, 31);
    for (int p : {0, 1, 2, 3}) {
      const PulseSchedule s{p, p == 3 ? PulseTiming::equidistant : PulseTiming::cpmg, 0.0};
      const auto me = propagate_curve(spec, c, s, grid);
      const auto u = unitary_curve(spec, c, s, grid);
      for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(me[k] - u[k]) < 1e-10);
    }
  }
}

TEST_CASE("dense exponentials and the sparse Taylor action agree") {
  const auto spec = testing::random_spec(4, 21, 0.4, 0.2);
  const Cluster c({0, 1, 2, 3});
  const auto grid = uniform_grid(4.0, 41);
  PropagationOptions action;
  action.dense_sector_limit = 0;
  for (int p : {0, 1, 2}) {
    const PulseSchedule s{p, PulseTiming::cpmg, 0.0};
    ClusterEvolution dense(spec, c), sparse(spec, c, action);
    REQUIRE(dense.uses_dense_exponentials());
    REQUIRE_FALSE(sparse.uses_dense_exponentials());
    const auto a = dense.coherence(s, grid);
    const auto b = sparse.coherence(s, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-11);
  }
}

TEST_CASE("propagation agrees with an RK4 integration of the full superoperator") {
  const auto spec = testing::random_spec(3, 12, 0.5, 0.3);
  const Cluster c({0, 1, 2});
  const auto gen = build_generator(project_hamiltonians(spec, c), dense_jumps(spec, c));
  const ComplexMatrix rho = cluster_density(spec, c);
  const double t = 1.7;
  const ComplexVector v = testing::rk4(gen.g01, vec(rho), t, 4000);
  const Complex want = unvec(v, 8, 8).trace() / rho.trace();
  CHECK(std::abs(propagate(spec, c, {}, t) - want) < 1e-10);
}

TEST_CASE("splitting a segment does not change the propagated state") {
  const auto spec = testing::random_spec(3, 2, 0.3);
  ClusterEvolution evo(spec, Cluster({0, 1, 2}));
  const double t = 2.3;
  const ComplexMatrix whole = evo.exponential(Branch::b01, t);
  const ComplexMatrix half = evo.exponential(Branch::b01, t / 2);
  CHECK(max_abs_diff(whole, ComplexMatrix(half * half)) < 1e-11);
  // coarse vs refined grid for the same final time
  const double coarse[] = {t};
  const double fine[] = {t / 2, t};
  const auto a = evo.coherence({}, coarse);
  const auto b = evo.coherence({}, fine);
  CHECK(std::abs(a[0] - b[1]) < 1e-11);
}

TEST_CASE("swapping the branch roles conjugates the coherence") {
  for (int p : {0, 1, 2}) {
    auto spec = testing::random_spec(3, 30 + p, 0.25, 0.1);
    auto flipped = spec;
    for (auto& s : flipped.bath) s.a = -s.a;  // H0 <-> H1
    const auto grid = uniform_grid(2.5, 11);
    const PulseSchedule sched{p, PulseTiming::cpmg, 0.0};
    const auto a = propagate_curve(spec, Cluster({0, 1, 2}), sched, grid);
    const auto b = propagate_curve(flipped, Cluster({0, 1, 2}), sched, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(a[k] - std::conj(b[k])) < 1e-12);
  }
}

TEST_CASE("coherence magnitude never exceeds one") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto spec = testing::random_spec(4, seed, 0.1 * seed, 0.05 * seed);
    const auto grid = uniform_grid(6.0, 61);
    for (int p : {0, 1, 2}) {
      for (const auto& v : propagate_curve(spec, Cluster({0, 1, 2, 3}), {p, PulseTiming::cpmg, 0.0}, grid)) {
        CHECK(std::abs(v) <= 1.0 + 1e-8);
      }
    }
  }
}

TEST_CASE("zero-trace initial state is rejected") {
  SystemSpec spec;
  spec.bath.push_back({0, std::nullopt, 1.0});
  spec.initial = BathState::from_matrices({SpinDensity::Zero()});
  CHECK_THROWS_WITH(propagate(spec, Cluster({0}), {}, 1.0), Catch::Matchers::ContainsSubstring("ill-posed"));
}

TEST_CASE("analytic single-spin coherence stays finite at large gamma t") {
  for (double t : {50.0, 400.0, 5000.0}) {
    const Complex l = single_spin_analytic(1.0, 5.0, t);
    CHECK(std::isfinite(l.real()));
    CHECK(l.real() > 0.0);
    CHECK(l.real() <= 1.0);
  }
  // slow decay rate (a^2 / 4) / (2 gamma) deep in the overdamped regime
  const double g = 50.0, w = std::sqrt(4 * g * g - 1.0);
  CHECK(single_spin_analytic(1.0, g, 1000.0).real() == Catch::Approx(0.5 * (1 + 2 * g / w) * std::exp((w / 2 - g) * 1000.0)).epsilon(1e-10));
}

TEST_CASE("analytic single-spin coherence limits") {
  const double a = 3.0;
  for (double t : {0.0, 0.4, 2.0, 9.0}) {
    CHECK(std::abs(single_spin_analytic(a, 0.0, t) - std::cos(a * t / 2)) < 1e-14);
    CHECK(std::abs(single_spin_analytic(0.0, 1.3, t) - 1.0) < 1e-13);
    // overdamped branch is strictly real
    CHECK(single_spin_analytic(a, 0.51 * a, t).imag() == 0.0);
    CHECK(single_spin_analytic(a, 5.0 * a, t).imag() == 0.0);
  }
  // critical damping: e^{-gamma t} (1 + gamma t), reached smoothly from both sides
  const double g = a / 2;
  for (double t : {0.5, 3.0}) {
    const double crit = std::exp(-g * t) * (1 + g * t);
    CHECK(std::abs(single_spin_analytic(a, g, t) - crit) < 1e-14);
    CHECK(std::abs(single_spin_analytic(a, g * (1 + 1e-9), t) - crit) < 1e-8);
    CHECK(std::abs(single_spin_analytic(a, g * (1 - 1e-9), t) - crit) < 1e-8);
  }
}
