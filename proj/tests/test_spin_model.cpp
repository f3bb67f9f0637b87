#include <catch2/catch_amalgamated.hpp>

#include "mecce/spin_model.hpp"

#include <cmath>

using namespace mecce;

TEST_CASE("cpmg and equidistant pulse times") {
  const auto cpmg = pulse_times({2, PulseTiming::cpmg, 8.0});
  REQUIRE(cpmg.size() == 2);
  CHECK(cpmg[0] == 2.0);
  CHECK(cpmg[1] == 6.0);
  const auto eq = pulse_times({3, PulseTiming::equidistant, 8.0});
  REQUIRE(eq.size() == 3);
  CHECK(eq[0] == 2.0);
  CHECK(eq[2] == 6.0);
  CHECK(pulse_times({1, PulseTiming::cpmg, 5.0}) == std::vector<double>{2.5});
  CHECK(pulse_times({0, PulseTiming::cpmg, 5.0}).empty());
  CHECK_THROWS_AS(pulse_times({-1, PulseTiming::cpmg, 5.0}), SpecError);
}

TEST_CASE("coupling graph rejects self edges, duplicates and non-finite J") {
  CouplingGraph g;
  g.add(0, 1, 0.5);
  CHECK_THROWS_AS(g.add(1, 0, 0.2), SpecError);
  CHECK_THROWS_AS(g.add(2, 2, 0.2), SpecError);
  CHECK_THROWS_AS(g.add(2, 3, std::nan("")), SpecError);
  CHECK(g.size() == 1);
  CHECK(g.scaled(2.0).edges()[0].J == 1.0);
}

TEST_CASE("neel state alternates starting with spin up") {
  const auto s = BathState::neel(5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.spins[i](0, 0) == Complex(i % 2 == 0 ? 1.0 : 0.0));
    CHECK(s.spins[i].trace() == Complex(1.0));
  }
}

TEST_CASE("random product states are valid and reproducible") {
  for (bool pure : {true, false}) {
    const auto a = BathState::random_product(20, 42, pure);
    const auto b = BathState::random_product(20, 42, pure);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK_NOTHROW(validate_density(a.spins[i], i));
      CHECK(a.spins[i] == b.spins[i]);
      // pure: rho^2 = rho
      CHECK((a.spins[i] * a.spins[i] - a.spins[i]).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  CHECK(BathState::random_product(3, 1).spins[0] != BathState::random_product(3, 2).spins[0]);
}

TEST_CASE("invalid densities are rejected") {
  SpinDensity rho;
  rho << 1.2, 0.0, 0.0, -0.2;
  CHECK_THROWS_AS(validate_density(rho, 0), SpecError);
  rho << 0.5, 0.3, 0.1, 0.5;
  CHECK_THROWS_AS(validate_density(rho, 0), SpecError);
  rho << 0.5, 0.0, 0.0, 0.4;
  CHECK_THROWS_AS(validate_density(rho, 0), SpecError);
}

TEST_CASE("chain builder draws within range and is seeded") {
  const auto a = build_chain(12, 0.1 * kTwoPi, 2.0 * kTwoPi, 3);
  const auto b = build_chain(12, 0.1 * kTwoPi, 2.0 * kTwoPi, 3);
  REQUIRE(a.bath.size() == 12);
  REQUIRE(a.graph.size() == 11);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.bath[i].a >= 0.0);
    CHECK(a.bath[i].a <= 2.0 * kTwoPi);
    CHECK(a.bath[i].a == b.bath[i].a);
  }
  for (const auto& e : a.graph.edges()) {
    CHECK(e.j == e.i + 1);
    CHECK(e.J >= 0.0);
    CHECK(e.J <= 0.1 * kTwoPi);
  }
  CHECK(a.jumps.empty());
  CHECK(a.initial.kind == BathStateKind::neel);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("lattice edge counts") {
  CHECK(build_lattice2d(6, 1.0, 1.0, 1).graph.size() == 2 * 6 * 5);
  CHECK(build_lattice2d(6, 1.0, 1.0, 1, true).graph.size() == 2 * 36);
  // periodic 2x2 wraps onto existing bonds
  CHECK(build_lattice2d(2, 1.0, 1.0, 1, true).graph.size() == 4);
  CHECK(build_lattice2d(1, 1.0, 1.0, 1, true).graph.size() == 0);
}

TEST_CASE("depolarization and exchange channels") {
  auto spec = build_chain(4, 1.0, 1.0, 1);
  set_uniform_depolarization(spec, 0.25);
  CHECK(spec.jumps.size() == 8);
  add_edge_exchange(spec, 0.1);
  CHECK(spec.jumps.size() == 8 + 6);
  set_uniform_depolarization(spec, 0.5);  // replaces single-spin channels only
  CHECK(spec.jumps.size() == 14);
  CHECK(without_dissipation(spec).jumps.empty());
  CHECK_NOTHROW(spec.validate());
  spec.jumps.push_back({JumpKind::exchange_up, {1, 1}, 0.1});
  CHECK_THROWS_AS(spec.validate(), SpecError);
}

TEST_CASE("spec validation catches structural errors") {
  auto spec = build_chain(3, 1.0, 1.0, 1);
  spec.time_grid = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec.time_grid = {0.0, 1.0};
  spec.initial = BathState::maximally_mixed(2);
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec.initial = BathState::maximally_mixed(3);
  spec.jumps.push_back({JumpKind::lower, {5}, 0.1});
  CHECK_THROWS_AS(spec.validate(), SpecError);
}

TEST_CASE("electron dipolar constant is 2 pi x 52.04 MHz nm^3") {
  CHECK(electron_dipolar_constant() / kTwoPi == Catch::Approx(52.04).epsilon(1e-3));
}

TEST_CASE("secular dipolar angular factor") {
  const Vec3 z{0.0, 0.0, 1.0};
  CHECK(secular_dipolar({0.0, 0.0, 2.0}, z, 8.0) == Catch::Approx(-2.0));
  CHECK(secular_dipolar({2.0, 0.0, 0.0}, z, 8.0) == Catch::Approx(1.0));
  // magic angle
  const double s = std::sqrt(2.0);
  CHECK(std::abs(secular_dipolar({s, 0.0, 1.0}, z, 1.0)) < 1e-15);
  CHECK_THROWS_AS(secular_dipolar({0.0, 0.0, 0.0}, z, 1.0), SpecError);
}

TEST_CASE("nv surface patch") {
  NvSurfaceParams p;
  p.seed = 5;
  const auto spec = build_nv_surface(p);
  CHECK_NOTHROW(spec.validate());
  // Poisson mean 40; a 6-sigma window
  CHECK(spec.bath.size() > 2);
  CHECK(spec.bath.size() < 80);
  CHECK(spec.graph.size() == spec.bath.size() * (spec.bath.size() - 1) / 2);
  for (const auto& j : spec.jumps) CHECK(j.rate == Catch::Approx(1.0 / 200.0));
  // a_i from the stored positions
  for (const auto& s : spec.bath) {
    const auto& r = *s.position;
    CHECK(r[2] == 0.0);
    const double d = std::sqrt(r[0] * r[0] + r[1] * r[1] + 100.0);
    const double c = (r[0] + r[1] + 10.0) / std::sqrt(3.0) / d;
    CHECK(s.a == Catch::Approx(electron_dipolar_constant() * (1 - 3 * c * c) / (d * d * d)).epsilon(1e-12));
  }

  NvSurfaceParams tiny = p;
  tiny.density_per_nm2 = 1e-9;
  const auto empty = build_nv_surface(tiny);
  CHECK(empty.bath.empty());
  CHECK_FALSE(empty.warnings.empty());
  tiny.depth_nm = -1.0;
  CHECK_THROWS_AS(build_nv_surface(tiny), SpecError);
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(2.0, 5);
  CHECK(g == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  CHECK_THROWS_AS(uniform_grid(2.0, 1), SpecError);
}
