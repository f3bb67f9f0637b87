#pragma once

// Built-in acceptance checks, shared by the test binary and `mecce verify`.
// Every check prints one deterministic result line; timings are reported
// separately.
//
// Expansion-versus-reference comparisons (checks 2, 6, 7, 9, 11) are made on
// the short-time window [0, T2_ref / 2] of the reference curve, or the whole
// grid when the reference never decays to 1/e.

#include "mecce/cce.hpp"
#include "mecce/exact.hpp"
#include "mecce/lindblad.hpp"
#include "mecce/spin_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mecce::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct Settings {
  std::size_t threads = 0;
  std::set<int> only;     // empty = all
  std::set<int> corrupt;  // checks whose tolerance is replaced by an unattainable one
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Largest |L| - 1 over every curve the suite produced.
struct PhysicalityLog {
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::string where = "none";
  std::size_t curves = 0;

  void observe(const std::string& tag, const std::vector<Complex>& values, std::size_t count) {
    ++curves;
    for (std::size_t k = 0; k < std::min(count, values.size()); ++k) {
      const double excess = std::abs(values[k]) - 1.0;
      if (excess > worst_excess) {
        worst_excess = excess;
        where = tag;
      }
    }
  }
  void observe(const std::string& tag, const CoherenceCurve& c, std::size_t count) { observe(tag, c.values, count); }
  void observe(const std::string& tag, const CoherenceCurve& c) { observe(tag, c.values, c.size()); }
};

/// Number of leading grid points inside [0, T2(ref) / 2].
inline std::size_t short_window(const CoherenceCurve& ref) {
  const auto t2 = extract_t2(ref);
  if (!t2) return ref.size();
  std::size_t n = 0;
  while (n < ref.size() && ref.t[n] <= 0.5 * *t2) ++n;
  return n;
}

inline double window_deviation(const CoherenceCurve& a, const CoherenceCurve& b, std::size_t count) {
  double worst = 0.0;
  for (std::size_t k = 0; k < std::min({count, a.size(), b.size()}); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
  return worst;
}

class Suite {
 public:
  explicit Suite(Settings s) : settings_(std::move(s)) {}

  std::vector<CheckResult> run(const std::function<void(const CheckResult&)>& on_result = {}) {
    struct Entry {
      int id;
      const char* name;
      double budget;
      CheckResult (Suite::*fn)(CheckResult);
    };
    const Entry entries[] = {
        {1, "analytic-equivalence", 5, &Suite::analytic_equivalence},
        {2, "oracle-equivalence-dissipative-chain", 600, &Suite::oracle_chain},
        {3, "dissipation-free-limit", 120, &Suite::dissipation_free},
        {4, "echo-refocusing", 5, &Suite::echo_refocusing},
        {5, "motional-narrowing", 5, &Suite::motional_narrowing},
        {6, "factorization-bound-lattice", 900, &Suite::factorization_bound},
        {7, "separable-regime", 600, &Suite::separable_regime},
        {8, "disjoint-exactness", 60, &Suite::disjoint_exactness},
        {9, "nv-surface-ordering", 1200, &Suite::nv_ordering},
        {10, "physicality", 120, &Suite::physicality},
        {11, "collective-dissipation", 300, &Suite::collective},
    };
    std::vector<CheckResult> out;
    for (const auto& e : entries) {
      if (!settings_.only.empty() && !settings_.only.count(e.id)) continue;
      CheckResult r;
      r.id = e.id;
      r.name = e.name;
      r.budget_seconds = e.budget;
      const auto start = std::chrono::steady_clock::now();
      try {
        r = (this->*e.fn)(r);
      } catch (const std::exception& ex) {
        r.passed = false;
        r.detail = std::string("error: ") + ex.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (r.seconds > r.budget_seconds) {
        r.passed = false;
        r.detail += "; over runtime budget";
      }
      if (on_result) on_result(r);
      out.push_back(r);
    }
    return out;
  }

  static std::string line(const CheckResult& r) {
    return std::string(r.passed ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.detail;
  }

 private:
  bool corrupted(int id) const { return settings_.corrupt.count(id) > 0; }
  // corrupted tolerances cannot be met by any absolute deviation
  double tol(int id, double nominal) const { return corrupted(id) ? -1.0 : nominal; }

  CceOptions options() const {
    CceOptions o;
    o.threads = settings_.threads;
    return o;
  }

  // 1 -----------------------------------------------------------------
  CheckResult analytic_equivalence(CheckResult r) {
    const double a = 1.0, limit = tol(1, 1e-9);
    double worst = 0.0;
    const auto grid = uniform_grid(10.0 / a, 1001);
    for (double ratio : {0.0, 0.1, 0.5, 1.0, 5.0}) {
      SystemSpec spec;
      spec.bath.push_back({0, std::nullopt, a});
      spec.initial = BathState::maximally_mixed(1);
      set_uniform_depolarization(spec, ratio * a);
      const auto curve = propagate_curve(spec, Cluster({0}), {}, grid);
      log_.observe("single spin gamma/a=" + fmt(ratio), curve, curve.size());
      for (std::size_t k = 0; k < grid.size(); ++k) {
        worst = std::max(worst, std::abs(curve[k] - single_spin_analytic(a, ratio * a, grid[k])));
      }
    }
    r.passed = worst < limit;
    r.detail = "max |dL| = " + fmt(worst) + " over gamma/a in {0,0.1,0.5,1,5} (tol " + fmt(limit) + ")";
    return r;
  }

  // 2 -----------------------------------------------------------------
  CheckResult oracle_chain(CheckResult r) {
    const double limit = tol(2, 1e-6);
    int monotone = 0;
    double worst_full = 0.0;
    std::string failing;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto spec = build_chain(8, 0.1 * kTwoPi, 2.0 * kTwoPi, seed);
      set_uniform_depolarization(spec, 0.01);
      spec.time_grid = uniform_grid(40.0, 201);
      const auto exact = exact_coherence(spec, {}, spec.time_grid);
      const auto curves = run_mecce_orders(spec, {1, 2, 3, 4, 5, 6, 7, 8}, {}, options());
      const std::size_t w = short_window(exact);
      log_.observe("chain exact seed " + std::to_string(seed), exact);
      bool ok = true;
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < 5; ++k) {
        log_.observe("chain mecce" + std::to_string(k + 1) + " seed " + std::to_string(seed), curves[k], w);
        const double dev = window_deviation(curves[k], exact, w);
        if (dev > prev) ok = false;
        prev = dev;
      }
      if (ok) {
        ++monotone;
      } else {
        failing += (failing.empty() ? "" : ",") + std::to_string(seed);
      }
      worst_full = std::max(worst_full, max_deviation(curves[7], exact));
    }
    r.passed = monotone >= 9 && worst_full < limit;
    r.detail = "deviation nonincreasing over k=1..5 for " + std::to_string(monotone) + "/10 seeds (need 9" +
               (failing.empty() ? "" : "; failing seeds " + failing) + "), k=8 vs oracle " + fmt(worst_full) +
               " (tol " + fmt(limit) + ")";
    return r;
  }

  // 3 -----------------------------------------------------------------
  CheckResult dissipation_free(CheckResult r) {
    const double limit = tol(3, 1e-10);
    auto spec = build_chain(8, 0.1 * kTwoPi, 2.0 * kTwoPi, 1);
    spec.time_grid = uniform_grid(40.0, 101);
    auto unitary = options();
    unitary.solver = Solver::unitary;
    const std::vector<std::size_t> orders{1, 2, 3, 4, 5, 6, 7, 8};
    double worst = 0.0;
    for (int p : {0, 1}) {
      const PulseSchedule s{p, PulseTiming::cpmg, 0.0};
      const auto me = run_mecce_orders(spec, orders, s, options());
      const auto u = run_mecce_orders(spec, orders, s, unitary);
      for (std::size_t k = 0; k < orders.size(); ++k) worst = std::max(worst, max_deviation(me[k], u[k]));
    }
    r.passed = worst < limit;
    r.detail = "max |L_ME - L_unitary| = " + fmt(worst) + " over orders 1..8, p in {0,1} (tol " + fmt(limit) + ")";
    return r;
  }

  // 4 -----------------------------------------------------------------
  CheckResult echo_refocusing(CheckResult r) {
    const double limit = tol(4, 1e-10);
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kTwoPi);
    SystemSpec spec;
    for (int i = 0; i < 6; ++i) spec.bath.push_back({i, std::nullopt, u(rng)});
    spec.initial = BathState::random_product(6, 405);
    spec.time_grid = uniform_grid(20.0, 201);
    const PulseSchedule echo{1, PulseTiming::cpmg, 0.0};
    const auto cce = run_mecce(spec, 1, echo, options());
    const auto exact = exact_coherence(spec, echo, spec.time_grid);
    log_.observe("echo cce1", cce);
    log_.observe("echo exact", exact);
    double worst = 0.0;
    for (std::size_t k = 0; k < cce.size(); ++k) {
      worst = std::max({worst, std::abs(cce.values[k] - 1.0), std::abs(exact.values[k] - 1.0)});
    }
    r.passed = worst < limit;
    r.detail = "max |L - 1| = " + fmt(worst) + " (expansion and oracle, tol " + fmt(limit) + ")";
    return r;
  }

  // 5 -----------------------------------------------------------------
  CheckResult motional_narrowing(CheckResult r) {
    const double a = 1.0;
    const double margin = corrupted(5) ? std::numeric_limits<double>::infinity() : 0.0;
    const auto t2 = [&](double gamma) {
      CoherenceCurve c;
      c.t = uniform_grid(200.0 / a, 200001);
      for (double t : c.t) c.values.push_back(single_spin_analytic(a, gamma, t));
      log_.observe("analytic gamma/a=" + fmt(gamma / a), c);
      return extract_t2(c);
    };
    const auto low = t2(0.01 * a), mid = t2(a), high = t2(5.0 * a);
    if (!low || !mid || !high) {
      r.passed = false;
      r.detail = "a curve never reached 1/e on the grid";
      return r;
    }
    const bool rises = *high - *mid > margin;
    const bool falls = *low - *mid > margin;
    r.passed = rises && falls;
    r.detail = "T2*a at gamma/a = 0.01, 1, 5: " + fmt(*low * a) + ", " + fmt(*mid * a) + ", " + fmt(*high * a) +
               "; T2(5a) > T2(a): " + (rises ? "yes" : "no") + ", T2(0.01a) > T2(a): " + (falls ? "yes" : "no");
    return r;
  }

  // 6 -----------------------------------------------------------------
  CheckResult factorization_bound(CheckResult r) {
    const double floor = corrupted(6) ? std::numeric_limits<double>::infinity() : -1e-6;
    double lowest = std::numeric_limits<double>::infinity();
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto spec = build_lattice2d(6, 4.0 * kTwoPi, 2.0 * kTwoPi, seed);
      set_uniform_depolarization(spec, 0.5 * 2.0 * kTwoPi);
      spec.time_grid = uniform_grid(0.4, 401);
      const auto d = factorization_diagnostic(spec, {1, PulseTiming::cpmg, 0.0}, options());
      const std::size_t w = short_window(d.full);
      log_.observe("lattice mecce4 seed " + std::to_string(seed), d.full, w);
      log_.observe("lattice mecce1 seed " + std::to_string(seed), d.incoherent, w);
      double seed_low = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < w; ++k) seed_low = std::min(seed_low, d.delta.values[k].real());
      lowest = std::min(lowest, seed_low);
      if (seed_low >= floor) ++ok;
    }
    r.passed = ok == 5;
    r.detail = "min Re dL = " + fmt(lowest) + " over 5 seeds, " + std::to_string(ok) + "/5 above " + fmt(floor);
    return r;
  }

  // 7 -----------------------------------------------------------------
  CheckResult separable_regime(CheckResult r) {
    const double limit = tol(7, 0.02);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto spec = build_chain(8, 0.1 * kTwoPi, 2.0 * kTwoPi, seed);
      set_uniform_depolarization(spec, 0.01);
      spec.time_grid = uniform_grid(40.0, 201);
      const auto d = factorization_diagnostic(spec, {1, PulseTiming::cpmg, 0.0}, options());
      const std::size_t w = short_window(d.full);
      log_.observe("chain echo mecce4 seed " + std::to_string(seed), d.full, w);
      for (std::size_t k = 0; k < w; ++k) worst = std::max(worst, std::abs(d.delta.values[k]));
    }
    r.passed = worst < limit;
    r.detail = "max |dL| = " + fmt(worst) + " over 5 seeds (tol " + fmt(limit) + ")";
    return r;
  }

  // 8 -----------------------------------------------------------------
  CheckResult disjoint_exactness(CheckResult r) {
    const double limit = tol(8, 1e-8);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      std::mt19937_64 rng(800 + seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      SystemSpec spec;
      for (int i = 0; i < 6; ++i) spec.bath.push_back({i, std::nullopt, 2.0 * kTwoPi * u(rng)});
      for (int p = 0; p < 3; ++p) spec.graph.add(2 * p, 2 * p + 1, 4.0 * kTwoPi * u(rng));
      spec.initial = BathState::random_product(6, 900 + seed);
      set_uniform_depolarization(spec, 0.5);
      spec.time_grid = uniform_grid(5.0, 101);
      for (int p : {0, 1, 2}) {
        const PulseSchedule s{p, PulseTiming::cpmg, 0.0};
        const auto cce = run_mecce(spec, 2, s, options());
        const auto exact = exact_coherence(spec, s, spec.time_grid);
        log_.observe("pairs cce2", cce);
        log_.observe("pairs exact", exact);
        worst = std::max(worst, max_deviation(cce, exact));
      }
    }
    r.passed = worst < limit;
    r.detail = "max |L_CCE2 - L_exact| = " + fmt(worst) + " over 3 baths, p in {0,1,2} (tol " + fmt(limit) + ")";
    return r;
  }

  // 9 -----------------------------------------------------------------
  CheckResult nv_ordering(CheckResult r) {
    const double slack = tol(9, 1e-6);
    const double order_limit = tol(9, 0.02);
    int ordered = 0;
    double worst_order = 0.0, worst_excess = -std::numeric_limits<double>::infinity();
    std::string t2s;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      NvSurfaceParams p;
      p.seed = seed;
      auto spec = build_nv_surface(p);
      spec.time_grid = uniform_grid(400.0, 401);
      const PulseSchedule echo{1, PulseTiming::cpmg, 0.0};
      const auto me = run_mecce_orders(spec, {2, 3}, echo, options());
      const auto cce = run_mecce(without_dissipation(spec), 2, echo, options());
      const std::size_t w = short_window(me[0]);
      log_.observe("nv mecce2 seed " + std::to_string(seed), me[0], w);
      log_.observe("nv mecce3 seed " + std::to_string(seed), me[1], w);
      log_.observe("nv cce2 seed " + std::to_string(seed), cce, w);
      double excess = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < w; ++k) excess = std::max(excess, me[0].values[k].real() - cce.values[k].real());
      worst_excess = std::max(worst_excess, excess);
      worst_order = std::max(worst_order, window_deviation(me[0], me[1], w));
      const auto t_me = extract_t2(me[0]), t_cce = extract_t2(cce);
      const double a = t_me ? *t_me : std::numeric_limits<double>::infinity();
      const double b = t_cce ? *t_cce : std::numeric_limits<double>::infinity();
      if (excess <= slack && a < b) ++ordered;
      t2s += (t2s.empty() ? "" : " ") + (t_me ? fmt(a) : std::string("none")) + "/" + (t_cce ? fmt(b) : std::string("none"));
    }
    r.passed = ordered >= 8 && worst_order < order_limit;
    r.detail = "ME<=CCE and T2(ME)<T2(CCE) for " + std::to_string(ordered) + "/10 seeds (need 8); max Re(L_ME - L_CCE) = " +
               fmt(worst_excess) + " (slack " + fmt(slack) + "); orders 2 vs 3 max dev " + fmt(worst_order) + " (tol " +
               fmt(order_limit) + "); T2 ME/CCE [us]: " + t2s;
    return r;
  }

  // 10 ----------------------------------------------------------------
  CheckResult physicality(CheckResult r) {
    const double bound = tol(10, 1e-8);
    const double trace_limit = tol(10, 1e-10);
    double trace_err = 0.0, min_eig = std::numeric_limits<double>::infinity(), cross = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const std::size_t n = 2 + (seed % 5);
      auto spec = build_chain(n, 0.5 * kTwoPi, 2.0 * kTwoPi, 1000 + seed);
      spec.initial = BathState::random_product(n, 2000 + seed);
      set_uniform_depolarization(spec, 0.2 * seed);
      add_edge_exchange(spec, 0.1);
      const auto grid = uniform_grid(3.0, 7);
      for (int p : {0, 1, 2}) {
        const PulseSchedule s{p, PulseTiming::cpmg, 0.0};
        const auto rep = exact_unprojected(spec, s, grid);
        const auto proj = exact_coherence(spec, s, grid);
        log_.observe("unprojected", rep.coherence, rep.coherence.size());
        trace_err = std::max(trace_err, rep.worst_trace_error());
        min_eig = std::min(min_eig, rep.lowest_eigenvalue());
        for (std::size_t k = 0; k < grid.size(); ++k) cross = std::max(cross, std::abs(rep.coherence[k] - proj.values[k]));
      }
    }
    const bool ok_bound = log_.worst_excess <= bound;
    const bool ok_trace = trace_err <= trace_limit && min_eig >= -trace_limit;
    r.passed = ok_bound && ok_trace;
    r.detail = "max |L| - 1 = " + fmt(log_.worst_excess) + " over " + std::to_string(log_.curves) + " curves (bound " +
               fmt(bound) + ", worst: " + log_.where + "); |Tr rho - 1| = " + fmt(trace_err) + ", min eig = " +
               fmt(min_eig) + " (tol " + fmt(trace_limit) + "); unprojected vs projected " + fmt(cross);
    return r;
  }

  // 11 ----------------------------------------------------------------
  CheckResult collective(CheckResult r) {
    const double liouville_limit = tol(11, 1e-12);
    const double limit = tol(11, 0.02);

    // two spins, exchange channels only, against an entrywise-built superoperator
    SystemSpec pair;
    pair.bath = {{0, std::nullopt, 1.3}, {1, std::nullopt, -0.4}};
    pair.graph.add(0, 1, 0.7);
    pair.initial = BathState::random_product(2, 3);
    add_edge_exchange(pair, 0.35);
    const auto gen = build_generator(project_hamiltonians(pair, Cluster({0, 1})), dense_jumps(pair, Cluster({0, 1})));
    const ComplexMatrix want = hand_pair_liouvillian(1.3, -0.4, 0.7, 0.35);
    const double liouville = (gen.g01 - want).cwiseAbs().maxCoeff();

    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto spec = build_chain(6, 0.1 * kTwoPi, 2.0 * kTwoPi, seed);
      add_edge_exchange(spec, 0.01);
      spec.time_grid = uniform_grid(40.0, 201);
      const auto exact = exact_coherence(spec, {}, spec.time_grid);
      const auto cce = run_mecce(spec, 4, {}, options());
      const std::size_t w = short_window(exact);
      log_.observe("exchange chain exact", exact);
      log_.observe("exchange chain mecce4", cce, w);
      worst = std::max(worst, window_deviation(cce, exact, w));
    }
    r.passed = liouville < liouville_limit && worst < limit;
    r.detail = "n=2 Liouvillian max diff " + fmt(liouville) + " (tol " + fmt(liouville_limit) + "); n=6 chain MECCE4 vs oracle " +
               fmt(worst) + " over 5 seeds (tol " + fmt(limit) + ")";
    return r;
  }

  // basis |uu>, |ud>, |du>, |dd>; vec index r + 4 c
  static ComplexMatrix hand_pair_liouvillian(double a0, double a1, double j, double rate) {
    ComplexMatrix h0 = ComplexMatrix::Zero(4, 4), h1 = h0, up = h0, down = h0;
    for (int b = 0; b < 2; ++b) {
      const double s = b == 0 ? 1.0 : -1.0;
      ComplexMatrix& h = b == 0 ? h0 : h1;
      h(0, 0) = s * (a0 + a1) / 4 - j / 2;
      h(1, 1) = s * (a0 - a1) / 4 + j / 2;
      h(2, 2) = s * (a1 - a0) / 4 + j / 2;
      h(3, 3) = -s * (a0 + a1) / 4 - j / 2;
      h(1, 2) = h(2, 1) = j / 2;
    }
    up(2, 1) = 1.0;
    down(1, 2) = 1.0;
    ComplexMatrix g = ComplexMatrix::Zero(16, 16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        for (int k = 0; k < 4; ++k) {
          g(r + 4 * c, k + 4 * c) += -kI * h0(r, k);
          g(r + 4 * c, r + 4 * k) += kI * h1(k, c);
        }
    for (const ComplexMatrix* l : {&up, &down}) {
      const ComplexMatrix kk = l->adjoint() * *l;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
              g(r + 4 * c, p + 4 * q) += rate * (*l)(r, p) * std::conj((*l)(c, q));
              if (q == c) g(r + 4 * c, p + 4 * q) -= 0.5 * rate * kk(r, p);
              if (p == r) g(r + 4 * c, p + 4 * q) -= 0.5 * rate * kk(q, c);
            }
    }
    return g;
  }

  Settings settings_;
  PhysicalityLog log_;
};

}  // namespace mecce::acceptance
