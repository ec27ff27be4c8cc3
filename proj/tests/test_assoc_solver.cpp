#include <doctest.h>

#include <cmath>

#include "mectune/assoc_solver.hpp"
#include "mectune/inner_solver.hpp"
#include "mectune/orchestrator.hpp"
#include "mectune/scenario_io.hpp"
#include "support/oracles.hpp"

using namespace mectune;

namespace {

Scenario small(std::uint64_t seed, std::size_t N, std::size_t M) {
  GenParams gp;
  gp.N = N;
  gp.M = M;
  gp.seed = seed;
  return generate(gp);
}

AssocLp staged_lp(const Scenario& s) {
  const auto d = prospective_decision(s, default_initial_decision(s, greedy_association(s)));
  return make_assoc_lp(s, d, assoc_linear_costs(s, d));
}

double row_sum(const Matrix& chi, std::size_t n) {
  double t = 0.0;
  for (double v : chi.row(n)) t += v;
  return t;
}

}  // namespace

TEST_CASE("penalty linearization is a global under-estimator") {
  Rng rng(1);
  Matrix prev(3, 3), chi(3, 3);
  for (auto& v : prev.values()) v = rng.uniform();
  const auto lin = linearize_penalty(prev);
  double at_prev = 0.0;
  for (double v : prev.values()) at_prev += v * (v - 1.0);
  CHECK(lin.value(prev) == doctest::Approx(at_prev));
  for (int t = 0; t < 100; ++t) {
    for (auto& v : chi.values()) v = rng.uniform();
    double exact = 0.0;
    for (double v : chi.values()) exact += v * (v - 1.0);
    CHECK(lin.value(chi) <= exact + 1e-12);
  }
}

TEST_CASE("binarity gap") {
  Matrix chi(2, 2);
  chi(0, 0) = 1.0;
  chi(1, 0) = 0.5;
  chi(1, 1) = 0.5;
  CHECK(binarity_gap(chi) == doctest::Approx(0.25));
  chi(1, 0) = 1.0;
  chi(1, 1) = 0.0;
  CHECK(binarity_gap(chi) == 0.0);
}

TEST_CASE("linear costs match the objective difference") {
  const auto s = small(2, 4, 2);
  const auto d = prospective_decision(s, default_initial_decision(s, greedy_association(s)));
  const auto c = assoc_linear_costs(s, d);
  // G(chi) plus the chi-independent part reproduces H for any binary chi.
  auto d2 = d;
  const double base = evaluate_objective(s, d).H - assoc_cost(c, d.assoc);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t k = 0; k < 2; ++k) d2.assoc(n, k) = k == m ? 1.0 : 0.0;
      CHECK(evaluate_objective(s, d2).H == doctest::Approx(base + assoc_cost(c, d2.assoc)).epsilon(1e-12));
      d2.assoc = d.assoc;
    }
}

TEST_CASE("LP relaxation is row-stochastic and capacity feasible") {
  const auto s = small(3, 12, 3);
  const auto lp = staged_lp(s);
  const auto chi = solve_lp(lp);
  for (std::size_t n = 0; n < 12; ++n) CHECK(row_sum(chi, n) == doctest::Approx(1.0));
  CHECK(capacities_hold(lp, chi));
  // No rounding can beat the relaxation.
  CHECK(assoc_cost(lp.cost, chi) <= assoc_cost(lp.cost, greedy_association(s)) + 1e-9);
}

TEST_CASE("CCCP returns a binary feasible assignment") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = small(seed, 20, 4);
    const auto lp = staged_lp(s);
    PenaltyConfig cfg;
    const auto res = cccp_associate(lp, random_feasible_start(lp, seed, 1), cfg);
    CHECK(res.binary);
    CHECK(res.capacity_ok);
    CHECK(binarity_gap(res.assoc) <= 1e-6);
    CHECK(res.iterations <= 30);
    for (std::size_t n = 0; n < 20; ++n) CHECK(row_sum(res.assoc, n) == 1.0);
    // Penalized objective is non-increasing at constant rho.
    const auto& t = res.trace;
    for (std::size_t i = 1; i < t.penalized.size(); ++i)
      if (t.rho[i] == t.rho[i - 1]) CHECK(t.penalized[i] <= t.penalized[i - 1] + 1e-9 * std::abs(t.penalized[i - 1]));
  }
}

TEST_CASE("random starts satisfy the constraints and are reproducible") {
  const auto s = small(4, 10, 3);
  const auto lp = staged_lp(s);
  for (std::uint64_t r = 0; r < 5; ++r) {
    const auto chi = random_feasible_start(lp, 9, r);
    CHECK(capacities_hold(lp, chi));
    for (std::size_t n = 0; n < 10; ++n) CHECK(row_sum(chi, n) == doctest::Approx(1.0));
    CHECK(chi == random_feasible_start(lp, 9, r));
  }
  CHECK(random_feasible_start(lp, 9, 0) == solve_lp(lp));
}

TEST_CASE("multistart matches exhaustive search on small instances") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = small(seed, 6, 2);
    const auto lp = staged_lp(s);
    PenaltyConfig cfg;
    cfg.restarts = 10;
    cfg.rng_seed = seed;
    const auto ms = multistart_associate(lp, cfg);
    CHECK(ms.objectives.size() == 10);
    const double best = oracle::exhaustive_assignment(lp.cost, lp.bandwidth, lp.freq, lp.b_cap, lp.f_cap);
    CHECK(ms.best.objective >= best - 1e-9 * std::abs(best));
    if (ms.best.objective <= best + 1e-9 * std::abs(best)) ++hits;
  }
  CHECK(hits >= 8);
}

TEST_CASE("greedy and random associations are one-hot") {
  const auto s = small(5, 15, 4);
  Rng rng(5);
  for (const auto& chi : {greedy_association(s), random_association(s, rng)})
    for (std::size_t n = 0; n < 15; ++n) {
      int ones = 0;
      for (double v : chi.row(n)) {
        CHECK((v == 0.0 || v == 1.0));
        ones += v == 1.0;
      }
      CHECK(ones == 1);
    }
}

TEST_CASE("penalty config validation") {
  PenaltyConfig cfg;
  cfg.rho_growth = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
