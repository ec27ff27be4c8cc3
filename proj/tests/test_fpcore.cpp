#include <doctest.h>

#include <cmath>

#include "mectune/fpcore.hpp"
#include "mectune/scenario_io.hpp"
#include "support/oracles.hpp"

using namespace mectune;

namespace {

Scenario small(std::uint64_t seed, std::size_t N = 5, std::size_t M = 3) {
  GenParams gp;
  gp.N = N;
  gp.M = M;
  gp.seed = seed;
  return generate(gp);
}

double& component(GradientBundle& g, const std::string& name, std::size_t n, std::size_t m) {
  if (name == "alpha") return g.alpha[n];
  if (name == "power") return g.power[n];
  if (name == "freq_user") return g.freq_user[n];
  if (name == "bandwidth") return g.bandwidth(n, m);
  return g.freq_edge(n, m);
}

}  // namespace

TEST_CASE("rate derivatives") {
  const double g = 1e-10, p = 1.3, b = 4e6, noise = 4e-17;
  const auto lr = link_rate(g, p, b, noise);
  CHECK(lr.rate == doctest::Approx(uplink_rate(g, p, b, noise)).epsilon(1e-14));
  auto in_p = [&](double x) { return uplink_rate(g, x, b, noise); };
  auto in_b = [&](double x) { return uplink_rate(g, p, x, noise); };
  CHECK(lr.d_power == doctest::Approx(oracle::derivative(in_p, p, 1e-3 * p)).epsilon(1e-8));
  CHECK(lr.d_bandwidth == doctest::Approx(oracle::derivative(in_b, b, 1e-3 * b)).epsilon(1e-8));
  // Rate is concave increasing in both.
  CHECK(lr.d_power > 0.0);
  CHECK(lr.d_bandwidth > 0.0);
  CHECK(link_rate(g, p, 2 * b, noise).d_bandwidth < lr.d_bandwidth);
}

TEST_CASE("surrogate equals the objective at the optimal auxiliaries") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto s = small(seed);
    Rng rng(seed, 11);
    const auto d = oracle::random_interior(s, rng);
    const double H = evaluate_objective(s, d).H;
    CHECK(std::abs(surrogate_K(s, d, aux_optimal(s, d)) - H) <= 1e-9 * (1.0 + std::abs(H)));
  }
}

TEST_CASE("surrogate majorizes the objective for any positive auxiliaries") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto s = small(seed);
    Rng rng(seed, 12);
    const auto d = oracle::random_interior(s, rng);
    auto aux = aux_optimal(s, d);
    for (auto& z : aux.z) z *= rng.uniform(0.1, 10.0);
    for (auto& v : aux.nu.values()) v *= rng.uniform(0.1, 10.0);
    for (auto& v : aux.q.values()) v *= rng.uniform(0.1, 10.0);
    const double H = evaluate_objective(s, d).H;
    CHECK(surrogate_K(s, d, aux) >= H * (1.0 - 1e-12));
  }
}

TEST_CASE("zero-numerator terms are skipped") {
  auto s = with_weights(small(1, 2, 2), 0.0, 1.0, 1.0);
  for (auto& e : s.servers) e.kappa = 0.0;  // B = 0 on every link
  Rng rng(1);
  const auto d = oracle::random_interior(s, rng);
  const auto aux = aux_optimal(s, d);
  for (double q : aux.q.values()) CHECK(q == 0.0);
  const double H = evaluate_objective(s, d).H;
  CHECK(surrogate_K(s, d, aux) == doctest::Approx(H).epsilon(1e-12));
}

TEST_CASE("analytic gradients agree with finite differences") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = small(seed, 3, 2);
    Rng rng(seed, 13);
    auto d = oracle::random_interior(s, rng);
    const double H0 = evaluate_objective(s, d).H;
    auto gH = grad_H(s, d);
    const auto aux = aux_optimal(s, d);
    auto gK = grad_K(s, d, aux);
    oracle::for_each_coordinate(d, [&](const char* name, std::size_t n, std::size_t m, double& x) {
      const double x0 = x;
      auto H_at = [&](double v) {
        x = v;
        const long double r = oracle::objective(s, d).H;
        x = x0;
        return r;
      };
      auto K_at = [&](double v) {
        x = v;
        const long double r = oracle::surrogate(s, d, aux);
        x = x0;
        return r;
      };
      const double h = 1e-4 * std::abs(x0);
      const double fdH = oracle::derivative(H_at, x0, h);
      const double fdK = oracle::derivative(K_at, x0, h);
      const double floor = 1e-8 * (1.0 + std::abs(H0)) / std::abs(x0);
      const double aH = component(gH, name, n, m), aK = component(gK, name, n, m);
      CHECK_MESSAGE(std::abs(aH - fdH) <= 1e-5 * std::max({std::abs(fdH), std::abs(aH), floor}), name);
      CHECK_MESSAGE(std::abs(aK - fdK) <= 1e-5 * std::max({std::abs(fdK), std::abs(aK), floor}), name);
      // At the optimal auxiliaries the two gradients coincide.
      CHECK_MESSAGE(std::abs(aK - aH) <= 1e-8 * std::max({std::abs(aH), floor}), name);
      ++checked;
    });
  }
  CHECK(checked == 10 * 3 * (3 + 2 * 2));
}

TEST_CASE("per-layer cost derivatives") {
  const auto s = small(2, 2, 2);
  const auto& u = s.users[0];
  const double wt = 0.7, we = 1e3;
  const double f = 0.6 * u.f_max;
  auto A = [&](double x) { return local_cost_per_layer(u, x, s.llm, wt, we); };
  CHECK(local_cost_per_layer_deriv(u, f, s.llm, wt, we) ==
        doctest::Approx(oracle::derivative(A, f, 1e-3 * f)).epsilon(1e-8));
  const auto& e = s.servers[1];
  const double fe = 0.3 * e.f_max;
  auto B = [&](double x) { return edge_cost_per_layer(e, x, u.tokens, s.llm, wt, we); };
  CHECK(edge_cost_per_layer_deriv(e, fe, u.tokens, s.llm, wt, we) ==
        doctest::Approx(oracle::derivative(B, fe, 1e-3 * fe)).epsilon(1e-8));
  auto S = [&](double a) { return stability_term(s, 0, a); };
  CHECK(stability_term_deriv(s, 0, 10.0) == doctest::Approx(oracle::derivative(S, 10.0, 1e-2)).epsilon(1e-8));
}
