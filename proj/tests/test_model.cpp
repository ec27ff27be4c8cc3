#include <doctest.h>

#include <cmath>

#include "mectune/model.hpp"
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

}  // namespace

TEST_CASE("flop count per layer") {
  LlmConfig llm;  // B = 512, h = 1024
  // 72*2^9*2^9*2^20 = 72*2^38 and 12*2^9*2^18*2^10 = 6*2^38, total 78*2^38.
  CHECK(flops_per_layer_exact(512, llm) == static_cast<unsigned __int128>(78) << 38);
  CHECK(flops_per_layer(512, llm) == std::ldexp(78.0, 38));
  CHECK_THROWS_AS(flops_per_layer_exact(0, llm), DomainError);

  // Large counts stay exact in 128 bits.
  LlmConfig big{32, 1 << 20, 1 << 20, 1.0};
  const auto v = flops_per_layer_exact(std::int64_t{1} << 30, big);
  const unsigned __int128 expect = (static_cast<unsigned __int128>(72) << 90) + (static_cast<unsigned __int128>(12) << 100);
  CHECK(v == expect);
}

TEST_CASE("layer costs") {
  LlmConfig llm{32, 1, 1, 1.0};
  UserDevice u;
  u.tokens = 1;  // psi = 72 + 12 = 84
  u.cores = 2;
  u.flops_per_cycle = 3;
  u.kappa = 0.5;
  const auto c = local_layer_cost(u, 7.0, llm);
  CHECK(c.delay == doctest::Approx(84.0 / 42.0));
  CHECK(c.energy == doctest::Approx(0.5 * 49.0 * 84.0 / 6.0));
  CHECK_THROWS_AS(local_layer_cost(u, 0.0, llm), DomainError);
  EdgeServer e;
  e.cores = 4;
  e.flops_per_cycle = 1;
  e.kappa = 1e-3;
  const auto ec = edge_layer_cost(e, 2.0, 1, llm);
  CHECK(ec.delay == doctest::Approx(84.0 / 8.0));
  CHECK(ec.energy == doctest::Approx(1e-3 * 4.0 * 84.0 / 4.0));
}

TEST_CASE("uplink rate and energy") {
  // snr = g p / (sigma^2 b) = 1 gives r = b.
  CHECK(uplink_rate(2.0, 3.0, 6.0, 1.0) == doctest::Approx(6.0));
  // snr = 3 gives r = 2 b.
  CHECK(uplink_rate(3.0, 5.0, 5.0, 1.0) == doctest::Approx(10.0));
  CHECK(transmit_energy(100.0, 2.0, 50.0) == doctest::Approx(4.0));
  CHECK(transmit_energy(100.0, 0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(transmit_energy(100.0, 1.0, 0.0), InfeasibleLinkError);
  CHECK_THROWS_AS(uplink_rate(1.0, 1.0, 0.0, 1.0), DomainError);
}

TEST_CASE("stability bound") {
  CHECK(as_bound(1.0, 1000.0, 0.0, 32) == doctest::Approx(2e-3));
  CHECK(as_bound(2.0, 100.0, 16.0, 32) == doctest::Approx(2.0 * 4.0 / (100.0 * 0.5)));
  CHECK_THROWS_AS(as_bound(1.0, 10.0, 32.0, 32), DomainError);
  // Increasing in alpha.
  double prev = 0.0;
  for (double a = 1.0; a < 31.9; a += 0.5) {
    const double v = as_bound(1.0, 500.0, a, 32);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("objective matches the reference evaluation") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = small(seed);
    Rng rng(seed, 7);
    const auto d = oracle::random_interior(s, rng);
    const auto got = total_objective(s, d);
    const auto ref = oracle::objective(s, d);
    CHECK(got.H == doctest::Approx(static_cast<double>(ref.H)).epsilon(1e-12));
    CHECK(got.total_delay == doctest::Approx(static_cast<double>(ref.delay)).epsilon(1e-12));
    CHECK(got.total_energy == doctest::Approx(static_cast<double>(ref.energy)).epsilon(1e-12));
    CHECK(got.total_stability == doctest::Approx(static_cast<double>(ref.stability)).epsilon(1e-12));
    CHECK(got.delay_cost + got.energy_cost + got.stability_cost == doctest::Approx(got.H).epsilon(1e-12));
  }
}

TEST_CASE("objective is increasing in transmit power") {
  const auto s = small(3);
  Rng rng(3);
  auto d = oracle::random_interior(s, rng);
  double prev = -1.0;
  for (double frac = 0.05; frac <= 1.0; frac += 0.05) {
    d.power[0] = frac * s.users[0].p_max;
    const double H = total_objective(s, d).H;
    CHECK(H > prev);
    prev = H;
  }
}

TEST_CASE("feasibility screen names the violated constraint") {
  const auto s = small(1, 2, 2);
  Rng rng(1);
  auto d = oracle::random_interior(s, rng);
  CHECK(check_feasibility(s, d).ok());

  auto bad = d;
  bad.power[1] = 0.0;
  auto rep = check_feasibility(s, bad);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations[0].constraint == "power_positive");
  CHECK(rep.violations[0].index == 1);
  CHECK_THROWS_AS(total_objective(s, bad), InfeasibleDecision);

  bad = d;
  bad.assoc(0, 0) += 0.1;
  CHECK(check_feasibility(s, bad).describe().find("assoc_row_sum[0]") != std::string::npos);

  bad = d;
  bad.bandwidth(0, 1) = 10 * s.servers[1].b_max;
  CHECK(check_feasibility(s, bad).describe().find("bandwidth_capacity[1]") != std::string::npos);

  bad = d;
  bad.alpha[0] = s.llm.layers;  // at the pole while omega_s > 0
  CHECK(check_feasibility(s, bad).describe().find("alpha_upper") != std::string::npos);

  FeasibilityOptions integral;
  integral.integral = true;
  CHECK(check_feasibility(s, d, integral).describe().find("alpha_integer") != std::string::npos);

  FeasibilityOptions eq;
  eq.capacity_equality = true;
  CHECK(check_feasibility(s, d, eq).describe().find("capacity_eq") != std::string::npos);
}

TEST_CASE("stability is infinite at the pole but ignored without its weight") {
  auto s = with_weights(small(2, 3, 2), 1, 1, 0);
  Rng rng(2);
  auto d = oracle::random_interior(s, rng);
  d.alpha[0] = s.llm.layers;
  const auto out = total_objective(s, d);
  CHECK(std::isinf(out.total_stability));
  CHECK(out.stability_cost == 0.0);
  CHECK(std::isfinite(out.H));
}

TEST_CASE("average delay") {
  const auto s = small(4, 3, 2);
  Rng rng(4);
  auto d = oracle::random_interior(s, rng);
  double ref = 0.0;
  const double Y = s.llm.layers;
  for (std::size_t n = 0; n < 3; ++n) {
    const auto& u = s.users[n];
    const double psi = static_cast<double>(oracle::psi(s, n));
    double t = d.alpha[n] * psi / (d.freq_user[n] * u.cores * u.flops_per_cycle);
    for (std::size_t m = 0; m < 2; ++m) {
      const double r = static_cast<double>(oracle::rate(s.channel.gain(n, m), d.power[n], d.bandwidth(n, m), s.channel.noise_power));
      t += d.assoc(n, m) * (s.payload_bits(n) / r +
                            (Y - d.alpha[n]) * psi / (d.freq_edge(n, m) * s.servers[m].cores * s.servers[m].flops_per_cycle));
    }
    ref += t / 3.0;
  }
  CHECK(average_end_to_end_delay(s, d) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("scenario validation") {
  auto s = small(1, 2, 2);
  CHECK_NOTHROW(s.validate());
  auto bad = s;
  bad.users[1].f_max = -1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), "users[1].fmax", ValidationError);
  bad = s;
  bad.weights.delay = bad.weights.energy = bad.weights.stability = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.channel.gain(0, 1) = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
