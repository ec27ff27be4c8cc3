#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mectune/orchestrator.hpp"
#include "mectune/scenario_io.hpp"
#include "support/oracles.hpp"

using namespace mectune;

namespace {

const std::filesystem::path kData = MECTUNE_TEST_DATA;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mectune_test_" + name);
}

Scenario scenario(std::uint64_t seed, std::size_t N = 6, std::size_t M = 3) {
  GenParams gp;
  gp.N = N;
  gp.M = M;
  gp.seed = seed;
  return generate(gp);
}

}  // namespace

TEST_CASE("path loss and noise conversion") {
  CHECK(path_loss_db(1000.0) == doctest::Approx(128.1));
  CHECK(gain_from_distance(1000.0) == doctest::Approx(std::pow(10.0, -12.81)));
  CHECK(path_loss_db(100.0) == doctest::Approx(128.1 - 37.6));
  CHECK(path_loss_db(0.0) == path_loss_db(1.0));
  CHECK(dbm_to_watt(-134.0) == doctest::Approx(3.981e-17).epsilon(1e-4));
  CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0));
  double prev = 1.0;
  for (double d = 1.0; d < 2000.0; d *= 1.5) {
    CHECK(gain_from_distance(d) < prev);
    prev = gain_from_distance(d);
  }
}

TEST_CASE("generated values stay in range") {
  GenParams gp;
  gp.seed = 5;
  const auto s = generate(gp);
  CHECK(s.num_users() == 50);
  CHECK(s.num_servers() == 10);
  CHECK(s.llm.layers == 32);
  CHECK(s.llm.batch == 512);
  CHECK(s.llm.hidden == 1024);
  for (const auto& u : s.users) {
    CHECK(u.p_max >= 1.0);
    CHECK(u.p_max <= 2.0);
    CHECK(u.f_max >= 0.5e9);
    CHECK(u.f_max <= 1e9);
    CHECK(u.tokens >= 512);
    CHECK(u.tokens <= 1024);
    CHECK(u.cores >= 4);
    CHECK(u.cores <= 6);
    CHECK(u.flops_per_cycle == 1.0);
    CHECK(u.position.x >= 0.0);
    CHECK(u.position.x <= gp.area_size);
  }
  for (const auto& e : s.servers) {
    CHECK(e.f_max >= 1e9);
    CHECK(e.f_max <= 3e9);
    CHECK(e.b_max == 20e6);
    CHECK(e.cores >= 2560);
    CHECK(e.cores <= 5120);
    CHECK((e.flops_per_cycle == 1.0 || e.flops_per_cycle == 2.0));
  }
  CHECK(s.channel.noise_power == doctest::Approx(3.981e-17).epsilon(1e-4));
  for (std::size_t n = 0; n < 50; ++n)
    for (std::size_t m = 0; m < 10; ++m) {
      const double dist = std::hypot(s.users[n].position.x - s.servers[m].position.x,
                                     s.users[n].position.y - s.servers[m].position.y);
      CHECK(s.channel.gain(n, m) == doctest::Approx(gain_from_distance(dist)));
    }
}

TEST_CASE("sampled integers look uniform") {
  // Chi-square over 10^4 user draws of the core count {4,5,6}.
  GenParams gp;
  gp.N = 10000;
  gp.M = 1;
  gp.seed = 77;
  const auto s = generate(gp);
  double counts[3] = {0, 0, 0};
  for (const auto& u : s.users) counts[static_cast<int>(u.cores) - 4] += 1;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 10000.0 / 3) * (c - 10000.0 / 3) / (10000.0 / 3);
  CHECK(chi2 < 13.82);  // 2 dof, p = 0.001

  // Ten equal bins of the transmit power range.
  double bins[10] = {};
  for (const auto& u : s.users) bins[std::min(9, static_cast<int>((u.p_max - 1.0) * 10))] += 1;
  chi2 = 0.0;
  for (double c : bins) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(chi2 < 27.88);  // 9 dof, p = 0.001
}

TEST_CASE("generation is deterministic per seed") {
  CHECK(scenario_to_json(scenario(3)).dump() == scenario_to_json(scenario(3)).dump());
  CHECK(scenario_to_json(scenario(3)).dump() != scenario_to_json(scenario(4)).dump());
}

TEST_CASE("scenario round trip") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = scenario(seed, 1 + seed % 7, 1 + seed % 4);
    CHECK(scenario_from_json(scenario_to_json(s)) == s);
  }
  const auto p = temp_path("scenario.json");
  save_scenario(p, scenario(9));
  CHECK(load_scenario(p) == scenario(9));
  std::filesystem::remove(p);
}

TEST_CASE("solution round trip") {
  const auto s = scenario(2);
  OrchestratorConfig cfg;
  cfg.seed = 2;
  const auto sol = solve(s, cfg);
  const auto back = solution_from_json(solution_to_json(sol));
  CHECK(back.decision == sol.decision);
  CHECK(back.breakdown.H == sol.breakdown.H);
  CHECK(back.outer_objective == sol.outer_objective);
  CHECK(back.ao_traces.size() == sol.ao_traces.size());
  CHECK(back.ao_traces[0].K == sol.ao_traces[0].K);
  CHECK(back.cccp_iters == sol.cccp_iters);
  const auto p = temp_path("solution.json");
  save_solution(p, sol);
  CHECK(load_solution(p).decision == sol.decision);
  std::filesystem::remove(p);

  // Infinite stability survives the trip.
  Solution inf_sol = sol;
  inf_sol.breakdown.total_stability = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(solution_from_json(solution_to_json(inf_sol)).breakdown.total_stability));
}

TEST_CASE("hand-written fixture") {
  const auto s = load_scenario(kData / "minimal_1x1.json");
  REQUIRE(s.num_users() == 1);
  REQUIRE(s.num_servers() == 1);
  CHECK(s.llm.layers == 4);
  CHECK(s.llm.batch == 2);
  CHECK(s.llm.hidden == 8);
  CHECK(s.llm.lipschitz == 1.5);
  CHECK(s.users[0].tokens == 16);
  CHECK(s.users[0].cores == 4.0);
  CHECK(s.users[0].f_max == 1e9);
  CHECK(s.users[0].p_max == 1.5);
  CHECK(s.users[0].dataset_size == 2000);
  CHECK(s.servers[0].flops_per_cycle == 2.0);
  CHECK(s.servers[0].position == Point{300, 400});
  CHECK(s.channel.gain(0, 0) == 1e-10);
  CHECK(s.weights.energy == 2.0);
  CHECK(s.weights.norm.stability == 0.001);
  // psi = 72*2*16*64 + 12*2*256*8 = 147456 + 49152.
  CHECK(flops_per_layer(16, s.llm) == 196608.0);
  // The fixture solves end to end.
  const auto sol = solve(s);
  CHECK(sol.decision.assoc(0, 0) == 1.0);
  CHECK(sol.decision.bandwidth(0, 0) == doctest::Approx(2e7));
}

TEST_CASE("parse errors carry the field path") {
  auto j = scenario_to_json(scenario(1, 4, 2));
  auto bad = j;
  bad["users"][3]["fmax"] = "nan";
  CHECK_THROWS_WITH_AS(scenario_from_json(bad), doctest::Contains("$.users[3].fmax"), ValidationError);
  bad = j;
  bad["users"][3].erase("fmax");
  CHECK_THROWS_WITH_AS(scenario_from_json(bad), doctest::Contains("$.users[3].fmax"), ValidationError);
  bad = j;
  bad["version"] = 2;
  CHECK_THROWS_WITH_AS(scenario_from_json(bad), doctest::Contains("version"), ValidationError);
  bad = j;
  bad["channel"]["gains"][0][1] = -1.0;
  CHECK_THROWS_AS(scenario_from_json(bad), ValidationError);
  CHECK_THROWS_AS(parse_json_text("{\"users\": [1, 2,"), ValidationError);
  CHECK_THROWS_AS(load_scenario(temp_path("missing.json")), ValidationError);
}

TEST_CASE("results CSV") {
  ResultRow r;
  r.seed = 4;
  r.method = "proposed";
  r.N = 50;
  r.M = 10;
  r.omega_t = r.omega_e = r.omega_s = 1.0;
  r.energy_J = 0.1 + 0.2;
  r.delay_s = 1e300;
  r.stability_bound = std::numeric_limits<double>::infinity();
  r.objective = 13.5;
  r.ao_iters = 7;
  const auto text = results_csv({r, r});
  CHECK(text.substr(0, text.find('\n')) ==
        "seed,method,N,M,omega_t,omega_e,omega_s,energy_J,delay_s,stability_bound,objective,"
        "outer_rounds,ao_iters,cccp_iters,kkt_residual,runtime_ms");
  const auto back = parse_results_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].energy_J == r.energy_J);
  CHECK(back[0].delay_s == r.delay_s);
  CHECK(std::isinf(back[0].stability_bound));
  CHECK(back[1].ao_iters == 7);
  CHECK(back[1].method == "proposed");

  std::string mangled = text;
  mangled.replace(mangled.find("energy_J"), 8, "energy");
  CHECK_THROWS_WITH_AS(parse_results_csv(mangled), doctest::Contains("energy_J"), ValidationError);
}

TEST_CASE("emitted rows add up to the objective") {
  const auto s = scenario(3);
  const auto sol = solve(s);
  const auto row = make_row(s, 3, "proposed", sol);
  const double sum = s.weights.eff_delay() * row.delay_s + s.weights.eff_energy() * row.energy_J +
                     s.weights.eff_stability() * row.stability_bound;
  CHECK(std::abs(sum - row.objective) <= 1e-9 * std::abs(row.objective));
}

TEST_CASE("atomic write leaves no temporary behind") {
  const auto dir = temp_path("atomic");
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "a.txt", "hello");
  write_file_atomic(dir / "a.txt", "world");
  CHECK(read_file(dir / "a.txt") == "world");
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator()) == 1);
  std::filesystem::remove_all(dir);
}
