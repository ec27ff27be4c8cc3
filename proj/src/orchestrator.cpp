#include "mectune/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mectune/rng.hpp"

namespace mectune {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto staged(const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

void OrchestratorConfig::validate() const {
  inner.validate();
  penalty.validate();
  if (!(outer_tol > 0.0)) throw ValidationError("outer_tol must be > 0");
  if (max_outer < 1) throw ValidationError("max_outer must be >= 1");
}

Decision round_alpha(const Scenario& s, const Decision& dec) {
  const double hi = s.weights.stability > 0.0 ? s.llm.layers - 1 : s.llm.layers;
  Decision out = dec;
  for (double& a : out.alpha) a = std::clamp(std::round(a), 1.0, hi);
  return out;
}

Decision prospective_decision(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  Decision out = dec;
  for (std::size_t m = 0; m < M; ++m) {
    double members = 0.0;
    for (std::size_t n = 0; n < N; ++n) members += dec.assoc(n, m);
    for (std::size_t n = 0; n < N; ++n) {
      out.bandwidth(n, m) = s.servers[m].b_max / (members + 1.0);
      out.freq_edge(n, m) = s.servers[m].f_max / (members + 1.0);
    }
  }
  return out;
}

Decision rebalance(const Scenario& s, const Decision& dec, const Matrix& assoc) {
  Decision out = default_initial_decision(s, assoc);
  out.alpha = dec.alpha;
  out.power = dec.power;
  out.freq_user = dec.freq_user;
  return out;
}

void finalize(const Scenario& s, Solution& sol, const InnerConfig& inner, bool round) {
  Decision start = round ? round_alpha(s, sol.decision) : sol.decision;
  auto polish = staged("polish", [&] { return ao_solve_p3(s, start, inner, true); });
  sol.ao_iters += polish.iterations;
  sol.converged = sol.converged && polish.converged;
  sol.kkt_residual = polish.kkt_residual;
  sol.ao_traces.push_back(std::move(polish.trace));
  sol.decision = std::move(polish.decision);
  sol.breakdown = total_objective(s, sol.decision);
  sol.avg_delay = average_end_to_end_delay(s, sol.decision);
}

Solution solve(const Scenario& s, const OrchestratorConfig& cfg) {
  s.validate();
  cfg.validate();
  const auto t0 = Clock::now();
  Solution sol;

  const Matrix chi0 = greedy_association(s);
  auto ao = staged("inner_solver",
                   [&] { return ao_solve_p3(s, default_initial_decision(s, chi0), cfg.inner); });
  sol.ao_iters += ao.iterations;
  bool inner_ok = ao.converged;
  sol.ao_traces.push_back(std::move(ao.trace));
  Decision dec = std::move(ao.decision);
  double H = evaluate_objective(s, dec).H;
  sol.outer_objective.push_back(H);

  bool outer_done = s.num_servers() == 1;
  for (int round = 1; round <= cfg.max_outer && !outer_done; ++round) {
    sol.outer_rounds = round;
    PenaltyConfig pen = cfg.penalty;
    pen.rng_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(round));
    const Decision staged_dec = prospective_decision(s, dec);
    auto ms = staged("assoc_solver", [&] { return multistart_associate(s, staged_dec, pen); });
    sol.cccp_iters += ms.best.iterations;
    sol.binarity_gap = ms.best.binarity_gap;
    sol.cccp_traces.push_back(ms.best.trace);
    if (ms.best.assoc == dec.assoc) {
      outer_done = true;
      break;
    }
    auto cand = staged("inner_solver",
                       [&] { return ao_solve_p3(s, rebalance(s, dec, ms.best.assoc), cfg.inner); });
    sol.ao_iters += cand.iterations;
    const double Hc = evaluate_objective(s, cand.decision).H;
    if (!(Hc < H)) {
      outer_done = true;
      break;
    }
    const double rel = (H - Hc) / std::max(std::abs(H), 1e-300);
    inner_ok = cand.converged;
    sol.ao_traces.push_back(std::move(cand.trace));
    dec = std::move(cand.decision);
    H = Hc;
    sol.outer_objective.push_back(H);
    if (rel < cfg.outer_tol) outer_done = true;
  }

  sol.decision = std::move(dec);
  sol.converged = outer_done && inner_ok;
  finalize(s, sol, cfg.inner);
  sol.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return sol;
}

}  // namespace mectune
