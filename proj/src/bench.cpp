#include "mectune/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mectune/allocation.hpp"
#include "mectune/fpcore.hpp"

namespace mectune {

namespace {

using Clock = std::chrono::steady_clock;

// Lower end of the power search in plain coordinate descent: H decreases
// monotonically as p -> 0 (uplink energy s p / r), so the block has no
// attained minimizer and the search is cut at this fraction of p_max.
constexpr double kPowerFloor = 1e-6;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Exact minimizer of H over alpha_n with the rest fixed.
double alpha_block_H(const Scenario& s, std::size_t n, const Decision& dec) {
  double edge = 0.0;
  for (std::size_t m = 0; m < s.num_servers(); ++m)
    if (dec.assoc(n, m) > 0.0) edge += dec.assoc(n, m) * B_of(s, n, m, dec.freq_edge(n, m));
  const double local = A_of(s, n, dec.freq_user[n]);
  auto deriv = [&](double a) { return local - edge + stability_term_deriv(s, n, a); };
  double lo = 1.0, hi = s.alpha_max();
  if (deriv(lo) >= 0.0) return lo;
  if (deriv(hi) <= 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (deriv(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void edge_freq_block_H(const Scenario& s, std::size_t m, Decision& dec, const InnerConfig& cfg) {
  const double layers = s.llm.layers;
  const double cap = s.servers[m].f_max;
  const double wt = s.weights.eff_delay(), we = s.weights.eff_energy();
  std::vector<std::size_t> active, idle;
  for (std::size_t n = 0; n < s.num_users(); ++n) {
    if (dec.assoc(n, m) == 0.0) continue;
    (layers - dec.alpha[n] > 0.0 ? active : idle).push_back(n);
  }
  if (active.empty()) return;
  double reserved = 0.0;
  for (auto n : idle) reserved += dec.assoc(n, m) * 1e-9 * cap;
  std::vector<double> coef;
  for (auto n : active) coef.push_back(dec.assoc(n, m));
  auto deriv = [&](std::size_t i, double f) {
    const std::size_t n = active[i];
    return (layers - dec.alpha[n]) *
           edge_cost_per_layer_deriv(s.servers[m], f, s.users[n].tokens, s.llm, wt, we);
  };
  const auto alloc = allocate_capacity(active.size(), coef, cap - reserved, deriv, cfg.bisect_tol);
  for (std::size_t i = 0; i < active.size(); ++i) dec.freq_edge(active[i], m) = alloc[i];
  for (auto n : idle) dec.freq_edge(n, m) = 1e-9 * cap;
}

void bandwidth_block_H(const Scenario& s, std::size_t m, Decision& dec, const InnerConfig& cfg) {
  if (s.weights.eff_energy() == 0.0) return;
  std::vector<std::size_t> members;
  std::vector<double> coef;
  for (std::size_t n = 0; n < s.num_users(); ++n)
    if (dec.assoc(n, m) > 0.0) {
      members.push_back(n);
      coef.push_back(dec.assoc(n, m));
    }
  if (members.empty()) return;
  auto deriv = [&](std::size_t i, double b) {
    const std::size_t n = members[i];
    const auto lr = link_rate(s.channel.gain(n, m), dec.power[n], b, s.channel.noise_power);
    return -s.payload_bits(n) * dec.power[n] * lr.d_bandwidth / (lr.rate * lr.rate);
  };
  const auto alloc = allocate_capacity(members.size(), coef, s.servers[m].b_max, deriv, cfg.bisect_tol);
  for (std::size_t i = 0; i < members.size(); ++i) dec.bandwidth(members[i], m) = alloc[i];
}

double power_block_H(const Scenario& s, std::size_t n, const Decision& dec) {
  if (s.weights.eff_energy() == 0.0) return dec.power[n];
  auto deriv = [&](double p) {
    double d = 0.0;
    for (std::size_t m = 0; m < s.num_servers(); ++m) {
      if (dec.assoc(n, m) == 0.0) continue;
      const auto lr = link_rate(s.channel.gain(n, m), p, dec.bandwidth(n, m), s.channel.noise_power);
      d += dec.assoc(n, m) * dec.bandwidth(n, m) * lr.d_bandwidth / (lr.rate * lr.rate);
    }
    return d;
  };
  const double pmax = s.users[n].p_max;
  const double root = increasing_root(deriv, 0.0, pmax);
  return std::max(root, kPowerFloor * pmax);
}

Rng baseline_rng(std::uint64_t seed, Method m) {
  return Rng(mix_seed(seed, 0xBA5E), static_cast<std::uint64_t>(m));
}

Solution from_decision(const Scenario& s, Decision dec, bool round, const InnerConfig& inner,
                       bool polish) {
  Solution sol;
  sol.converged = true;
  if (polish) {
    sol.decision = std::move(dec);
    finalize(s, sol, inner, round);
    return sol;
  }
  sol.decision = round ? round_alpha(s, dec) : std::move(dec);
  sol.breakdown = total_objective(s, sol.decision);
  sol.kkt_residual = kkt_residual(s, sol.decision, true);
  sol.avg_delay = average_end_to_end_delay(s, sol.decision);
  return sol;
}

Solution ao_baseline(const Scenario& s, Decision init, const OrchestratorConfig& cfg,
                     bool freeze_alpha) {
  Solution sol;
  auto ao = ao_solve_p3(s, init, cfg.inner, freeze_alpha);
  sol.ao_iters = ao.iterations;
  sol.converged = ao.converged;
  sol.ao_traces.push_back(std::move(ao.trace));
  sol.decision = std::move(ao.decision);
  sol.outer_objective.push_back(evaluate_objective(s, sol.decision).H);
  finalize(s, sol, cfg.inner, !freeze_alpha);
  return sol;
}

}  // namespace

const std::vector<Method>& all_methods() {
  static const std::vector<Method> v = {Method::proposed,     Method::alternating_opt,
                                        Method::alpha_only,   Method::resource_only,
                                        Method::greedy_assoc, Method::random_assoc,
                                        Method::local_only,   Method::edge_only};
  return v;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::alternating_opt: return "alternating_opt";
    case Method::alpha_only: return "alpha_only";
    case Method::resource_only: return "resource_only";
    case Method::greedy_assoc: return "greedy_assoc";
    case Method::random_assoc: return "random_assoc";
    case Method::local_only: return "local_only";
    case Method::edge_only: return "edge_only";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string names;
  for (auto m : all_methods()) {
    if (method_name(m) == name) return m;
    names += (names.empty() ? "" : ", ") + method_name(m);
  }
  throw ValidationError("unknown method '" + name + "' (expected one of: " + names + ")");
}

AoResult coordinate_descent_H(const Scenario& s, const Decision& init, const InnerConfig& cfg,
                              bool freeze_alpha) {
  cfg.validate();
  FeasibilityOptions fo;
  fo.capacity_equality = true;
  const auto rep = check_feasibility(s, init, fo);
  if (!rep.ok()) throw ValidationError("coordinate_descent_H: infeasible init: " + rep.describe());
  const auto t0 = Clock::now();
  AoResult res;
  res.decision = init;
  Decision& dec = res.decision;
  double H = evaluate_objective(s, dec).H;
  res.trace.initial_H = H;
  for (int t = 1; t <= cfg.max_ao_iters; ++t) {
    const Decision before = dec;
    if (!freeze_alpha)
      for (std::size_t n = 0; n < s.num_users(); ++n) dec.alpha[n] = alpha_block_H(s, n, dec);
    for (std::size_t n = 0; n < s.num_users(); ++n) dec.freq_user[n] = solve_user_freq(s, n);
    for (std::size_t m = 0; m < s.num_servers(); ++m) edge_freq_block_H(s, m, dec, cfg);
    for (std::size_t n = 0; n < s.num_users(); ++n) dec.power[n] = power_block_H(s, n, dec);
    for (std::size_t m = 0; m < s.num_servers(); ++m) bandwidth_block_H(s, m, dec, cfg);
    double Hn = evaluate_objective(s, dec).H;
    if (Hn > H) {
      // Rounding in a block solve: keep the better iterate.
      dec = before;
      Hn = H;
    }
    res.trace.K.push_back(Hn);
    res.trace.H.push_back(Hn);
    res.trace.sweeps.push_back(1);
    res.trace.wall_ms.push_back(elapsed_ms(t0));
    res.iterations = t;
    const bool done = std::abs(H - Hn) < cfg.ao_tol * (1.0 + std::abs(Hn));
    H = Hn;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.kkt_residual = kkt_residual(s, dec, freeze_alpha);
  return res;
}

Decision random_resources(const Scenario& s, const Matrix& assoc, Rng& rng) {
  auto dec = Decision::zeros(s.num_users(), s.num_servers());
  dec.assoc = assoc;
  for (std::size_t n = 0; n < s.num_users(); ++n) {
    dec.alpha[n] = 0.5 * (1.0 + s.alpha_max());
    dec.power[n] = s.users[n].p_max * rng.uniform(1e-3, 1.0);
    dec.freq_user[n] = s.users[n].f_max * rng.uniform(1e-3, 1.0);
  }
  for (std::size_t m = 0; m < s.num_servers(); ++m) {
    double wb = 0.0, wf = 0.0;
    std::vector<double> b(s.num_users(), 0.0), f(s.num_users(), 0.0);
    for (std::size_t n = 0; n < s.num_users(); ++n) {
      if (assoc(n, m) == 0.0) continue;
      b[n] = rng.exponential() + 1e-12;
      f[n] = rng.exponential() + 1e-12;
      wb += assoc(n, m) * b[n];
      wf += assoc(n, m) * f[n];
    }
    for (std::size_t n = 0; n < s.num_users(); ++n) {
      if (assoc(n, m) == 0.0) continue;
      dec.bandwidth(n, m) = s.servers[m].b_max * b[n] / wb;
      dec.freq_edge(n, m) = s.servers[m].f_max * f[n] / wf;
    }
  }
  return dec;
}

Scenario evaluation_scenario(const Scenario& s, Method m) {
  if (m != Method::local_only) return s;
  return with_weights(s, s.weights.delay, s.weights.energy, 0.0);
}

Solution run_method(const Scenario& s0, Method m, const OrchestratorConfig& cfg,
                    std::uint64_t seed) {
  const auto t0 = Clock::now();
  const Scenario s = evaluation_scenario(s0, m);
  s.validate();
  Rng rng = baseline_rng(seed, m);
  const double layers = s.llm.layers;
  Solution sol;
  switch (m) {
    case Method::proposed: {
      OrchestratorConfig c = cfg;
      c.seed = seed;
      sol = solve(s, c);
      break;
    }
    case Method::alternating_opt: {
      auto cd = coordinate_descent_H(s, default_initial_decision(s, greedy_association(s)), cfg.inner);
      Decision rounded = round_alpha(s, cd.decision);
      auto polish = coordinate_descent_H(s, rounded, cfg.inner, true);
      sol.ao_iters = cd.iterations + polish.iterations;
      sol.converged = cd.converged && polish.converged;
      sol.ao_traces = {cd.trace, polish.trace};
      sol.decision = std::move(polish.decision);
      sol.kkt_residual = polish.kkt_residual;
      sol.breakdown = total_objective(s, sol.decision);
      sol.avg_delay = average_end_to_end_delay(s, sol.decision);
      break;
    }
    case Method::alpha_only: {
      Decision dec = random_resources(s, greedy_association(s), rng);
      for (std::size_t n = 0; n < s.num_users(); ++n) dec.alpha[n] = alpha_block_H(s, n, dec);
      sol = from_decision(s, std::move(dec), true, cfg.inner, false);
      break;
    }
    case Method::resource_only: {
      Decision dec = default_initial_decision(s, greedy_association(s));
      for (double& a : dec.alpha) a = static_cast<double>(rng.integer(1, s.llm.layers - 1));
      sol = ao_baseline(s, std::move(dec), cfg, true);
      break;
    }
    case Method::greedy_assoc:
      sol = ao_baseline(s, default_initial_decision(s, greedy_association(s)), cfg, false);
      break;
    case Method::random_assoc:
      sol = ao_baseline(s, default_initial_decision(s, random_association(s, rng)), cfg, false);
      break;
    case Method::local_only: {
      Decision dec = default_initial_decision(s, greedy_association(s));
      for (double& a : dec.alpha) a = layers;
      sol = ao_baseline(s, std::move(dec), cfg, true);
      break;
    }
    case Method::edge_only: {
      Decision dec = default_initial_decision(s, greedy_association(s));
      for (double& a : dec.alpha) a = 1.0;
      sol = ao_baseline(s, std::move(dec), cfg, true);
      break;
    }
  }
  sol.wall_ms = elapsed_ms(t0);
  return sol;
}

SweepOutput run_sweep(const SweepSpec& spec) {
  if (spec.values.empty() || spec.seeds.empty() || spec.methods.empty())
    throw ValidationError("sweep: values, seeds and methods must be nonempty");
  if (spec.kind == SweepKind::weights && spec.weight != 't' && spec.weight != 'e' && spec.weight != 's')
    throw ValidationError("sweep: weight must be one of t, e, s");
  spec.solver.validate();

  struct Job {
    std::size_t point, seed, method;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < spec.values.size(); ++p)
    for (std::size_t k = 0; k < spec.seeds.size(); ++k)
      for (std::size_t j = 0; j < spec.methods.size(); ++j) jobs.push_back({p, k, j});

  auto scenario_for = [&](std::size_t p, std::uint64_t seed) {
    GenParams gp = spec.base;
    gp.seed = seed;
    const double v = spec.values[p];
    if (spec.kind == SweepKind::users) gp.N = static_cast<std::size_t>(v);
    if (spec.kind == SweepKind::servers) gp.M = static_cast<std::size_t>(v);
    Scenario s = generate(gp);
    if (spec.kind == SweepKind::weights) {
      const double wt = spec.weight == 't' ? v : s.weights.delay;
      const double we = spec.weight == 'e' ? v : s.weights.energy;
      const double ws = spec.weight == 's' ? v : s.weights.stability;
      s = with_weights(s, wt, we, ws);
    }
    return s;
  };

  std::vector<std::optional<Solution>> sols(jobs.size());
  std::vector<std::optional<ResultRow>> rows(jobs.size());
  std::vector<std::optional<FailureRow>> fails(jobs.size());
  parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
    const Job& jb = jobs[i];
    const std::uint64_t seed = spec.seeds[jb.seed];
    const Method m = spec.methods[jb.method];
    try {
      const Scenario s = scenario_for(jb.point, seed);
      Solution sol = run_method(s, m, spec.solver, seed);
      rows[i] = make_row(evaluation_scenario(s, m), seed, method_name(m), sol);
      if (!sol.converged)
        fails[i] = FailureRow{seed, method_name(m), spec.values[jb.point], "nonconverged",
                              "iteration cap reached; row kept"};
      sols[i] = std::move(sol);
    } catch (const StageError& e) {
      fails[i] = FailureRow{seed, method_name(m), spec.values[jb.point], "error:" + e.stage(), e.what()};
    } catch (const std::exception& e) {
      fails[i] = FailureRow{seed, method_name(m), spec.values[jb.point], "error", e.what()};
    }
  });

  SweepOutput out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (fails[i]) out.failures.push_back(*fails[i]);
    if (!rows[i]) continue;
    out.rows.push_back(*rows[i]);
    out.avg_delay.push_back(sols[i]->avg_delay);
    out.points.push_back(spec.values[jobs[i].point]);
    out.solutions.push_back(std::move(*sols[i]));
  }
  return out;
}

std::string failures_csv(const std::vector<FailureRow>& rows) {
  std::ostringstream os;
  os << "seed,method,point,status,message\n";
  for (const auto& f : rows) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::string quoted;
    for (char c : msg) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    os << f.seed << ',' << f.method << ',' << f.point << ',' << f.status << ",\"" << quoted << "\"\n";
  }
  return os.str();
}

std::string trace_csv(std::uint64_t seed, std::size_t N, std::size_t M, const Solution& sol) {
  std::ostringstream os;
  char buf[64];
  auto line = [&](const char* stage, std::size_t round, std::size_t it, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << seed << ',' << N << ',' << M << ',' << stage << ',' << round << ',' << it << ',' << buf << '\n';
  };
  os << "seed,N,M,stage,round,iteration,value\n";
  for (std::size_t r = 0; r < sol.ao_traces.size(); ++r) {
    const auto& t = sol.ao_traces[r];
    line("ao_H", r, 0, t.initial_H);
    for (std::size_t i = 0; i < t.K.size(); ++i) {
      line("ao_K", r, i + 1, t.K[i]);
      line("ao_H", r, i + 1, t.H[i]);
    }
  }
  for (std::size_t r = 0; r < sol.cccp_traces.size(); ++r) {
    const auto& t = sol.cccp_traces[r];
    for (std::size_t i = 0; i < t.penalized.size(); ++i) {
      line("cccp_penalized", r, i + 1, t.penalized[i]);
      line("cccp_gap", r, i + 1, t.gap[i]);
    }
  }
  for (std::size_t r = 0; r < sol.outer_objective.size(); ++r) line("outer_H", r, 0, sol.outer_objective[r]);
  return os.str();
}

}  // namespace mectune
