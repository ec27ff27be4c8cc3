#include "mectune/inner_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mectune/allocation.hpp"

namespace mectune {

namespace {

using Clock = std::chrono::steady_clock;

// Share of edge frequency parked on a user that runs no edge layers.
constexpr double kIdleEdgeShare = 1e-9;

bool edge_active(const Scenario& s, const Decision& dec, const AuxVars& aux, std::size_t n,
                 std::size_t m) {
  return dec.assoc(n, m) > 0.0 && aux.q(n, m) > 0.0 &&
         static_cast<double>(s.llm.layers) - dec.alpha[n] > 0.0;
}

bool capacity_met(const Decision& dec, const Matrix& values, std::size_t m, double cap) {
  double sum = 0.0;
  for (std::size_t n = 0; n < dec.num_users(); ++n) {
    if (dec.assoc(n, m) == 0.0) continue;
    if (!(values(n, m) > 0.0)) return false;
    sum += dec.assoc(n, m) * values(n, m);
  }
  return std::abs(sum - cap) <= 1e-9 * cap;
}

double uplink_block(const Scenario& s, const Decision& dec, const AuxVars& aux, std::size_t n,
                    std::size_t m) {
  const double nu = aux.nu(n, m);
  const auto lr = link_rate(s.channel.gain(n, m), dec.power[n], dec.bandwidth(n, m),
                            s.channel.noise_power);
  const double pd = dec.power[n] * s.payload_bits(n);
  return pd * pd * nu + 1.0 / (4.0 * lr.rate * lr.rate * nu);
}

}  // namespace

void InnerConfig::validate() const {
  if (!(block_tol > 0.0) || !(ao_tol > 0.0) || !(bisect_tol > 0.0))
    throw ValidationError("InnerConfig: tolerances must be > 0");
  if (max_block_sweeps < 1 || max_ao_iters < 1)
    throw ValidationError("InnerConfig: iteration caps must be >= 1");
}

double AoTrace::max_increase() const {
  double worst = -std::numeric_limits<double>::infinity();
  double prev = initial_H;
  for (std::size_t t = 0; t < K.size(); ++t) {
    worst = std::max(worst, K[t] - prev);
    worst = std::max(worst, H[t] - K[t]);
    prev = H[t];
  }
  return worst;
}

Decision default_initial_decision(const Scenario& s, const Matrix& assoc) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  auto dec = Decision::zeros(N, M);
  dec.assoc = assoc;
  for (std::size_t n = 0; n < N; ++n) {
    dec.alpha[n] = 0.5 * (1.0 + s.alpha_max());
    dec.power[n] = 0.5 * s.users[n].p_max;
    dec.freq_user[n] = 0.5 * s.users[n].f_max;
  }
  for (std::size_t m = 0; m < M; ++m) {
    double load = 0.0;
    for (std::size_t n = 0; n < N; ++n) load += assoc(n, m);
    if (load == 0.0) continue;
    for (std::size_t n = 0; n < N; ++n) {
      if (assoc(n, m) == 0.0) continue;
      dec.bandwidth(n, m) = s.servers[m].b_max / load;
      dec.freq_edge(n, m) = s.servers[m].f_max / load;
    }
  }
  return dec;
}

double solve_alpha(const Scenario& s, std::size_t n, const Decision& dec, const AuxVars& aux) {
  const double layers = s.llm.layers;
  const double z = aux.z[n];
  double Q = 0.0;
  for (std::size_t m = 0; m < s.num_servers(); ++m) Q += dec.assoc(n, m) * aux.q(n, m);
  const bool has_pole = s.weights.eff_stability() > 0.0;
  if (z == 0.0 && Q == 0.0 && !has_pole) return dec.alpha[n];

  auto deriv = [&](double a) {
    return 2.0 * z * a - 2.0 * Q * (layers - a) + stability_term_deriv(s, n, a);
  };
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

double solve_user_freq(const Scenario& s, std::size_t n) {
  const auto& u = s.users[n];
  const double wt = s.weights.eff_delay();
  const double we = s.weights.eff_energy();
  if (we * u.kappa == 0.0) return u.f_max;
  if (wt == 0.0)
    throw DomainError("solve_user_freq: zero delay weight with positive energy weight has no "
                      "minimizing frequency in (0, f_max]");
  return std::min(u.f_max, std::cbrt(wt / (2.0 * u.kappa * we)));
}

void solve_edge_freq(const Scenario& s, std::size_t m, Decision& dec, const AuxVars& aux,
                     const InnerConfig& cfg) {
  const std::size_t N = s.num_users();
  const double cap = s.servers[m].f_max;
  std::vector<std::size_t> active, idle;
  for (std::size_t n = 0; n < N; ++n) {
    if (dec.assoc(n, m) == 0.0) continue;
    (edge_active(s, dec, aux, n, m) ? active : idle).push_back(n);
  }
  if (active.empty() && idle.empty()) return;
  const bool feasible_now = capacity_met(dec, dec.freq_edge, m, cap);
  if (active.empty()) {
    if (feasible_now) return;
    double load = 0.0;
    for (auto n : idle) load += dec.assoc(n, m);
    for (auto n : idle) dec.freq_edge(n, m) = cap / load;
    return;
  }

  double reserved = 0.0;
  for (auto n : idle) reserved += dec.assoc(n, m) * kIdleEdgeShare * cap;
  auto block_value = [&](const Decision& d) {
    double v = 0.0;
    for (auto n : active) {
      const double B = B_of(s, n, m, d.freq_edge(n, m));
      v += dec.assoc(n, m) * B * B / (4.0 * aux.q(n, m));
    }
    return v;
  };
  const double before = feasible_now ? block_value(dec) : 0.0;

  std::vector<double> coef;
  for (auto n : active) coef.push_back(dec.assoc(n, m));
  const auto& e = s.servers[m];
  const double wt = s.weights.eff_delay(), we = s.weights.eff_energy();
  auto deriv = [&](std::size_t i, double f) {
    const std::size_t n = active[i];
    const auto tokens = s.users[n].tokens;
    return edge_cost_per_layer(e, f, tokens, s.llm, wt, we) *
           edge_cost_per_layer_deriv(e, f, tokens, s.llm, wt, we) / (2.0 * aux.q(n, m));
  };
  const auto alloc = allocate_capacity(active.size(), coef, cap - reserved, deriv, cfg.bisect_tol);

  Matrix saved = dec.freq_edge;
  for (std::size_t i = 0; i < active.size(); ++i) dec.freq_edge(active[i], m) = alloc[i];
  for (auto n : idle) dec.freq_edge(n, m) = kIdleEdgeShare * cap;
  if (feasible_now && block_value(dec) > before) dec.freq_edge = std::move(saved);
}

double solve_power(const Scenario& s, std::size_t n, const Decision& dec, const AuxVars& aux) {
  const double we = s.weights.eff_energy();
  if (we == 0.0) return dec.power[n];
  const double bits = s.payload_bits(n);
  const std::size_t M = s.num_servers();
  auto deriv = [&](double p) {
    double d = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      const double nu = aux.nu(n, m);
      const auto lr = link_rate(s.channel.gain(n, m), p, dec.bandwidth(n, m), s.channel.noise_power);
      d += chi * (2.0 * bits * bits * nu * p -
                  lr.d_power / (2.0 * lr.rate * lr.rate * lr.rate * nu));
    }
    return d;
  };
  auto value = [&](double p) {
    Decision d = dec;
    d.power[n] = p;
    double v = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      if (dec.assoc(n, m) > 0.0) v += dec.assoc(n, m) * uplink_block(s, d, aux, n, m);
    return v;
  };
  const double p = increasing_root(deriv, 0.0, s.users[n].p_max);
  return value(p) <= value(dec.power[n]) ? p : dec.power[n];
}

void solve_bandwidth(const Scenario& s, std::size_t m, Decision& dec, const AuxVars& aux,
                     const InnerConfig& cfg) {
  const double we = s.weights.eff_energy();
  if (we == 0.0) return;
  const std::size_t N = s.num_users();
  const double cap = s.servers[m].b_max;
  std::vector<std::size_t> members;
  std::vector<double> coef;
  for (std::size_t n = 0; n < N; ++n) {
    if (dec.assoc(n, m) == 0.0) continue;
    members.push_back(n);
    coef.push_back(dec.assoc(n, m));
  }
  if (members.empty()) return;
  const bool feasible_now = capacity_met(dec, dec.bandwidth, m, cap);
  auto block_value = [&](const Decision& d) {
    double v = 0.0;
    for (auto n : members) v += d.assoc(n, m) * uplink_block(s, d, aux, n, m);
    return v;
  };
  const double before = feasible_now ? block_value(dec) : 0.0;
  auto deriv = [&](std::size_t i, double b) {
    const std::size_t n = members[i];
    const auto lr = link_rate(s.channel.gain(n, m), dec.power[n], b, s.channel.noise_power);
    return -lr.d_bandwidth / (2.0 * lr.rate * lr.rate * lr.rate * aux.nu(n, m));
  };
  const auto alloc = allocate_capacity(members.size(), coef, cap, deriv, cfg.bisect_tol);
  Matrix saved = dec.bandwidth;
  for (std::size_t i = 0; i < members.size(); ++i) dec.bandwidth(members[i], m) = alloc[i];
  if (feasible_now && block_value(dec) > before) dec.bandwidth = std::move(saved);
}

P4Result solve_p4(const Scenario& s, const AuxVars& aux, const Decision& init,
                  const InnerConfig& cfg, bool freeze_alpha) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  P4Result out{init, 0};
  Decision& dec = out.decision;
  double K_prev = surrogate_K(s, dec, aux);
  for (int sweep = 1; sweep <= cfg.max_block_sweeps; ++sweep) {
    out.sweeps = sweep;
    if (!freeze_alpha)
      for (std::size_t n = 0; n < N; ++n) dec.alpha[n] = solve_alpha(s, n, dec, aux);
    for (std::size_t n = 0; n < N; ++n) dec.freq_user[n] = solve_user_freq(s, n);
    for (std::size_t m = 0; m < M; ++m) solve_edge_freq(s, m, dec, aux, cfg);
    for (std::size_t n = 0; n < N; ++n) dec.power[n] = solve_power(s, n, dec, aux);
    for (std::size_t m = 0; m < M; ++m) solve_bandwidth(s, m, dec, aux, cfg);
    const double K = surrogate_K(s, dec, aux);
    const bool settled = K_prev - K <= cfg.block_tol * (1.0 + std::abs(K));
    K_prev = K;
    if (settled) break;
  }
  return out;
}

AoResult ao_solve_p3(const Scenario& s, const Decision& init, const InnerConfig& cfg,
                     bool freeze_alpha) {
  cfg.validate();
  FeasibilityOptions fo;
  fo.capacity_equality = true;
  const auto rep = check_feasibility(s, init, fo);
  if (!rep.ok()) throw ValidationError("ao_solve_p3: infeasible init: " + rep.describe());

  const auto t0 = Clock::now();
  AoResult res;
  res.decision = init;
  res.trace.initial_H = evaluate_objective(s, init).H;
  double prev = res.trace.initial_H;
  for (int t = 1; t <= cfg.max_ao_iters; ++t) {
    const auto aux = aux_optimal(s, res.decision);
    auto p4 = solve_p4(s, aux, res.decision, cfg, freeze_alpha);
    const double K = surrogate_K(s, p4.decision, aux);
    const double H = evaluate_objective(s, p4.decision).H;
    res.trace.K.push_back(K);
    res.trace.H.push_back(H);
    res.trace.sweeps.push_back(p4.sweeps);
    res.trace.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    res.iterations = t;
    res.decision = std::move(p4.decision);
    if (std::abs(prev - K) < cfg.ao_tol * (1.0 + std::abs(K))) {
      res.converged = true;
      break;
    }
    prev = K;
  }
  res.kkt_residual = kkt_residual(s, res.decision, freeze_alpha);
  return res;
}

double kkt_residual(const Scenario& s, const Decision& dec, bool freeze_alpha) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const auto g = grad_H(s, dec);
  const double H = evaluate_objective(s, dec).H;
  const double layers = s.llm.layers;
  const double edge = 1e-9 * layers;
  double worst = 0.0;

  auto boxed = [](double x, double grad, double lo, double hi, double tol) {
    if (x <= lo + tol) return std::max(0.0, -grad);
    if (x >= hi - tol) return std::max(0.0, grad);
    return std::abs(grad);
  };

  for (std::size_t n = 0; n < N; ++n) {
    const auto& u = s.users[n];
    if (!freeze_alpha)
      worst = std::max(worst, layers * boxed(dec.alpha[n], g.alpha[n], 1.0, s.alpha_max(), edge));
    worst = std::max(worst, u.p_max * boxed(dec.power[n], g.power[n], 0.0, u.p_max,
                                            1e-12 * u.p_max));
    worst = std::max(worst, u.f_max * boxed(dec.freq_user[n], g.freq_user[n], 0.0, u.f_max,
                                            1e-12 * u.f_max));
  }
  for (std::size_t m = 0; m < M; ++m) {
    double blo = INFINITY, bhi = -INFINITY, flo = INFINITY, fhi = -INFINITY;
    for (std::size_t n = 0; n < N; ++n) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      blo = std::min(blo, g.bandwidth(n, m) / chi);
      bhi = std::max(bhi, g.bandwidth(n, m) / chi);
      if (layers - dec.alpha[n] > 0.0) {
        flo = std::min(flo, g.freq_edge(n, m) / chi);
        fhi = std::max(fhi, g.freq_edge(n, m) / chi);
      }
    }
    if (bhi >= blo) worst = std::max(worst, 0.5 * (bhi - blo) * s.servers[m].b_max);
    if (fhi >= flo) worst = std::max(worst, 0.5 * (fhi - flo) * s.servers[m].f_max);
  }
  return worst / (1.0 + std::abs(H));
}

}  // namespace mectune
