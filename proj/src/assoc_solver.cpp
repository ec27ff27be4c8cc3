#include "mectune/assoc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mectune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_finite_abs(const Matrix& c) {
  double m = 0.0;
  for (double v : c.values())
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  return m;
}

double penalty_sum(const Matrix& chi) {
  double s = 0.0;
  for (double v : chi.values()) s += v * (1.0 - v);
  return s;
}

// Row-by-row Dirichlet draw over allowed columns.
Matrix dirichlet_rows(const Matrix& cost, Rng& rng) {
  Matrix chi(cost.rows(), cost.cols());
  for (std::size_t n = 0; n < cost.rows(); ++n) {
    double sum = 0.0;
    for (std::size_t m = 0; m < cost.cols(); ++m) {
      if (!std::isfinite(cost(n, m))) continue;
      chi(n, m) = rng.exponential();
      sum += chi(n, m);
    }
    for (std::size_t m = 0; m < cost.cols(); ++m) chi(n, m) /= sum;
  }
  return chi;
}

void server_loads(const AssocLp& lp, const Matrix& chi, std::vector<double>& bl,
                  std::vector<double>& fl) {
  const std::size_t M = chi.cols();
  bl.assign(M, 0.0);
  fl.assign(M, 0.0);
  for (std::size_t n = 0; n < chi.rows(); ++n)
    for (std::size_t m = 0; m < M; ++m) {
      bl[m] += chi(n, m) * lp.bandwidth(n, m);
      fl[m] += chi(n, m) * lp.freq(n, m);
    }
}

Matrix blend_to_feasible(const AssocLp& lp, const Matrix& draw, const Matrix& vertex) {
  std::vector<double> bd, fd, bv, fv;
  server_loads(lp, draw, bd, fd);
  server_loads(lp, vertex, bv, fv);
  double t = 0.0;
  auto need = [&](double load, double vload, double cap) {
    if (load <= cap) return 0.0;
    return (load - cap) / (load - vload);
  };
  for (std::size_t m = 0; m < bd.size(); ++m) {
    t = std::max(t, need(bd[m], bv[m], lp.b_cap[m]));
    t = std::max(t, need(fd[m], fv[m], lp.f_cap[m]));
  }
  t = std::min(1.0, t);
  Matrix chi(draw.rows(), draw.cols());
  for (std::size_t i = 0; i < chi.values().size(); ++i)
    chi.values()[i] = (1.0 - t) * draw.values()[i] + t * vertex.values()[i];
  return chi;
}

}  // namespace

void PenaltyConfig::validate() const {
  if (!(rho_init > 0.0)) throw ValidationError("PenaltyConfig.rho_init must be > 0");
  if (!(rho_growth > 1.0)) throw ValidationError("PenaltyConfig.rho_growth must be > 1");
  if (!(binarity_tol > 0.0 && binarity_tol < 0.25))
    throw ValidationError("PenaltyConfig.binarity_tol must be in (0, 0.25)");
  if (max_cccp_iters < 1) throw ValidationError("PenaltyConfig.max_cccp_iters must be >= 1");
  if (restarts < 1) throw ValidationError("PenaltyConfig.restarts must be >= 1");
  if (!(move_tol > 0.0)) throw ValidationError("PenaltyConfig.move_tol must be > 0");
}

Matrix assoc_linear_costs(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double wt = s.weights.eff_delay();
  const double we = s.weights.eff_energy();
  const double layers = s.llm.layers;
  Matrix c(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    const double rest = layers - dec.alpha[n];
    for (std::size_t m = 0; m < M; ++m) {
      const double b = dec.bandwidth(n, m);
      const double f = dec.freq_edge(n, m);
      const double r = b > 0.0 ? uplink_rate(s.channel.gain(n, m), dec.power[n], b,
                                             s.channel.noise_power)
                                : 0.0;
      if (!(r > 0.0) || (rest > 0.0 && !(f > 0.0))) {
        c(n, m) = kInf;
        continue;
      }
      double v = we * transmit_energy(s.payload_bits(n), dec.power[n], r);
      if (rest > 0.0) {
        const auto e = edge_layer_cost(s.servers[m], f, s.users[n].tokens, s.llm);
        v += rest * (wt * e.delay + we * e.energy);
      }
      c(n, m) = v;
    }
  }
  return c;
}

double assoc_cost(const Matrix& costs, const Matrix& chi) {
  double g = 0.0;
  for (std::size_t i = 0; i < chi.values().size(); ++i) {
    const double x = chi.values()[i];
    if (x == 0.0) continue;
    g += x * costs.values()[i];
  }
  return g;
}

double PenaltyLinearization::value(const Matrix& chi) const {
  double v = constant;
  for (std::size_t i = 0; i < chi.values().size(); ++i) v += slope.values()[i] * chi.values()[i];
  return v;
}

PenaltyLinearization linearize_penalty(const Matrix& chi_prev) {
  PenaltyLinearization lin;
  lin.slope = Matrix(chi_prev.rows(), chi_prev.cols());
  for (std::size_t i = 0; i < chi_prev.values().size(); ++i) {
    const double x = chi_prev.values()[i];
    const double k = 2.0 * x - 1.0;
    lin.slope.values()[i] = k;
    lin.constant += x * (x - 1.0) - k * x;
  }
  return lin;
}

AssocLp make_assoc_lp(const Scenario& s, const Decision& dec, const Matrix& cost) {
  AssocLp lp;
  lp.cost = cost;
  lp.bandwidth = dec.bandwidth;
  lp.freq = dec.freq_edge;
  for (const auto& e : s.servers) {
    lp.b_cap.push_back(e.b_max);
    lp.f_cap.push_back(e.f_max);
  }
  return lp;
}

Matrix solve_lp(const AssocLp& in) {
  const std::size_t N = in.cost.rows();
  const std::size_t M = in.cost.cols();
  std::vector<std::size_t> var_of(N * M, SIZE_MAX);
  std::vector<std::size_t> cell;
  for (std::size_t n = 0; n < N; ++n) {
    bool any = false;
    for (std::size_t m = 0; m < M; ++m) {
      if (!std::isfinite(in.cost(n, m))) continue;
      var_of[n * M + m] = cell.size();
      cell.push_back(n * M + m);
      any = true;
    }
    if (!any) {
      std::ostringstream os;
      os << "assoc LP infeasible: user " << n << " has no admissible server";
      throw SolverError(os.str());
    }
  }
  const double scale = std::max(max_finite_abs(in.cost), 1e-300);

  std::vector<std::size_t> cap_rows;  // 2*m for bandwidth, 2*m+1 for frequency
  for (std::size_t m = 0; m < M; ++m) {
    for (int which = 0; which < 2; ++which) {
      const Matrix& coef = which == 0 ? in.bandwidth : in.freq;
      bool used = false;
      for (std::size_t n = 0; n < N; ++n)
        if (var_of[n * M + m] != SIZE_MAX && coef(n, m) > 0.0) used = true;
      if (used) cap_rows.push_back(2 * m + which);
    }
  }

  LinearProgram lp;
  lp.cost.resize(cell.size());
  for (std::size_t k = 0; k < cell.size(); ++k) lp.cost[k] = in.cost.values()[cell[k]] / scale;
  lp.A = Matrix(N + cap_rows.size(), cell.size());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = 0; m < M; ++m)
      if (var_of[n * M + m] != SIZE_MAX) lp.A(n, var_of[n * M + m]) = 1.0;
    lp.rhs.push_back(1.0);
    lp.kind.push_back(RowKind::Equal);
  }
  for (std::size_t r = 0; r < cap_rows.size(); ++r) {
    const std::size_t m = cap_rows[r] / 2;
    const bool bw = cap_rows[r] % 2 == 0;
    const Matrix& coef = bw ? in.bandwidth : in.freq;
    const double cap = bw ? in.b_cap[m] : in.f_cap[m];
    for (std::size_t n = 0; n < N; ++n)
      if (var_of[n * M + m] != SIZE_MAX) lp.A(N + r, var_of[n * M + m]) = coef(n, m) / cap;
    lp.rhs.push_back(1.0);
    lp.kind.push_back(RowKind::LessEqual);
  }

  const auto sol = simplex_solve(lp);
  Matrix chi(N, M);
  for (std::size_t k = 0; k < cell.size(); ++k) {
    double x = sol.x[k];
    if (x < 1e-12) x = 0.0;
    if (x > 1.0 - 1e-12) x = 1.0;
    chi.values()[cell[k]] = x;
  }
  return chi;
}

double binarity_gap(const Matrix& chi) {
  double g = 0.0;
  for (double v : chi.values()) g = std::max(g, v * (1.0 - v));
  return g;
}

bool capacities_hold(const AssocLp& lp, const Matrix& chi, double rel_tol) {
  std::vector<double> bl, fl;
  server_loads(lp, chi, bl, fl);
  for (std::size_t m = 0; m < bl.size(); ++m) {
    if (bl[m] > lp.b_cap[m] * (1.0 + rel_tol)) return false;
    if (fl[m] > lp.f_cap[m] * (1.0 + rel_tol)) return false;
  }
  return true;
}

Matrix round_association(const AssocLp& lp, const Matrix& chi, bool* capacity_ok) {
  const std::size_t N = chi.rows();
  const std::size_t M = chi.cols();
  Matrix out(N, M);
  std::vector<std::size_t> server(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < M; ++m)
      if (chi(n, m) > chi(n, best)) best = m;
    server[n] = best;
    out(n, best) = 1.0;
  }

  std::vector<double> bl, fl;
  auto over = [&](std::size_t m) {
    return bl[m] > lp.b_cap[m] * (1.0 + 1e-9) || fl[m] > lp.f_cap[m] * (1.0 + 1e-9);
  };
  auto fits = [&](std::size_t n, std::size_t m) {
    return bl[m] + lp.bandwidth(n, m) <= lp.b_cap[m] * (1.0 + 1e-9) &&
           fl[m] + lp.freq(n, m) <= lp.f_cap[m] * (1.0 + 1e-9);
  };
  server_loads(lp, out, bl, fl);
  bool ok = true;
  for (std::size_t m = 0; m < M; ++m) {
    while (over(m)) {
      // Move the member whose next-cheapest feasible server costs the least extra.
      double best_delta = kInf;
      std::size_t who = N, dest = M;
      for (std::size_t n = 0; n < N; ++n) {
        if (server[n] != m) continue;
        for (std::size_t k = 0; k < M; ++k) {
          if (k == m || !std::isfinite(lp.cost(n, k)) || !fits(n, k)) continue;
          const double delta = lp.cost(n, k) - lp.cost(n, m);
          if (delta < best_delta) {
            best_delta = delta;
            who = n;
            dest = k;
          }
        }
      }
      if (who == N) {
        ok = false;
        break;
      }
      out(who, m) = 0.0;
      out(who, dest) = 1.0;
      server[who] = dest;
      server_loads(lp, out, bl, fl);
    }
  }
  if (capacity_ok) *capacity_ok = ok;
  return out;
}

AssocResult cccp_associate(const AssocLp& lp, const Matrix& chi_init, const PenaltyConfig& cfg) {
  cfg.validate();
  const double maxc = max_finite_abs(lp.cost);
  double rho = cfg.rho_init * (maxc > 0.0 ? maxc : 1.0);
  AssocResult res;
  Matrix chi = chi_init;
  AssocLp sub = lp;
  for (int it = 1; it <= cfg.max_cccp_iters; ++it) {
    res.iterations = it;
    for (std::size_t i = 0; i < chi.values().size(); ++i) {
      const double c = lp.cost.values()[i];
      sub.cost.values()[i] = std::isfinite(c) ? c + rho * (1.0 - 2.0 * chi.values()[i]) : c;
    }
    Matrix next = solve_lp(sub);
    double move = 0.0;
    for (std::size_t i = 0; i < chi.values().size(); ++i)
      move = std::max(move, std::abs(next.values()[i] - chi.values()[i]));
    chi = std::move(next);
    const double gap = binarity_gap(chi);
    res.trace.penalized.push_back(assoc_cost(lp.cost, chi) + rho * penalty_sum(chi));
    res.trace.rho.push_back(rho);
    res.trace.gap.push_back(gap);
    if (move < cfg.move_tol) {
      if (gap <= cfg.binarity_tol) {
        res.binary = true;
        break;
      }
      rho *= cfg.rho_growth;
    }
  }
  res.binarity_gap = binarity_gap(chi);
  double worst = -1.0;
  for (std::size_t n = 0; n < chi.rows(); ++n)
    for (std::size_t m = 0; m < chi.cols(); ++m)
      if (chi(n, m) * (1.0 - chi(n, m)) > worst) {
        worst = chi(n, m) * (1.0 - chi(n, m));
        res.worst_entry_row = n;
        res.worst_entry_col = m;
      }
  res.assoc = round_association(lp, chi, &res.capacity_ok);
  res.objective = assoc_cost(lp.cost, res.assoc);
  return res;
}

AssocResult cccp_associate(const Scenario& s, const Decision& dec, const Matrix& chi_init,
                           const PenaltyConfig& cfg) {
  return cccp_associate(make_assoc_lp(s, dec, assoc_linear_costs(s, dec)), chi_init, cfg);
}

Matrix random_feasible_start(const AssocLp& lp, std::uint64_t seed, std::uint64_t r) {
  if (r == 0) return solve_lp(lp);
  Rng rng(seed, r);
  return blend_to_feasible(lp, dirichlet_rows(lp.cost, rng), solve_lp(lp));
}

MultistartResult multistart_associate(const AssocLp& lp, const PenaltyConfig& cfg) {
  cfg.validate();
  const Matrix vertex = solve_lp(lp);
  MultistartResult out;
  bool have = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    // Start 0 is the relaxation vertex; the others are random draws pulled
    // toward it only as far as the capacities require.
    Rng rng(cfg.rng_seed, static_cast<std::uint64_t>(r));
    const Matrix start =
        r == 0 ? vertex : blend_to_feasible(lp, dirichlet_rows(lp.cost, rng), vertex);
    auto res = cccp_associate(lp, start, cfg);
    out.objectives.push_back(res.objective);
    // Flagged results only win when nothing clean is available.
    const bool clean = res.binary && res.capacity_ok;
    const bool best_clean = have && out.best.binary && out.best.capacity_ok;
    const bool take = !have || (clean && !best_clean) ||
                      (clean == best_clean && res.objective < out.best.objective);
    if (take) {
      out.best = std::move(res);
      out.best_start = static_cast<std::size_t>(r);
      have = true;
    }
  }
  return out;
}

MultistartResult multistart_associate(const Scenario& s, const Decision& dec,
                                      const PenaltyConfig& cfg) {
  return multistart_associate(make_assoc_lp(s, dec, assoc_linear_costs(s, dec)), cfg);
}

Matrix greedy_association(const Scenario& s) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  Matrix chi(N, M);
  std::vector<double> count(M, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t best = 0;
    double best_rate = -1.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double r = uplink_rate(s.channel.gain(n, m), s.users[n].p_max,
                                   s.servers[m].b_max / (count[m] + 1.0), s.channel.noise_power);
      if (r > best_rate) {
        best_rate = r;
        best = m;
      }
    }
    chi(n, best) = 1.0;
    count[best] += 1.0;
  }
  return chi;
}

Matrix random_association(const Scenario& s, Rng& rng) {
  Matrix chi(s.num_users(), s.num_servers());
  for (std::size_t n = 0; n < s.num_users(); ++n)
    chi(n, static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(s.num_servers()) - 1))) = 1.0;
  return chi;
}

}  // namespace mectune
