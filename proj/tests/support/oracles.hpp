#pragma once

// Reference computations for the tests. Everything here is written from the
// cost formulas directly and shares no code with the library's evaluation path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mectune/model.hpp"
#include "mectune/rng.hpp"
#include "mectune/scenario_io.hpp"

namespace oracle {

using mectune::Decision;
using mectune::Scenario;

inline long double psi(const Scenario& s, std::size_t n) {
  const long double d = s.users[n].tokens, B = s.llm.batch, h = s.llm.hidden;
  return 72.0L * B * d * h * h + 12.0L * B * d * d * h;
}

inline long double rate(long double g, long double p, long double b, long double noise) {
  return b * std::log2(1.0L + g * p / (noise * b));
}

struct Parts {
  long double delay = 0, energy = 0, stability = 0, H = 0;
};

/// Weighted objective straight from the definitions, in long double.
inline Parts objective(const Scenario& s, const Decision& x) {
  const long double wt = s.weights.delay / s.weights.norm.delay;
  const long double we = s.weights.energy / s.weights.norm.energy;
  const long double ws = s.weights.stability / s.weights.norm.stability;
  const long double Y = s.llm.layers;
  Parts out;
  for (std::size_t n = 0; n < s.num_users(); ++n) {
    const auto& u = s.users[n];
    const long double a = x.alpha[n];
    const long double work = psi(s, n) / (u.cores * u.flops_per_cycle);
    const long double f = x.freq_user[n];
    out.delay += a * work / f;
    out.energy += a * u.kappa * f * f * work;
    for (std::size_t m = 0; m < s.num_servers(); ++m) {
      const long double chi = x.assoc(n, m);
      if (chi == 0) continue;
      const auto& e = s.servers[m];
      const long double r = rate(s.channel.gain(n, m), x.power[n], x.bandwidth(n, m), s.channel.noise_power);
      out.energy += chi * s.channel.payload_scale * u.tokens * x.power[n] / r;
      if (Y - a > 0) {
        const long double ework = psi(s, n) / (e.cores * e.flops_per_cycle);
        const long double fe = x.freq_edge(n, m);
        out.delay += chi * (Y - a) * ework / fe;
        out.energy += chi * (Y - a) * e.kappa * fe * fe * ework;
      }
    }
    const long double L = s.llm.lipschitz;
    out.stability += 2 * L * L / (u.dataset_size * (1 - a / Y));
  }
  out.H = wt * out.delay + we * out.energy + (ws > 0 ? ws * out.stability : 0.0L);
  return out;
}

/// Quadratic-transform surrogate in long double for the given auxiliaries
/// (z per user, nu and q per link); zero auxiliaries drop their term.
template <typename Aux>
long double surrogate(const Scenario& s, const Decision& x, const Aux& aux) {
  const long double wt = s.weights.delay / s.weights.norm.delay;
  const long double we = s.weights.energy / s.weights.norm.energy;
  const long double ws = s.weights.stability / s.weights.norm.stability;
  const long double Y = s.llm.layers;
  auto term = [](long double v, long double a, long double numer) {
    return a == 0 ? 0.0L : a * v * v + numer * numer / (4 * a);
  };
  long double K = 0;
  for (std::size_t n = 0; n < s.num_users(); ++n) {
    const auto& u = s.users[n];
    const long double a = x.alpha[n];
    const long double work = psi(s, n) / (u.cores * u.flops_per_cycle);
    const long double f = x.freq_user[n];
    K += term(a, aux.z[n], wt * work / f + we * u.kappa * f * f * work);
    const long double bits = s.channel.payload_scale * u.tokens;
    for (std::size_t m = 0; m < s.num_servers(); ++m) {
      const long double chi = x.assoc(n, m);
      if (chi == 0) continue;
      const auto& e = s.servers[m];
      if (we > 0) {
        const long double r = rate(s.channel.gain(n, m), x.power[n], x.bandwidth(n, m), s.channel.noise_power);
        const long double nu = aux.nu(n, m), pd = x.power[n] * bits;
        K += we * chi * (pd * pd * nu + 1 / (4 * r * r * nu));
      }
      if (Y - a > 0) {
        const long double ework = psi(s, n) / (e.cores * e.flops_per_cycle);
        const long double fe = x.freq_edge(n, m);
        K += chi * term(Y - a, aux.q(n, m), wt * ework / fe + we * e.kappa * fe * fe * ework);
      }
    }
    const long double L = s.llm.lipschitz;
    if (ws > 0) K += ws * 2 * L * L / (u.dataset_size * (1 - a / Y));
  }
  return K;
}

/// Strictly interior random decision: alpha inside (1, alpha_max), powers
/// and frequencies inside their boxes, fractional association, and per-server
/// splits that use part of each capacity.
inline Decision random_interior(const Scenario& s, mectune::Rng& rng) {
  const std::size_t N = s.num_users(), M = s.num_servers();
  auto d = Decision::zeros(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    d.alpha[n] = rng.uniform(1.05, s.alpha_max() - 0.05);
    d.power[n] = s.users[n].p_max * rng.uniform(0.05, 0.95);
    d.freq_user[n] = s.users[n].f_max * rng.uniform(0.05, 0.95);
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) sum += (d.assoc(n, m) = rng.uniform(0.05, 1.0));
    for (std::size_t m = 0; m < M; ++m) d.assoc(n, m) /= sum;
  }
  for (std::size_t m = 0; m < M; ++m) {
    double load = 0.0;
    for (std::size_t n = 0; n < N; ++n) load += d.assoc(n, m);
    for (std::size_t n = 0; n < N; ++n) {
      d.bandwidth(n, m) = s.servers[m].b_max / load * rng.uniform(0.1, 0.9);
      d.freq_edge(n, m) = s.servers[m].f_max / load * rng.uniform(0.1, 0.9);
    }
  }
  return d;
}

/// Central difference with one Richardson step: (4 D(h/2) - D(h)) / 3. The
/// divisor is the realized step between the two rounded abscissae.
template <typename F>
double derivative(F&& f, double x, double h) {
  auto D = [&](double step) {
    const double xp = x + step, xm = x - step;
    return static_cast<double>((static_cast<long double>(f(xp)) - f(xm)) / (xp - xm));
  };
  return (4.0 * D(0.5 * h) - D(h)) / 3.0;
}

/// Visits every continuous coordinate of a decision: fn(name, n, m, ref).
template <typename Fn>
void for_each_coordinate(Decision& d, Fn&& fn) {
  for (std::size_t n = 0; n < d.num_users(); ++n) {
    fn("alpha", n, 0, d.alpha[n]);
    fn("power", n, 0, d.power[n]);
    fn("freq_user", n, 0, d.freq_user[n]);
    for (std::size_t m = 0; m < d.num_servers(); ++m) {
      fn("bandwidth", n, m, d.bandwidth(n, m));
      fn("freq_edge", n, m, d.freq_edge(n, m));
    }
  }
}

/// Exhaustive optimum over integer alpha, single-server associations, and
/// 20-point grids for every continuous variable. Uses the separable structure
/// of H at fixed (alpha, chi): user frequencies are independent, and each
/// server's bandwidth/power and frequency splits are independent of the
/// other servers. Capacities are split on a 20-point grid of fractions.
inline double grid_optimum(const Scenario& s, int grid = 20) {
  const std::size_t N = s.num_users(), M = s.num_servers();
  const int Y = s.llm.layers;
  const int a_hi = s.weights.stability > 0 ? Y - 1 : Y;
  const long double wt = s.weights.delay / s.weights.norm.delay;
  const long double we = s.weights.energy / s.weights.norm.energy;
  const long double ws = s.weights.stability / s.weights.norm.stability;
  auto level = [&](int k) { return static_cast<long double>(k) / grid; };

  // Per-user local cost per layer at the best grid frequency.
  std::vector<long double> local(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& u = s.users[n];
    const long double work = psi(s, n) / (u.cores * u.flops_per_cycle);
    long double best = std::numeric_limits<long double>::infinity();
    for (int k = 1; k <= grid; ++k) {
      const long double f = u.f_max * level(k);
      best = std::min(best, wt * work / f + we * u.kappa * f * f * work);
    }
    local[n] = best;
  }
  auto edge_per_layer = [&](std::size_t n, std::size_t m, long double f) {
    const auto& e = s.servers[m];
    const long double work = psi(s, n) / (e.cores * e.flops_per_cycle);
    return wt * work / f + we * e.kappa * f * f * work;
  };
  auto uplink = [&](std::size_t n, std::size_t m, long double b) {
    long double best = std::numeric_limits<long double>::infinity();
    for (int k = 1; k <= grid; ++k) {
      const long double p = s.users[n].p_max * level(k);
      best = std::min(best, we * s.channel.payload_scale * s.users[n].tokens * p /
                                rate(s.channel.gain(n, m), p, b, s.channel.noise_power));
    }
    return best;
  };
  // Splits of a capacity among the members: fractions on the grid, last member takes the rest.
  auto best_split = [&](const std::vector<std::size_t>& members, long double cap,
                        const std::function<long double(std::size_t, long double)>& cost) {
    long double best = std::numeric_limits<long double>::infinity();
    std::vector<int> k(members.size(), 1);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
      if (i + 1 == members.size()) {
        const int rest = grid - used;
        if (rest < 1) return;
        long double total = 0;
        for (std::size_t j = 0; j + 1 < members.size(); ++j) total += cost(members[j], cap * level(k[j]));
        total += cost(members[i], cap * level(rest));
        best = std::min(best, total);
        return;
      }
      for (int v = 1; used + v < grid; ++v) {
        k[i] = v;
        rec(i + 1, used + v);
      }
    };
    if (members.empty()) return 0.0L;
    rec(0, 0);
    return best;
  };

  long double best = std::numeric_limits<long double>::infinity();
  std::vector<int> alpha(N, 1);
  std::vector<std::size_t> server(N, 0);
  std::function<void(std::size_t)> pick_alpha, pick_server;
  auto evaluate = [&]() {
    long double H = 0;
    for (std::size_t n = 0; n < N; ++n) {
      H += alpha[n] * local[n];
      if (ws > 0) {
        const long double L = s.llm.lipschitz;
        H += ws * 2 * L * L / (s.users[n].dataset_size * (1 - static_cast<long double>(alpha[n]) / Y));
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<std::size_t> members;
      for (std::size_t n = 0; n < N; ++n)
        if (server[n] == m) members.push_back(n);
      H += best_split(members, s.servers[m].f_max, [&](std::size_t n, long double f) {
        return (Y - alpha[n]) > 0 ? (Y - alpha[n]) * edge_per_layer(n, m, f) : 0.0L;
      });
      H += best_split(members, s.servers[m].b_max,
                      [&](std::size_t n, long double b) { return uplink(n, m, b); });
    }
    best = std::min(best, H);
  };
  pick_server = [&](std::size_t n) {
    if (n == N) return evaluate();
    for (std::size_t m = 0; m < M; ++m) {
      server[n] = m;
      pick_server(n + 1);
    }
  };
  pick_alpha = [&](std::size_t n) {
    if (n == N) return pick_server(0);
    for (int a = 1; a <= a_hi; ++a) {
      alpha[n] = a;
      pick_alpha(n + 1);
    }
  };
  pick_alpha(0);
  return static_cast<double>(best);
}

/// Exhaustive minimum of sum chi c over binary row-stochastic chi meeting the
/// capacity rows sum_n chi b <= b_cap, sum_n chi f <= f_cap (relative slack 1e-9).
inline double exhaustive_assignment(const mectune::Matrix& cost, const mectune::Matrix& bw,
                                    const mectune::Matrix& fq, const std::vector<double>& b_cap,
                                    const std::vector<double>& f_cap) {
  const std::size_t N = cost.rows(), M = cost.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(N, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t n) {
    if (n == N) {
      std::vector<double> b(M, 0.0), f(M, 0.0);
      double G = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t m = pick[i];
        if (!std::isfinite(cost(i, m))) return;
        G += cost(i, m);
        b[m] += bw(i, m);
        f[m] += fq(i, m);
      }
      for (std::size_t m = 0; m < M; ++m)
        if (b[m] > b_cap[m] * (1 + 1e-9) || f[m] > f_cap[m] * (1 + 1e-9)) return;
      best = std::min(best, G);
      return;
    }
    for (std::size_t m = 0; m < M; ++m) {
      pick[n] = m;
      rec(n + 1);
    }
  };
  rec(0);
  return best;
}

}  // namespace oracle
