#include "mectune/fpcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mectune {

namespace {

constexpr double kLn2 = std::numbers::ln2;

// log(1+x) - x/(1+x), accurate for tiny x.
double rate_bandwidth_core(double x) {
  if (x < 1e-4) {
    // sum_{k>=2} (-1)^k (k-1)/k x^k
    return x * x * (0.5 - x * (2.0 / 3.0 - x * (0.75 - x * 0.8)));
  }
  return std::log1p(x) - x / (1.0 + x);
}

double throughput(const UserDevice& u) { return u.cores * u.flops_per_cycle; }
double throughput(const EdgeServer& e) { return e.cores * e.flops_per_cycle; }

void require_interior_freq(double f, const char* what) {
  if (!(f > 0.0)) throw DomainError(std::string(what) + ": frequency must be > 0");
}

// Value of w x^2 + c^2/(4w) with the zero-numerator convention.
double fp_term(double x, double aux, double numer) {
  if (aux == 0.0) {
    if (numer == 0.0) return 0.0;
    throw DomainError("surrogate_K: auxiliary variable must be > 0");
  }
  if (aux < 0.0) throw DomainError("surrogate_K: auxiliary variable must be > 0");
  return aux * x * x + numer * numer / (4.0 * aux);
}

LinkRate member_link(const Scenario& s, const Decision& dec, std::size_t n, std::size_t m) {
  const double b = dec.bandwidth(n, m);
  const double p = dec.power[n];
  if (!(b > 0.0) || !(p > 0.0)) {
    std::ostringstream os;
    os << "boundary point: link (" << n << "," << m << ") has p=" << p << " b=" << b;
    throw DomainError(os.str());
  }
  return link_rate(s.channel.gain(n, m), p, b, s.channel.noise_power);
}

}  // namespace

GradientBundle GradientBundle::zeros(std::size_t users, std::size_t servers) {
  GradientBundle g;
  g.alpha.assign(users, 0.0);
  g.power.assign(users, 0.0);
  g.freq_user.assign(users, 0.0);
  g.bandwidth = Matrix(users, servers);
  g.freq_edge = Matrix(users, servers);
  return g;
}

double GradientBundle::max_abs() const {
  double m = 0.0;
  for (const auto* v : {&alpha, &power, &freq_user})
    for (double x : *v) m = std::max(m, std::abs(x));
  for (const auto* v : {&bandwidth, &freq_edge})
    for (double x : v->values()) m = std::max(m, std::abs(x));
  return m;
}

LinkRate link_rate(double gain, double power, double bandwidth, double noise) {
  if (!(bandwidth > 0.0)) throw DomainError("link_rate: bandwidth must be > 0");
  const double x = gain * power / (noise * bandwidth);
  LinkRate lr;
  lr.rate = bandwidth * std::log1p(x) / kLn2;
  lr.d_power = gain / (noise * (1.0 + x) * kLn2);
  lr.d_bandwidth = rate_bandwidth_core(x) / kLn2;
  return lr;
}

double local_cost_per_layer(const UserDevice& u, double f, const LlmConfig& llm, double wt,
                            double we) {
  require_interior_freq(f, "A(f)");
  const double psi = flops_per_layer(u.tokens, llm);
  const double cd = throughput(u);
  return wt * psi / (f * cd) + we * u.kappa * f * f * psi / cd;
}

double local_cost_per_layer_deriv(const UserDevice& u, double f, const LlmConfig& llm, double wt,
                                  double we) {
  require_interior_freq(f, "A'(f)");
  const double psi = flops_per_layer(u.tokens, llm);
  const double cd = throughput(u);
  return -wt * psi / (f * f * cd) + 2.0 * we * u.kappa * f * psi / cd;
}

double edge_cost_per_layer(const EdgeServer& e, double f, std::int64_t tokens,
                           const LlmConfig& llm, double wt, double we) {
  require_interior_freq(f, "B(f)");
  const double psi = flops_per_layer(tokens, llm);
  const double cd = throughput(e);
  return wt * psi / (f * cd) + we * e.kappa * f * f * psi / cd;
}

double edge_cost_per_layer_deriv(const EdgeServer& e, double f, std::int64_t tokens,
                                 const LlmConfig& llm, double wt, double we) {
  require_interior_freq(f, "B'(f)");
  const double psi = flops_per_layer(tokens, llm);
  const double cd = throughput(e);
  return -wt * psi / (f * f * cd) + 2.0 * we * e.kappa * f * psi / cd;
}

double A_of(const Scenario& s, std::size_t n, double f) {
  return local_cost_per_layer(s.users[n], f, s.llm, s.weights.eff_delay(),
                              s.weights.eff_energy());
}

double B_of(const Scenario& s, std::size_t n, std::size_t m, double f) {
  return edge_cost_per_layer(s.servers[m], f, s.users[n].tokens, s.llm, s.weights.eff_delay(),
                             s.weights.eff_energy());
}

double stability_term(const Scenario& s, std::size_t n, double alpha) {
  const double ws = s.weights.eff_stability();
  if (ws == 0.0) return 0.0;
  return ws * as_bound(s.llm.lipschitz, static_cast<double>(s.users[n].dataset_size), alpha,
                       s.llm.layers);
}

double stability_term_deriv(const Scenario& s, std::size_t n, double alpha) {
  const double ws = s.weights.eff_stability();
  if (ws == 0.0) return 0.0;
  const double layers = s.llm.layers;
  if (alpha >= layers) throw DomainError("stability derivative: alpha at the pole");
  const double L = s.llm.lipschitz;
  const double k = static_cast<double>(s.users[n].dataset_size);
  const double gap = 1.0 - alpha / layers;
  return ws * 2.0 * L * L / (k * layers * gap * gap);
}

AuxVars aux_optimal(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double we = s.weights.eff_energy();
  const double layers = s.llm.layers;
  AuxVars aux;
  aux.z.assign(N, 0.0);
  aux.nu = Matrix(N, M);
  aux.q = Matrix(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    const double a = dec.alpha[n];
    if (!(a > 0.0)) throw DomainError("aux_optimal: alpha must be > 0");
    aux.z[n] = A_of(s, n, dec.freq_user[n]) / (2.0 * a);
    for (std::size_t m = 0; m < M; ++m) {
      if (dec.assoc(n, m) == 0.0) continue;
      if (we > 0.0) {
        const auto lr = member_link(s, dec, n, m);
        if (!(lr.rate > 0.0)) throw DomainError("aux_optimal: zero rate on an active link");
        aux.nu(n, m) = 1.0 / (2.0 * dec.power[n] * s.payload_bits(n) * lr.rate);
      }
      // alpha == layers leaves nothing on the edge; the term vanishes.
      if (!(layers - a > 0.0)) continue;
      const double B = B_of(s, n, m, dec.freq_edge(n, m));
      if (B == 0.0) continue;
      aux.q(n, m) = B / (2.0 * (layers - a));
    }
  }
  return aux;
}

double surrogate_K(const Scenario& s, const Decision& dec, const AuxVars& aux) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double we = s.weights.eff_energy();
  const double layers = s.llm.layers;
  double K = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = dec.alpha[n];
    K += fp_term(a, aux.z[n], A_of(s, n, dec.freq_user[n]));
    const double bits = s.payload_bits(n);
    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      if (we > 0.0) {
        const double nu = aux.nu(n, m);
        if (!(nu > 0.0)) throw DomainError("surrogate_K: nu must be > 0");
        const auto lr = member_link(s, dec, n, m);
        const double pd = dec.power[n] * bits;
        K += we * chi * (pd * pd * nu + 1.0 / (4.0 * lr.rate * lr.rate * nu));
      }
      if (layers - a > 0.0) K += chi * fp_term(layers - a, aux.q(n, m), B_of(s, n, m, dec.freq_edge(n, m)));
    }
    K += stability_term(s, n, a);
  }
  return K;
}

GradientBundle grad_K(const Scenario& s, const Decision& dec, const AuxVars& aux) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double wt = s.weights.eff_delay();
  const double we = s.weights.eff_energy();
  const double layers = s.llm.layers;
  auto g = GradientBundle::zeros(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& u = s.users[n];
    const double a = dec.alpha[n];
    const double f = dec.freq_user[n];
    const double A = A_of(s, n, f);
    const double bits = s.payload_bits(n);

    g.alpha[n] = stability_term_deriv(s, n, a) + 2.0 * aux.z[n] * a;
    if (aux.z[n] > 0.0)
      g.freq_user[n] =
          A * local_cost_per_layer_deriv(u, f, s.llm, wt, we) / (2.0 * aux.z[n]);

    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      const double q = aux.q(n, m);
      g.alpha[n] -= 2.0 * chi * q * (layers - a);
      if (q > 0.0) {
        const double fe = dec.freq_edge(n, m);
        const double B = B_of(s, n, m, fe);
        g.freq_edge(n, m) = chi * B *
                            edge_cost_per_layer_deriv(s.servers[m], fe, u.tokens, s.llm, wt, we) /
                            (2.0 * q);
      }
      if (we > 0.0) {
        const double nu = aux.nu(n, m);
        const auto lr = member_link(s, dec, n, m);
        const double r3 = lr.rate * lr.rate * lr.rate;
        g.power[n] += we * chi *
                      (2.0 * bits * bits * nu * dec.power[n] - lr.d_power / (2.0 * r3 * nu));
        g.bandwidth(n, m) = -we * chi * lr.d_bandwidth / (2.0 * r3 * nu);
      }
    }
  }
  return g;
}

GradientBundle grad_H(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double wt = s.weights.eff_delay();
  const double we = s.weights.eff_energy();
  const double layers = s.llm.layers;
  auto g = GradientBundle::zeros(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& u = s.users[n];
    const double a = dec.alpha[n];
    const double f = dec.freq_user[n];
    const double bits = s.payload_bits(n);

    g.alpha[n] = A_of(s, n, f) + stability_term_deriv(s, n, a);
    g.freq_user[n] = a * local_cost_per_layer_deriv(u, f, s.llm, wt, we);
    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      const double fe = dec.freq_edge(n, m);
      g.alpha[n] -= chi * B_of(s, n, m, fe);
      g.freq_edge(n, m) =
          chi * (layers - a) * edge_cost_per_layer_deriv(s.servers[m], fe, u.tokens, s.llm, wt, we);
      if (we > 0.0) {
        const auto lr = member_link(s, dec, n, m);
        const double r2 = lr.rate * lr.rate;
        // d(p/r)/dp = (r - p r_p)/r^2 = b r_b / r^2.
        g.power[n] += we * chi * bits * dec.bandwidth(n, m) * lr.d_bandwidth / r2;
        g.bandwidth(n, m) = -we * chi * bits * dec.power[n] * lr.d_bandwidth / r2;
      }
    }
  }
  return g;
}

}  // namespace mectune
