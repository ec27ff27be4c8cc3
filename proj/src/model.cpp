#include "mectune/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mectune {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

std::string field(const char* group, std::size_t i, const char* name) {
  std::ostringstream os;
  os << group << "[" << i << "]." << name;
  return os.str();
}

}  // namespace

double alpha_clearance(int layers) { return 1e-3 * layers; }

double Scenario::alpha_max() const {
  return static_cast<double>(llm.layers) - alpha_clearance(llm.layers);
}

void Scenario::validate() const {
  require(llm.layers >= 2, "llm.layers must be >= 2");
  require(llm.batch >= 1, "llm.batch must be >= 1");
  require(llm.hidden >= 1, "llm.hidden must be >= 1");
  require(std::isfinite(llm.lipschitz) && llm.lipschitz >= 0.0, "llm.L must be >= 0");
  require(!users.empty(), "users must be nonempty");
  require(!servers.empty(), "servers must be nonempty");
  for (std::size_t n = 0; n < users.size(); ++n) {
    const auto& u = users[n];
    require(u.tokens >= 1, field("users", n, "d"));
    require(positive_finite(u.cores), field("users", n, "cores"));
    require(positive_finite(u.flops_per_cycle), field("users", n, "fpc"));
    require(positive_finite(u.f_max), field("users", n, "fmax"));
    require(positive_finite(u.p_max), field("users", n, "pmax"));
    require(std::isfinite(u.kappa) && u.kappa >= 0.0, field("users", n, "kappa1"));
    require(u.dataset_size >= 1, field("users", n, "k"));
  }
  for (std::size_t m = 0; m < servers.size(); ++m) {
    const auto& e = servers[m];
    require(positive_finite(e.cores), field("servers", m, "cores"));
    require(positive_finite(e.flops_per_cycle), field("servers", m, "fpc"));
    require(positive_finite(e.f_max), field("servers", m, "fmax"));
    require(positive_finite(e.b_max), field("servers", m, "bmax"));
    require(std::isfinite(e.kappa) && e.kappa >= 0.0, field("servers", m, "kappa2"));
  }
  require(channel.gain.rows() == users.size() && channel.gain.cols() == servers.size(),
          "channel.gains dimensions must be users x servers");
  for (double g : channel.gain.values()) require(positive_finite(g), "channel.gains must be > 0");
  require(positive_finite(channel.noise_power), "channel.sigma2 must be > 0");
  require(positive_finite(channel.payload_scale), "channel.eta must be > 0");
  const auto& w = weights;
  require(std::isfinite(w.delay) && w.delay >= 0.0, "weights.wt must be >= 0");
  require(std::isfinite(w.energy) && w.energy >= 0.0, "weights.we must be >= 0");
  require(std::isfinite(w.stability) && w.stability >= 0.0, "weights.ws must be >= 0");
  require(w.delay + w.energy + w.stability > 0.0, "weights must not all be zero");
  require(positive_finite(w.norm.delay) && positive_finite(w.norm.energy) &&
              positive_finite(w.norm.stability),
          "weights.normalizers must be > 0");
}

Decision Decision::zeros(std::size_t users, std::size_t servers) {
  Decision d;
  d.alpha.assign(users, 0.0);
  d.power.assign(users, 0.0);
  d.freq_user.assign(users, 0.0);
  d.bandwidth = Matrix(users, servers);
  d.freq_edge = Matrix(users, servers);
  d.assoc = Matrix(users, servers);
  return d;
}

unsigned __int128 flops_per_layer_exact(std::int64_t tokens, const LlmConfig& llm) {
  if (tokens < 1) throw DomainError("flops_per_layer: token count must be >= 1");
  using u128 = unsigned __int128;
  const u128 d = static_cast<u128>(tokens);
  const u128 b = static_cast<u128>(llm.batch);
  const u128 h = static_cast<u128>(llm.hidden);
  return 72 * b * d * h * h + 12 * b * d * d * h;
}

double flops_per_layer(std::int64_t tokens, const LlmConfig& llm) {
  return static_cast<double>(flops_per_layer_exact(tokens, llm));
}

LayerCost local_layer_cost(const UserDevice& user, double freq, const LlmConfig& llm) {
  if (!(freq > 0.0)) throw DomainError("local_layer_cost: frequency must be > 0");
  const double psi = flops_per_layer(user.tokens, llm);
  const double throughput = user.cores * user.flops_per_cycle;
  return {psi / (freq * throughput), user.kappa * freq * freq * psi / throughput};
}

LayerCost edge_layer_cost(const EdgeServer& server, double freq, std::int64_t tokens,
                          const LlmConfig& llm) {
  if (!(freq > 0.0)) throw DomainError("edge_layer_cost: frequency must be > 0");
  const double psi = flops_per_layer(tokens, llm);
  const double throughput = server.cores * server.flops_per_cycle;
  return {psi / (freq * throughput), server.kappa * freq * freq * psi / throughput};
}

double uplink_rate(double gain, double power, double bandwidth, double noise) {
  if (!(bandwidth > 0.0)) throw DomainError("uplink_rate: bandwidth must be > 0");
  if (power < 0.0) throw DomainError("uplink_rate: power must be >= 0");
  return bandwidth * std::log1p(gain * power / (noise * bandwidth)) / std::numbers::ln2;
}

double transmit_energy(double bits, double power, double rate) {
  if (power == 0.0) return 0.0;
  if (!(rate > 0.0)) throw InfeasibleLinkError("transmit_energy: zero rate with positive power");
  return bits * power / rate;
}

double uplink_energy(const Scenario& s, const Decision& dec, std::size_t n) {
  double total = 0.0;
  for (std::size_t m = 0; m < s.num_servers(); ++m) {
    const double chi = dec.assoc(n, m);
    if (chi == 0.0) continue;
    const double b = dec.bandwidth(n, m);
    const double r = b > 0.0 ? uplink_rate(s.channel.gain(n, m), dec.power[n], b,
                                           s.channel.noise_power)
                             : 0.0;
    if (!(r > 0.0)) {
      std::ostringstream os;
      os << "uplink_energy: user " << n << " associated with server " << m << " at zero rate";
      throw InfeasibleLinkError(os.str());
    }
    total += chi * s.payload_bits(n) * dec.power[n] / r;
  }
  return total;
}

double as_bound(double lipschitz, double dataset_size, double alpha, int layers) {
  if (alpha >= static_cast<double>(layers))
    throw DomainError("as_bound: alpha at or beyond the pole (alpha >= layers)");
  if (!(dataset_size > 0.0)) throw DomainError("as_bound: dataset size must be > 0");
  return 2.0 * lipschitz * lipschitz /
         (dataset_size * (1.0 - alpha / static_cast<double>(layers)));
}

std::string FeasibilityReport::describe() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& v : violations) {
    if (!first) os << "; ";
    first = false;
    os << v.constraint << "[" << v.index << "] by " << v.amount;
  }
  return os.str();
}

FeasibilityReport check_feasibility(const Scenario& s, const Decision& dec,
                                    const FeasibilityOptions& opt) {
  FeasibilityReport rep;
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  auto add = [&](const char* c, std::size_t i, double amount) {
    rep.violations.push_back({c, i, amount});
  };
  if (dec.alpha.size() != N || dec.power.size() != N || dec.freq_user.size() != N ||
      dec.assoc.rows() != N || dec.assoc.cols() != M || dec.bandwidth.rows() != N ||
      dec.bandwidth.cols() != M || dec.freq_edge.rows() != N || dec.freq_edge.cols() != M) {
    add("dimensions", 0, 1.0);
    return rep;
  }
  const double layers = s.llm.layers;
  const double a_hi = s.weights.stability > 0.0 ? s.alpha_max() : layers;
  const double tol = opt.tol;
  for (std::size_t n = 0; n < N; ++n) {
    const auto& u = s.users[n];
    const double a = dec.alpha[n];
    if (!std::isfinite(a) || a < 1.0 - tol) add("alpha_lower", n, 1.0 - a);
    // An integral alpha may sit at layers-1 even though the continuous clamp is layers-delta.
    const double hi = opt.integral ? (s.weights.stability > 0.0 ? layers - 1.0 : layers) : a_hi;
    if (a > hi + tol * layers) add("alpha_upper", n, a - hi);
    if (opt.integral && std::abs(a - std::round(a)) > 0.0) add("alpha_integer", n, a - std::round(a));
    if (!(dec.power[n] > 0.0)) add("power_positive", n, -dec.power[n]);
    if (dec.power[n] > u.p_max * (1.0 + tol)) add("power_max", n, dec.power[n] - u.p_max);
    if (!(dec.freq_user[n] > 0.0)) add("freq_user_positive", n, -dec.freq_user[n]);
    if (dec.freq_user[n] > u.f_max * (1.0 + tol)) add("freq_user_max", n, dec.freq_user[n] - u.f_max);
    double row = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (!std::isfinite(chi) || chi < -tol || chi > 1.0 + tol) add("assoc_box", n, chi);
      if (opt.integral && chi != 0.0 && chi != 1.0) add("assoc_binary", n, chi);
      if (chi > 0.0) {
        if (!(dec.bandwidth(n, m) > 0.0)) add("bandwidth_positive", n, dec.bandwidth(n, m));
        if (!(dec.freq_edge(n, m) > 0.0)) add("freq_edge_positive", n, dec.freq_edge(n, m));
      }
      row += chi;
    }
    if (std::abs(row - 1.0) > tol) add("assoc_row_sum", n, row - 1.0);
  }
  for (std::size_t m = 0; m < M; ++m) {
    const auto& e = s.servers[m];
    double bsum = 0.0, fsum = 0.0, members = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      bsum += dec.assoc(n, m) * dec.bandwidth(n, m);
      fsum += dec.assoc(n, m) * dec.freq_edge(n, m);
      members += dec.assoc(n, m);
    }
    if (bsum > e.b_max * (1.0 + tol)) add("bandwidth_capacity", m, bsum - e.b_max);
    if (fsum > e.f_max * (1.0 + tol)) add("freq_edge_capacity", m, fsum - e.f_max);
    if (opt.capacity_equality && members > 0.0) {
      if (bsum < e.b_max * (1.0 - tol)) add("bandwidth_capacity_eq", m, bsum - e.b_max);
      if (fsum < e.f_max * (1.0 - tol)) add("freq_edge_capacity_eq", m, fsum - e.f_max);
    }
  }
  return rep;
}

ObjectiveBreakdown evaluate_objective(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const std::size_t M = s.num_servers();
  const double wt = s.weights.eff_delay();
  const double we = s.weights.eff_energy();
  const double ws = s.weights.eff_stability();
  const double layers = s.llm.layers;

  ObjectiveBreakdown out;
  double delay = 0.0, energy = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = dec.alpha[n];
    const auto loc = local_layer_cost(s.users[n], dec.freq_user[n], s.llm);
    const double ecom = uplink_energy(s, dec, n);
    out.user_cost += a * (wt * loc.delay + we * loc.energy) + we * ecom;
    delay += a * loc.delay;
    energy += a * loc.energy + ecom;
    for (std::size_t m = 0; m < M; ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0 || layers - a == 0.0) continue;
      const auto edge = edge_layer_cost(s.servers[m], dec.freq_edge(n, m), s.users[n].tokens, s.llm);
      out.edge_cost += chi * (layers - a) * (wt * edge.delay + we * edge.energy);
      delay += chi * (layers - a) * edge.delay;
      energy += chi * (layers - a) * edge.energy;
    }
    if (a >= layers) {
      out.total_stability = std::numeric_limits<double>::infinity();
    } else {
      out.total_stability +=
          as_bound(s.llm.lipschitz, static_cast<double>(s.users[n].dataset_size), a, s.llm.layers);
    }
  }
  out.stability_cost = ws > 0.0 ? ws * out.total_stability : 0.0;
  out.total_delay = delay;
  out.total_energy = energy;
  out.delay_cost = wt * delay;
  out.energy_cost = we * energy;
  out.H = out.user_cost + out.edge_cost + out.stability_cost;
  return out;
}

ObjectiveBreakdown total_objective(const Scenario& s, const Decision& dec) {
  auto rep = check_feasibility(s, dec);
  if (!rep.ok()) throw InfeasibleDecision(std::move(rep));
  return evaluate_objective(s, dec);
}

double average_end_to_end_delay(const Scenario& s, const Decision& dec) {
  const std::size_t N = s.num_users();
  const double layers = s.llm.layers;
  double sum = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = dec.alpha[n];
    double d = a * local_layer_cost(s.users[n], dec.freq_user[n], s.llm).delay;
    for (std::size_t m = 0; m < s.num_servers(); ++m) {
      const double chi = dec.assoc(n, m);
      if (chi == 0.0) continue;
      const double r =
          uplink_rate(s.channel.gain(n, m), dec.power[n], dec.bandwidth(n, m), s.channel.noise_power);
      d += chi * s.payload_bits(n) / r;
      if (layers > a)
        d += chi * (layers - a) *
             edge_layer_cost(s.servers[m], dec.freq_edge(n, m), s.users[n].tokens, s.llm).delay;
    }
    sum += d;
  }
  return sum / static_cast<double>(N);
}

}  // namespace mectune
