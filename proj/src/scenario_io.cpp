#include "mectune/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "mectune/assoc_solver.hpp"
#include "mectune/inner_solver.hpp"
#include "mectune/rng.hpp"

namespace mectune {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const json& member(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, j.is_null() ? "non-finite or null number" : "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "non-finite number");
  return v;
}

double num(const json& j, const std::string& key, const std::string& path) {
  return number(member(j, key, path), path + "." + key);
}

std::int64_t integer(const json& j, const std::string& key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

const json& array(const json& j, const std::string& key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_array()) fail(path + "." + key, "expected an array");
  return v;
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::vector<double> vec_from(const json& j, const std::string& key, const std::string& path) {
  const json& a = array(j, key, path);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(number(a[i], at(path + "." + key, i)));
  return out;
}

Matrix matrix_from(const json& j, const std::string& key, const std::string& path) {
  const json& a = array(j, key, path);
  const std::string p = path + "." + key;
  const std::size_t rows = a.size();
  const std::size_t cols = rows ? (a[0].is_array() ? a[0].size() : 0) : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!a[r].is_array() || a[r].size() != cols) fail(at(p, r), "ragged or non-array row");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = number(a[r][c], at(at(p, r), c));
  }
  return m;
}

json matrix_to(const Matrix& m) {
  json a = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

Point point_from(const json& j, const std::string& path) {
  const json& p = member(j, "pos", path);
  if (!p.is_array() || p.size() != 2) fail(path + ".pos", "expected [x, y]");
  return {number(p[0], path + ".pos[0]"), number(p[1], path + ".pos[1]")};
}

// Solution fields may legitimately hold inf (local-only stability bound).
json extended(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double extended_from(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    fail(path, "unrecognized number '" + s + "'");
  }
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

json vec_ext(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(extended(x));
  return a;
}

std::vector<double> vec_ext_from(const json& j, const std::string& key, const std::string& path) {
  const json& a = array(j, key, path);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(extended_from(a[i], at(path + "." + key, i)));
  return out;
}

void check_version(const json& j) {
  const auto v = integer(j, "version", "$");
  if (v != kSchemaVersion)
    fail("$.version", "schema version mismatch: expected " + std::to_string(kSchemaVersion) +
                          ", got " + std::to_string(v));
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& col) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("csv: bad number '" + s + "' in " + col);
  return v;
}

}  // namespace

void GenParams::validate() const {
  auto ordered = [](auto r, const char* what) {
    if (!(r.lo <= r.hi)) throw ValidationError(std::string("GenParams.") + what + ": empty range");
  };
  if (N < 1 || M < 1) throw ValidationError("GenParams: N and M must be >= 1");
  if (!(area_size > 0.0)) throw ValidationError("GenParams.area_size must be > 0");
  ordered(p_max, "p_max");
  ordered(user_f_max, "user_f_max");
  ordered(server_f_max, "server_f_max");
  ordered(tokens, "tokens");
  ordered(user_cores, "user_cores");
  ordered(server_cores, "server_cores");
  ordered(server_fpc, "server_fpc");
  ordered(dataset_size, "dataset_size");
  if (!(p_max.lo > 0.0) || !(user_f_max.lo > 0.0) || !(server_f_max.lo > 0.0) || !(b_max > 0.0))
    throw ValidationError("GenParams: power, frequency and bandwidth must be > 0");
  if (tokens.lo < 1 || user_cores.lo < 1 || server_cores.lo < 1 || server_fpc.lo < 1 ||
      dataset_size.lo < 1 || !(user_fpc > 0.0))
    throw ValidationError("GenParams: counts must be >= 1");
  if (!(wt >= 0.0) || !(we >= 0.0) || !(ws >= 0.0))
    throw ValidationError("GenParams: weights must be >= 0");
}

double path_loss_db(double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return 128.1 + 37.6 * std::log10(d / 1000.0);
}

double gain_from_distance(double distance_m) {
  return std::pow(10.0, -path_loss_db(distance_m) / 10.0);
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

Normalizers reference_normalizers(const Scenario& s) {
  const Decision dec = default_initial_decision(s, greedy_association(s));
  const double layers = s.llm.layers;
  Normalizers out{0.0, 0.0, 0.0};
  for (std::size_t n = 0; n < s.num_users(); ++n) {
    const double a = dec.alpha[n];
    const auto loc = local_layer_cost(s.users[n], dec.freq_user[n], s.llm);
    double delay = a * loc.delay;
    double energy = a * loc.energy + uplink_energy(s, dec, n);
    for (std::size_t m = 0; m < s.num_servers(); ++m) {
      if (dec.assoc(n, m) == 0.0) continue;
      const auto e = edge_layer_cost(s.servers[m], dec.freq_edge(n, m), s.users[n].tokens, s.llm);
      delay += (layers - a) * e.delay;
      energy += (layers - a) * e.energy;
    }
    out.delay = std::max(out.delay, delay);
    out.energy = std::max(out.energy, energy);
    out.stability = std::max(
        out.stability,
        as_bound(s.llm.lipschitz, static_cast<double>(s.users[n].dataset_size), a, s.llm.layers));
  }
  // Degenerate references (all-zero energy when kappa = 0, say) fall back to 1.
  for (double* v : {&out.delay, &out.energy, &out.stability})
    if (!(*v > 0.0) || !std::isfinite(*v)) *v = 1.0;
  return out;
}

Scenario generate(const GenParams& gp) {
  gp.validate();
  Rng rng(gp.seed);
  Scenario s;
  s.llm = gp.llm;
  s.users.resize(gp.N);
  s.servers.resize(gp.M);
  for (auto& e : s.servers) {
    e.position = {rng.uniform(0.0, gp.area_size), rng.uniform(0.0, gp.area_size)};
    e.cores = static_cast<double>(rng.integer(gp.server_cores.lo, gp.server_cores.hi));
    e.flops_per_cycle = static_cast<double>(rng.integer(gp.server_fpc.lo, gp.server_fpc.hi));
    e.f_max = rng.uniform(gp.server_f_max.lo, gp.server_f_max.hi);
    e.b_max = gp.b_max;
    e.kappa = gp.kappa_server;
  }
  for (auto& u : s.users) {
    u.position = {rng.uniform(0.0, gp.area_size), rng.uniform(0.0, gp.area_size)};
    u.tokens = rng.integer(gp.tokens.lo, gp.tokens.hi);
    u.cores = static_cast<double>(rng.integer(gp.user_cores.lo, gp.user_cores.hi));
    u.flops_per_cycle = gp.user_fpc;
    u.f_max = rng.uniform(gp.user_f_max.lo, gp.user_f_max.hi);
    u.p_max = rng.uniform(gp.p_max.lo, gp.p_max.hi);
    u.kappa = gp.kappa_user;
    u.dataset_size = rng.integer(gp.dataset_size.lo, gp.dataset_size.hi);
  }
  s.channel.gain = Matrix(gp.N, gp.M);
  for (std::size_t n = 0; n < gp.N; ++n)
    for (std::size_t m = 0; m < gp.M; ++m) {
      const double dx = s.users[n].position.x - s.servers[m].position.x;
      const double dy = s.users[n].position.y - s.servers[m].position.y;
      s.channel.gain(n, m) = gain_from_distance(std::hypot(dx, dy));
    }
  s.channel.noise_power = dbm_to_watt(gp.noise_dbm);
  s.channel.payload_scale = gp.payload_scale;
  s.weights = {gp.wt, gp.we, gp.ws, {}};
  s.weights.norm = reference_normalizers(s);
  s.validate();
  return s;
}

Scenario with_weights(const Scenario& s, double wt, double we, double ws) {
  Scenario out = s;
  out.weights.delay = wt;
  out.weights.energy = we;
  out.weights.stability = ws;
  return out;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["version"] = kSchemaVersion;
  j["llm"] = {{"layers", s.llm.layers}, {"batch", s.llm.batch}, {"hidden", s.llm.hidden},
              {"L", s.llm.lipschitz}};
  j["users"] = json::array();
  for (const auto& u : s.users)
    j["users"].push_back({{"d", u.tokens}, {"cores", u.cores}, {"fpc", u.flops_per_cycle},
                          {"fmax", u.f_max}, {"pmax", u.p_max}, {"kappa1", u.kappa},
                          {"k", u.dataset_size}, {"pos", {u.position.x, u.position.y}}});
  j["servers"] = json::array();
  for (const auto& e : s.servers)
    j["servers"].push_back({{"cores", e.cores}, {"fpc", e.flops_per_cycle}, {"fmax", e.f_max},
                            {"bmax", e.b_max}, {"kappa2", e.kappa},
                            {"pos", {e.position.x, e.position.y}}});
  j["channel"] = {{"gains", matrix_to(s.channel.gain)},
                  {"sigma2", s.channel.noise_power},
                  {"eta", s.channel.payload_scale}};
  j["weights"] = {{"wt", s.weights.delay},
                  {"we", s.weights.energy},
                  {"ws", s.weights.stability},
                  {"normalizers",
                   {{"delay", s.weights.norm.delay},
                    {"energy", s.weights.norm.energy},
                    {"stability", s.weights.norm.stability}}}};
  return j;
}

Scenario scenario_from_json(const json& j) {
  check_version(j);
  Scenario s;
  const json& llm = member(j, "llm", "$");
  s.llm.layers = static_cast<int>(integer(llm, "layers", "$.llm"));
  s.llm.batch = static_cast<int>(integer(llm, "batch", "$.llm"));
  s.llm.hidden = static_cast<int>(integer(llm, "hidden", "$.llm"));
  s.llm.lipschitz = num(llm, "L", "$.llm");

  const json& users = array(j, "users", "$");
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::string p = at("$.users", i);
    UserDevice u;
    u.tokens = integer(users[i], "d", p);
    u.cores = num(users[i], "cores", p);
    u.flops_per_cycle = num(users[i], "fpc", p);
    u.f_max = num(users[i], "fmax", p);
    u.p_max = num(users[i], "pmax", p);
    u.kappa = num(users[i], "kappa1", p);
    u.dataset_size = integer(users[i], "k", p);
    u.position = point_from(users[i], p);
    s.users.push_back(u);
  }
  const json& servers = array(j, "servers", "$");
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const std::string p = at("$.servers", i);
    EdgeServer e;
    e.cores = num(servers[i], "cores", p);
    e.flops_per_cycle = num(servers[i], "fpc", p);
    e.f_max = num(servers[i], "fmax", p);
    e.b_max = num(servers[i], "bmax", p);
    e.kappa = num(servers[i], "kappa2", p);
    e.position = point_from(servers[i], p);
    s.servers.push_back(e);
  }
  const json& ch = member(j, "channel", "$");
  s.channel.gain = matrix_from(ch, "gains", "$.channel");
  s.channel.noise_power = num(ch, "sigma2", "$.channel");
  s.channel.payload_scale = num(ch, "eta", "$.channel");

  const json& w = member(j, "weights", "$");
  s.weights.delay = num(w, "wt", "$.weights");
  s.weights.energy = num(w, "we", "$.weights");
  s.weights.stability = num(w, "ws", "$.weights");
  const json& nz = member(w, "normalizers", "$.weights");
  s.weights.norm.delay = num(nz, "delay", "$.weights.normalizers");
  s.weights.norm.energy = num(nz, "energy", "$.weights.normalizers");
  s.weights.norm.stability = num(nz, "stability", "$.weights.normalizers");
  s.validate();
  return s;
}

json decision_to_json(const Decision& d) {
  return {{"alpha", d.alpha},
          {"power", d.power},
          {"freq_user", d.freq_user},
          {"bandwidth", matrix_to(d.bandwidth)},
          {"freq_edge", matrix_to(d.freq_edge)},
          {"assoc", matrix_to(d.assoc)}};
}

Decision decision_from_json(const json& j, const std::string& path) {
  Decision d;
  d.alpha = vec_from(j, "alpha", path);
  d.power = vec_from(j, "power", path);
  d.freq_user = vec_from(j, "freq_user", path);
  d.bandwidth = matrix_from(j, "bandwidth", path);
  d.freq_edge = matrix_from(j, "freq_edge", path);
  d.assoc = matrix_from(j, "assoc", path);
  return d;
}

json solution_to_json(const Solution& sol) {
  const auto& b = sol.breakdown;
  json j;
  j["version"] = kSchemaVersion;
  j["decision"] = decision_to_json(sol.decision);
  j["breakdown"] = {{"user_cost", extended(b.user_cost)},
                    {"edge_cost", extended(b.edge_cost)},
                    {"stability_cost", extended(b.stability_cost)},
                    {"H", extended(b.H)},
                    {"delay_cost", extended(b.delay_cost)},
                    {"energy_cost", extended(b.energy_cost)},
                    {"total_delay", extended(b.total_delay)},
                    {"total_energy", extended(b.total_energy)},
                    {"total_stability", extended(b.total_stability)}};
  j["ao_traces"] = json::array();
  for (const auto& t : sol.ao_traces)
    j["ao_traces"].push_back({{"initial_H", extended(t.initial_H)},
                              {"K", vec_ext(t.K)},
                              {"H", vec_ext(t.H)},
                              {"wall_ms", t.wall_ms},
                              {"sweeps", t.sweeps}});
  j["cccp_traces"] = json::array();
  for (const auto& t : sol.cccp_traces)
    j["cccp_traces"].push_back(
        {{"penalized", vec_ext(t.penalized)}, {"rho", vec_ext(t.rho)}, {"gap", vec_ext(t.gap)}});
  j["outer_objective"] = vec_ext(sol.outer_objective);
  j["kkt_residual"] = extended(sol.kkt_residual);
  j["binarity_gap"] = extended(sol.binarity_gap);
  j["converged"] = sol.converged;
  j["wall_ms"] = sol.wall_ms;
  j["outer_rounds"] = sol.outer_rounds;
  j["ao_iters"] = sol.ao_iters;
  j["cccp_iters"] = sol.cccp_iters;
  j["avg_delay_s"] = extended(sol.avg_delay);
  return j;
}

Solution solution_from_json(const json& j) {
  check_version(j);
  Solution sol;
  sol.decision = decision_from_json(member(j, "decision", "$"), "$.decision");
  const json& b = member(j, "breakdown", "$");
  auto bd = [&](const char* k) { return extended_from(member(b, k, "$.breakdown"), std::string("$.breakdown.") + k); };
  sol.breakdown.user_cost = bd("user_cost");
  sol.breakdown.edge_cost = bd("edge_cost");
  sol.breakdown.stability_cost = bd("stability_cost");
  sol.breakdown.H = bd("H");
  sol.breakdown.delay_cost = bd("delay_cost");
  sol.breakdown.energy_cost = bd("energy_cost");
  sol.breakdown.total_delay = bd("total_delay");
  sol.breakdown.total_energy = bd("total_energy");
  sol.breakdown.total_stability = bd("total_stability");
  const json& ao = array(j, "ao_traces", "$");
  for (std::size_t i = 0; i < ao.size(); ++i) {
    const std::string p = at("$.ao_traces", i);
    AoTrace t;
    t.initial_H = extended_from(member(ao[i], "initial_H", p), p + ".initial_H");
    t.K = vec_ext_from(ao[i], "K", p);
    t.H = vec_ext_from(ao[i], "H", p);
    t.wall_ms = vec_from(ao[i], "wall_ms", p);
    for (const auto& v : array(ao[i], "sweeps", p)) t.sweeps.push_back(v.get<int>());
    sol.ao_traces.push_back(std::move(t));
  }
  const json& cc = array(j, "cccp_traces", "$");
  for (std::size_t i = 0; i < cc.size(); ++i) {
    const std::string p = at("$.cccp_traces", i);
    sol.cccp_traces.push_back(
        {vec_ext_from(cc[i], "penalized", p), vec_ext_from(cc[i], "rho", p), vec_ext_from(cc[i], "gap", p)});
  }
  sol.outer_objective = vec_ext_from(j, "outer_objective", "$");
  sol.kkt_residual = extended_from(member(j, "kkt_residual", "$"), "$.kkt_residual");
  sol.binarity_gap = extended_from(member(j, "binarity_gap", "$"), "$.binarity_gap");
  const json& conv = member(j, "converged", "$");
  if (!conv.is_boolean()) fail("$.converged", "expected a boolean");
  sol.converged = conv.get<bool>();
  sol.wall_ms = num(j, "wall_ms", "$");
  sol.outer_rounds = static_cast<int>(integer(j, "outer_rounds", "$"));
  sol.ao_iters = static_cast<int>(integer(j, "ao_iters", "$"));
  sol.cccp_iters = static_cast<int>(integer(j, "cccp_iters", "$"));
  sol.avg_delay = extended_from(member(j, "avg_delay_s", "$"), "$.avg_delay_s");
  return sol;
}

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Point at the last key before the fault so "fmax": NaN names fmax.
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    std::string key;
    const auto colon = text.rfind(':', end ? end - 1 : 0);
    if (colon != std::string::npos) {
      const auto q2 = text.rfind('"', colon);
      const auto q1 = q2 == std::string::npos || q2 == 0 ? std::string::npos : text.rfind('"', q2 - 1);
      if (q1 != std::string::npos) key = text.substr(q1 + 1, q2 - q1 - 1);
    }
    std::ostringstream os;
    os << "malformed JSON at byte " << e.byte;
    if (!key.empty()) os << " (field \"" << key << "\")";
    throw ValidationError(os.str());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  write_file_atomic(path, scenario_to_json(s).dump(2) + "\n");
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_text(read_file(path)));
}

void save_solution(const std::filesystem::path& path, const Solution& sol) {
  write_file_atomic(path, solution_to_json(sol).dump(2) + "\n");
}

Solution load_solution(const std::filesystem::path& path) {
  return solution_from_json(parse_json_text(read_file(path)));
}

ResultRow make_row(const Scenario& s, std::uint64_t seed, const std::string& method,
                   const Solution& sol) {
  ResultRow r;
  r.seed = seed;
  r.method = method;
  r.N = s.num_users();
  r.M = s.num_servers();
  r.omega_t = s.weights.delay;
  r.omega_e = s.weights.energy;
  r.omega_s = s.weights.stability;
  r.energy_J = sol.breakdown.total_energy;
  r.delay_s = sol.breakdown.total_delay;
  r.stability_bound = sol.breakdown.total_stability;
  r.objective = sol.breakdown.H;
  r.outer_rounds = sol.outer_rounds;
  r.ao_iters = sol.ao_iters;
  r.cccp_iters = sol.cccp_iters;
  r.kkt_residual = sol.kkt_residual;
  r.runtime_ms = sol.wall_ms;
  return r;
}

std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kResultColumns.size(); ++i) {
    if (i) h += ',';
    h += kResultColumns[i];
  }
  return h;
}

std::string csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.seed << ',' << r.method << ',' << r.N << ',' << r.M << ',' << fmt_double(r.omega_t)
     << ',' << fmt_double(r.omega_e) << ',' << fmt_double(r.omega_s) << ','
     << fmt_double(r.energy_J) << ',' << fmt_double(r.delay_s) << ','
     << fmt_double(r.stability_bound) << ',' << fmt_double(r.objective) << ',' << r.outer_rounds
     << ',' << r.ao_iters << ',' << r.cccp_iters << ',' << fmt_double(r.kkt_residual) << ','
     << fmt_double(r.runtime_ms);
  return os.str();
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += csv_line(r) + "\n";
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header())
    throw ValidationError("csv: header mismatch: expected '" + csv_header() + "', got '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != kResultColumns.size())
      throw ValidationError("csv: line " + std::to_string(lineno) + " has " +
                            std::to_string(f.size()) + " fields");
    ResultRow r;
    auto d = [&](std::size_t i) { return parse_double(f[i], kResultColumns[i]); };
    r.seed = std::stoull(f[0]);
    r.method = f[1];
    r.N = std::stoul(f[2]);
    r.M = std::stoul(f[3]);
    r.omega_t = d(4);
    r.omega_e = d(5);
    r.omega_s = d(6);
    r.energy_J = d(7);
    r.delay_s = d(8);
    r.stability_bound = d(9);
    r.objective = d(10);
    r.outer_rounds = std::stoi(f[11]);
    r.ao_iters = std::stoi(f[12]);
    r.cccp_iters = std::stoi(f[13]);
    r.kkt_residual = d(14);
    r.runtime_ms = d(15);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace mectune
