// Command-line front end: scenario generation, single solves, sweeps,
// stability checks, and convergence traces.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "mectune/bench.hpp"
#include "mectune/stability_lab.hpp"

using namespace mectune;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t n = 50, m = 10;
  std::string weights;
  int restarts = 10;
  double tol = 1e-9;
  int max_iter = 200;
  std::string out;
  std::string format = "csv";
  int jobs = 1;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string("--") + what + ": not a number: '" + item + "'");
    }
  }
  if (v.empty()) throw ValidationError(std::string("--") + what + ": empty list");
  return v;
}

// Optional JSON file with "gen" and "solver" objects; flags given on the
// command line are applied afterwards.
void apply_config(const std::string& path, GenParams& gp, OrchestratorConfig& cfg) {
  if (path.empty()) return;
  const auto j = parse_json_text(read_file(path));
  if (!j.is_object()) throw ValidationError(path + ": top level must be an object");
  auto num = [&](const nlohmann::json& o, const char* key, auto& dst, const std::string& where) {
    if (!o.contains(key)) return;
    if (!o[key].is_number()) throw ValidationError(path + ": " + where + "." + key + " must be a number");
    dst = o[key].get<std::remove_reference_t<decltype(dst)>>();
  };
  if (j.contains("gen")) {
    const auto& g = j["gen"];
    num(g, "N", gp.N, "gen");
    num(g, "M", gp.M, "gen");
    num(g, "area_size", gp.area_size, "gen");
    num(g, "b_max", gp.b_max, "gen");
    num(g, "kappa_user", gp.kappa_user, "gen");
    num(g, "kappa_server", gp.kappa_server, "gen");
    num(g, "noise_dbm", gp.noise_dbm, "gen");
    num(g, "wt", gp.wt, "gen");
    num(g, "we", gp.we, "gen");
    num(g, "ws", gp.ws, "gen");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    num(s, "ao_tol", cfg.inner.ao_tol, "solver");
    num(s, "block_tol", cfg.inner.block_tol, "solver");
    num(s, "max_ao_iters", cfg.inner.max_ao_iters, "solver");
    num(s, "outer_tol", cfg.outer_tol, "solver");
    num(s, "max_outer", cfg.max_outer, "solver");
    num(s, "restarts", cfg.penalty.restarts, "solver");
  }
}

struct Setup {
  GenParams gp;
  OrchestratorConfig cfg;
};

bool given(const CLI::App& sub, const std::string& flag) {
  const auto* opt = sub.get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

Setup make_setup(const Common& c, const CLI::App& sub) {
  Setup st;
  apply_config(c.config, st.gp, st.cfg);
  st.gp.seed = c.seed;
  if (given(sub, "--n") || c.config.empty()) st.gp.N = c.n;
  if (given(sub, "--m") || c.config.empty()) st.gp.M = c.m;
  if (!c.weights.empty()) {
    const auto w = parse_list(c.weights, "weights");
    if (w.size() != 3) throw ValidationError("--weights expects wt,we,ws");
    st.gp.wt = w[0];
    st.gp.we = w[1];
    st.gp.ws = w[2];
  }
  if (given(sub, "--restarts")) st.cfg.penalty.restarts = c.restarts;
  if (given(sub, "--tol")) st.cfg.inner.ao_tol = c.tol;
  if (given(sub, "--max-iter")) st.cfg.inner.max_ao_iters = c.max_iter;
  st.cfg.seed = c.seed;
  st.gp.validate();
  st.cfg.validate();
  return st;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file_atomic(path, text);
}

void add_common(CLI::App* sub, Common& c, bool solver_flags) {
  sub->add_option("--config", c.config, "JSON file with \"gen\" and \"solver\" settings");
  sub->add_option("--seed", c.seed, "scenario and solver seed");
  sub->add_option("--n", c.n, "number of users");
  sub->add_option("--m", c.m, "number of edge servers");
  sub->add_option("--weights", c.weights, "wt,we,ws");
  sub->add_option("--out", c.out, "output path (default stdout)");
  if (!solver_flags) return;
  sub->add_option("--restarts", c.restarts, "association multistart count");
  sub->add_option("--tol", c.tol, "relative tolerance of the alternating solver");
  sub->add_option("--max-iter", c.max_iter, "iteration cap of the alternating solver");
  sub->add_option("--jobs", c.jobs, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Split fine-tuning planner for edge networks.\n"
      "Average delay is the mean over users of the per-user end-to-end delay: local\n"
      "compute + uplink transfer + edge compute."};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("generate", "write a seeded scenario as JSON");
  add_common(gen, c, false);

  std::string scenario_path, method_name_arg = "proposed";
  auto* sol = app.add_subcommand("solve", "solve one scenario with one method");
  add_common(sol, c, true);
  sol->add_option("--scenario", scenario_path, "scenario JSON (otherwise generated from --seed/--n/--m)");
  sol->add_option("--method", method_name_arg, "proposed, alternating_opt, alpha_only, resource_only, "
                                               "greedy_assoc, random_assoc, local_only, edge_only");
  sol->add_option("--format", c.format, "csv row or full json solution")->check(CLI::IsMember({"csv", "json"}));

  std::string kind = "we", values_arg, methods_arg;
  std::size_t seeds = 20;
  auto* sweep = app.add_subcommand("sweep", "results CSV over a weight, user or server sweep");
  add_common(sweep, c, true);
  sweep->add_option("--kind", kind, "wt, we, ws, users or servers")
      ->check(CLI::IsMember({"wt", "we", "ws", "users", "servers"}));
  sweep->add_option("--values", values_arg, "comma-separated sweep points (default 1..10 for weights)");
  sweep->add_option("--seeds", seeds, "seeds 1..S");
  sweep->add_option("--method", methods_arg, "comma-separated methods (default all)");

  StabilityGrid grid;
  auto* stab = app.add_subcommand("stability", "replace-one stability check on a toy fine-tuning task");
  stab->add_option("--seed", grid.seed, "seed");
  stab->add_option("--trials", grid.trials, "trials per grid cell");
  stab->add_option("--out", c.out, "output CSV (default stdout)");

  std::string servers_arg = "5,10,15";
  auto* trace = app.add_subcommand("trace", "per-iteration convergence dump of the proposed method");
  add_common(trace, c, true);
  trace->add_option("--servers", servers_arg, "comma-separated server counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) {
      const auto st = make_setup(c, *gen);
      emit(c.out, scenario_to_json(generate(st.gp)).dump(2) + "\n");
      return kExitOk;
    }
    if (*sol) {
      const auto st = make_setup(c, *sol);
      const Method m = parse_method(method_name_arg);
      Scenario s = scenario_path.empty() ? generate(st.gp) : load_scenario(scenario_path);
      if (!scenario_path.empty() && !c.weights.empty())
        s = with_weights(s, st.gp.wt, st.gp.we, st.gp.ws);
      const Solution result = run_method(s, m, st.cfg, c.seed);
      if (c.format == "json")
        emit(c.out, solution_to_json(result).dump(2) + "\n");
      else
        emit(c.out, results_csv({make_row(evaluation_scenario(s, m), c.seed, method_name(m), result)}));
      if (!result.converged) {
        std::cerr << "warning: iteration cap reached; partial result written\n";
        return kExitNonConvergence;
      }
      return kExitOk;
    }
    if (*sweep) {
      const auto st = make_setup(c, *sweep);
      SweepSpec spec;
      spec.base = st.gp;
      spec.solver = st.cfg;
      spec.jobs = c.jobs;
      if (kind == "users") {
        spec.kind = SweepKind::users;
      } else if (kind == "servers") {
        spec.kind = SweepKind::servers;
      } else {
        spec.kind = SweepKind::weights;
        spec.weight = kind[1];
      }
      if (!values_arg.empty()) {
        spec.values = parse_list(values_arg, "values");
      } else if (spec.kind == SweepKind::weights) {
        for (int v = 1; v <= 10; ++v) spec.values.push_back(v);
      } else if (spec.kind == SweepKind::users) {
        spec.values = {10, 20, 30, 40, 50};
      } else {
        spec.values = {5, 10, 15};
      }
      if (seeds == 0) throw ValidationError("--seeds must be >= 1");
      for (std::uint64_t k = 1; k <= seeds; ++k) spec.seeds.push_back(k);
      if (methods_arg.empty()) {
        spec.methods = all_methods();
      } else {
        std::stringstream ss(methods_arg);
        std::string item;
        while (std::getline(ss, item, ',')) spec.methods.push_back(parse_method(item));
      }
      const auto out = run_sweep(spec);
      emit(c.out, results_csv(out.rows));
      if (!out.failures.empty()) {
        const std::string side = (c.out.empty() || c.out == "-") ? "sweep" : c.out;
        write_file_atomic(side + ".failures.csv", failures_csv(out.failures));
        std::cerr << out.failures.size() << " task(s) failed or hit the iteration cap; see "
                  << side << ".failures.csv\n";
        return kExitNonConvergence;
      }
      return kExitOk;
    }
    if (*stab) {
      if (grid.trials < 1) throw ValidationError("--trials must be >= 1");
      emit(c.out, stability_csv(verify_as_bound(grid)));
      return kExitOk;
    }
    if (*trace) {
      auto st = make_setup(c, *trace);
      if (!given(*trace, "--n") && c.config.empty()) st.gp.N = 100;
      std::string text;
      bool converged = true;
      for (double mv : parse_list(servers_arg, "servers")) {
        GenParams gp = st.gp;
        gp.M = static_cast<std::size_t>(mv);
        const Solution result = solve(generate(gp), st.cfg);
        converged = converged && result.converged;
        std::string part = trace_csv(c.seed, gp.N, gp.M, result);
        if (!text.empty()) part.erase(0, part.find('\n') + 1);
        text += part;
      }
      emit(c.out, text);
      return converged ? kExitOk : kExitNonConvergence;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const StageError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
