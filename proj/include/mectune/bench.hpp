#pragma once

// Proposed method, comparison baselines, and experiment sweeps.

#include <cstdint>
#include <string>
#include <vector>

#include "mectune/orchestrator.hpp"
#include "mectune/scenario_io.hpp"

namespace mectune {

enum class Method {
  proposed,
  alternating_opt,
  alpha_only,
  resource_only,
  greedy_assoc,
  random_assoc,
  local_only,
  edge_only,
};

const std::vector<Method>& all_methods();
std::string method_name(Method m);
/// Throws ValidationError listing the accepted names.
Method parse_method(const std::string& name);

/// Plain coordinate descent on H at the association in init.assoc: every
/// block is minimized exactly on H itself, no surrogate. Trace K holds H.
AoResult coordinate_descent_H(const Scenario& s, const Decision& init, const InnerConfig& cfg,
                              bool freeze_alpha = false);

/// Box-feasible random resources for the association in `assoc`.
Decision random_resources(const Scenario& s, const Matrix& assoc, Rng& rng);

/// Runs `m` on `s`. `seed` drives the random baselines and the multistart.
Solution run_method(const Scenario& s, Method m, const OrchestratorConfig& cfg,
                    std::uint64_t seed);

/// Scenario actually evaluated by `m` (local_only drops the stability weight).
Scenario evaluation_scenario(const Scenario& s, Method m);

enum class SweepKind { weights, users, servers };

struct SweepSpec {
  SweepKind kind = SweepKind::weights;
  char weight = 'e';             ///< 't', 'e' or 's' for weight sweeps
  std::vector<double> values;    ///< weight values, N values, or M values
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods;
  GenParams base;
  OrchestratorConfig solver;
  int jobs = 1;
};

struct FailureRow {
  std::uint64_t seed = 0;
  std::string method;
  double point = 0.0;
  std::string status;
  std::string message;
};

struct SweepOutput {
  std::vector<ResultRow> rows;
  std::vector<FailureRow> failures;
  std::vector<double> avg_delay;  ///< parallel to rows
  std::vector<double> points;     ///< sweep value of each row
  std::vector<Solution> solutions;  ///< parallel to rows
};

/// One row per (point, seed, method), sorted in that order.
SweepOutput run_sweep(const SweepSpec& spec);

std::string failures_csv(const std::vector<FailureRow>& rows);

/// Long-format convergence dump: one line per recorded iteration.
/// Columns: seed,N,M,stage,round,iteration,value.
std::string trace_csv(std::uint64_t seed, std::size_t N, std::size_t M, const Solution& sol);

/// Runs `count` independent tasks on up to `jobs` threads; task(i) must only
/// touch slot i of its outputs.
template <typename Task>
void parallel_for(std::size_t count, int jobs, Task&& task);

}  // namespace mectune

#include <atomic>
#include <exception>
#include <optional>
#include <thread>

namespace mectune {

template <typename Task>
void parallel_for(std::size_t count, int jobs, Task&& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace mectune
