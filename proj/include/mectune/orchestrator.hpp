#pragma once

// Outer loop: continuous variables by the alternating surrogate solver at a
// fixed association, then the association by penalized CCCP at fixed
// continuous variables, repeated; alpha is rounded once at the end and the
// remaining variables re-optimized.

#include <cstdint>
#include <vector>

#include "mectune/assoc_solver.hpp"
#include "mectune/inner_solver.hpp"
#include "mectune/model.hpp"

namespace mectune {

struct OrchestratorConfig {
  InnerConfig inner;
  PenaltyConfig penalty;
  double outer_tol = 1e-5;  ///< relative objective change that ends the outer loop
  int max_outer = 20;
  std::uint64_t seed = 0;

  OrchestratorConfig() { penalty.restarts = 10; }
  void validate() const;
};

struct Solution {
  Decision decision;
  ObjectiveBreakdown breakdown;
  std::vector<AoTrace> ao_traces;      ///< one per continuous solve, polish last
  std::vector<CccpTrace> cccp_traces;  ///< winning start of each association step
  std::vector<double> outer_objective; ///< H after each accepted continuous solve
  double kkt_residual = 0.0;
  double binarity_gap = 0.0;
  bool converged = false;
  double wall_ms = 0.0;
  int outer_rounds = 0;
  int ao_iters = 0;
  int cccp_iters = 0;
  double avg_delay = 0.0;
};

/// Nearest integer in {1, ..., layers-1} (omega_s > 0) or {1, ..., layers}.
Decision round_alpha(const Scenario& s, const Decision& dec);

/// Decision staged for the association step: every pair is priced at the
/// equal share cap/(n+1) its server would give with one more user, so the
/// capacity rows reduce to "at most n+1 users" and every LP vertex is binary.
Decision prospective_decision(const Scenario& s, const Decision& dec);

/// Keeps alpha, p and f^U; splits b and f^E equally among the users of `assoc`.
Decision rebalance(const Scenario& s, const Decision& dec, const Matrix& assoc);

/// Rounds alpha, polishes with alpha frozen, and fills in the breakdown.
/// Updates sol.decision, breakdown, kkt_residual, ao_traces, ao_iters, avg_delay.
void finalize(const Scenario& s, Solution& sol, const InnerConfig& inner, bool round = true);

Solution solve(const Scenario& s, const OrchestratorConfig& cfg = {});

}  // namespace mectune
