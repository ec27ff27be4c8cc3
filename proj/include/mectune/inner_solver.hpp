#pragma once

// Continuous step for a fixed association: block-coordinate minimization of
// the convex surrogate K, wrapped in the alternating loop that refreshes the
// auxiliary variables until the surrogate value settles at a stationary
// point of H.

#include <cstddef>
#include <vector>

#include "mectune/fpcore.hpp"
#include "mectune/model.hpp"

namespace mectune {

struct InnerConfig {
  double block_tol = 1e-8;   ///< relative K decrease that ends the block sweeps
  double ao_tol = 1e-9;      ///< relative change in K that ends the AO loop
  int max_block_sweeps = 100;
  int max_ao_iters = 200;
  double bisect_tol = 1e-12; ///< relative capacity error accepted by multiplier bisection

  void validate() const;
};

struct AoTrace {
  double initial_H = 0.0;
  std::vector<double> K;        ///< K(dec_{t+1}, aux_t) after each convex solve
  std::vector<double> H;        ///< H(dec_{t+1}) = K(dec_{t+1}, aux_{t+1})
  std::vector<double> wall_ms;  ///< cumulative wall time
  std::vector<int> sweeps;      ///< block sweeps used by each convex solve

  /// Largest increase along initial_H, K_1, H_1, K_2, H_2, ... (<= 0 when monotone).
  double max_increase() const;
};

struct AoResult {
  Decision decision;
  AoTrace trace;
  double kkt_residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Midpoint of every box with capacities split equally among associated users.
Decision default_initial_decision(const Scenario& s, const Matrix& assoc);

/// Minimizer of K over alpha_n on [1, alpha_max] with the rest fixed.
double solve_alpha(const Scenario& s, std::size_t n, const Decision& dec, const AuxVars& aux);

/// Closed-form user frequency: clamp((wt / (2 kappa we))^(1/3), (0, f_max]).
double solve_user_freq(const Scenario& s, std::size_t n);

/// Re-splits server m's frequency among its users; writes into dec.freq_edge.
void solve_edge_freq(const Scenario& s, std::size_t m, Decision& dec, const AuxVars& aux,
                     const InnerConfig& cfg);

/// Minimizer of K over p_n in (0, p_max] with the rest fixed.
double solve_power(const Scenario& s, std::size_t n, const Decision& dec, const AuxVars& aux);

/// Re-splits server m's bandwidth among its users; writes into dec.bandwidth.
void solve_bandwidth(const Scenario& s, std::size_t m, Decision& dec, const AuxVars& aux,
                     const InnerConfig& cfg);

struct P4Result {
  Decision decision;
  int sweeps = 0;
};

/// Minimizes K(., aux) for the association in init.assoc, starting at init.
P4Result solve_p4(const Scenario& s, const AuxVars& aux, const Decision& init,
                  const InnerConfig& cfg, bool freeze_alpha = false);

/// Alternates aux_optimal and solve_p4 from a feasible init.
AoResult ao_solve_p3(const Scenario& s, const Decision& init, const InnerConfig& cfg = {},
                     bool freeze_alpha = false);

/// Dimensionless first-order optimality residual of H at dec for the fixed
/// association: per coordinate the projected gradient times the coordinate's
/// box size, maximized and divided by (1 + |H|). Equality-coupled blocks use
/// the spread of the per-user gradients around their common multiplier.
double kkt_residual(const Scenario& s, const Decision& dec, bool freeze_alpha = false);

}  // namespace mectune
