#pragma once

// Association step: with the continuous variables fixed the objective is
// linear in chi. Binarity is enforced by an exact penalty whose concave part
// is linearized at every iteration, so each iteration is one LP.

#include <cstdint>
#include <vector>

#include "mectune/grid.hpp"
#include "mectune/lp.hpp"
#include "mectune/model.hpp"
#include "mectune/rng.hpp"

namespace mectune {

struct PenaltyConfig {
  double rho_init = 1.0;     ///< initial penalty weight, in units of the largest finite |c|
  double rho_growth = 2.0;
  double binarity_tol = 1e-6;
  int max_cccp_iters = 200;
  int restarts = 1;
  std::uint64_t rng_seed = 0;
  double move_tol = 1e-8;

  void validate() const;
};

/// Per-unit-chi cost; +inf marks a forbidden pair (zero rate or no resources).
Matrix assoc_linear_costs(const Scenario& s, const Decision& dec);

/// G(chi) = sum chi c over allowed pairs (+inf if chi puts weight on a forbidden pair).
double assoc_cost(const Matrix& costs, const Matrix& chi);

struct PenaltyLinearization {
  Matrix slope;           ///< 2 chi_prev - 1
  double constant = 0.0;  ///< sum chi_prev (chi_prev - 1) - sum slope * chi_prev
  /// Value of the tangent sum chi_prev(chi_prev-1) + sum slope (chi - chi_prev).
  double value(const Matrix& chi) const;
};

/// Tangent of the convex function sum chi (chi - 1) at chi_prev.
PenaltyLinearization linearize_penalty(const Matrix& chi_prev);

/// LP over chi: row sums 1, two capacity rows per server, chi >= 0.
struct AssocLp {
  Matrix cost;        ///< +inf entries are fixed to zero
  Matrix bandwidth;   ///< capacity coefficients b_{n,m}
  Matrix freq;        ///< capacity coefficients f_{n,m}
  std::vector<double> b_cap;
  std::vector<double> f_cap;
};

AssocLp make_assoc_lp(const Scenario& s, const Decision& dec, const Matrix& cost);

/// Vertex-optimal chi. Throws SolverError carrying the phase-1 residual when infeasible.
Matrix solve_lp(const AssocLp& lp);

/// Largest chi (1 - chi).
double binarity_gap(const Matrix& chi);

/// Capacity slack check of chi against the LP's coefficients.
bool capacities_hold(const AssocLp& lp, const Matrix& chi, double rel_tol = 1e-9);

struct CccpTrace {
  std::vector<double> penalized;  ///< G + rho sum chi(1-chi) after each LP
  std::vector<double> rho;        ///< penalty weight used by each LP
  std::vector<double> gap;        ///< binarity gap after each LP
};

struct AssocResult {
  Matrix assoc;                 ///< binary, row-stochastic
  double objective = 0.0;       ///< G at assoc
  double binarity_gap = 0.0;    ///< before rounding
  int iterations = 0;
  bool binary = false;          ///< binarity reached within the cap
  bool capacity_ok = true;      ///< rounded chi satisfies the capacity rows
  std::size_t worst_entry_row = 0, worst_entry_col = 0;
  CccpTrace trace;
};

/// Largest-per-row rounding followed by a capacity repair pass.
Matrix round_association(const AssocLp& lp, const Matrix& chi, bool* capacity_ok = nullptr);

AssocResult cccp_associate(const Scenario& s, const Decision& dec, const Matrix& chi_init,
                           const PenaltyConfig& cfg);
AssocResult cccp_associate(const AssocLp& lp, const Matrix& chi_init, const PenaltyConfig& cfg);

/// Start used by restart `r`: the LP relaxation vertex for r = 0, otherwise a
/// random row-stochastic point that satisfies the capacity rows.
Matrix random_feasible_start(const AssocLp& lp, std::uint64_t seed, std::uint64_t r);

struct MultistartResult {
  AssocResult best;
  std::vector<double> objectives;  ///< G of every start, in start order
  std::size_t best_start = 0;
};

MultistartResult multistart_associate(const Scenario& s, const Decision& dec,
                                      const PenaltyConfig& cfg);
MultistartResult multistart_associate(const AssocLp& lp, const PenaltyConfig& cfg);

/// Each user, in index order, joins the server giving it the highest rate at
/// full power with an equal share of the bandwidth among the server's users so far.
Matrix greedy_association(const Scenario& s);

/// Every user picks a server uniformly at random.
Matrix random_association(const Scenario& s, Rng& rng);

}  // namespace mectune
