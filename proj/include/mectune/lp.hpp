#pragma once

// Dense two-phase tableau simplex for small linear programs
//   min c^T x  s.t.  A x (<= or =) rhs,  x >= 0,  rhs >= 0.

#include <vector>

#include "mectune/grid.hpp"

namespace mectune {

enum class RowKind { LessEqual, Equal };

struct LinearProgram {
  std::vector<double> cost;
  Matrix A;
  std::vector<double> rhs;
  std::vector<RowKind> kind;
};

struct LpSolution {
  std::vector<double> x;
  double objective = 0.0;
  int pivots = 0;
};

struct SimplexOptions {
  double feas_tol = 1e-9;       ///< phase-1 residual above this means infeasible
  double pivot_tol = 1e-11;     ///< smallest admissible pivot magnitude
  double cost_tol = 1e-11;      ///< reduced costs above -cost_tol count as optimal
  int max_pivots = 100000;
  int degenerate_switch = 50;   ///< consecutive degenerate pivots before Bland's rule
};

/// Returns a basic optimal solution. Throws SolverError when phase 1 ends
/// with a positive residual (the message carries the residual) or the pivot
/// cap is hit, ValidationError on malformed input.
LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {});

}  // namespace mectune
