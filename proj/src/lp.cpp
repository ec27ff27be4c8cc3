#include "mectune/lp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mectune/errors.hpp"

namespace mectune {

namespace {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_(rows + 1, cols + 1) {}

  double& at(std::size_t r, std::size_t c) { return t_(r, c); }
  double rhs(std::size_t r) const { return t_(r, cols_); }
  double& rhs(std::size_t r) { return t_(r, cols_); }
  double& reduced(std::size_t c) { return t_(rows_, c); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / t_(r, c);
    for (std::size_t j = 0; j <= cols_; ++j) t_(r, j) *= inv;
    t_(r, c) = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) t_(i, j) -= f * t_(r, j);
      t_(i, c) = 0.0;
    }
  }

 private:
  std::size_t rows_, cols_;
  Matrix t_;
};

struct Engine {
  Tableau& tab;
  std::vector<std::size_t>& basis;
  const std::vector<bool>& allowed;
  const SimplexOptions& opt;
  int pivots = 0;

  // Runs simplex iterations on the current objective row until optimal.
  void run() {
    int degenerate = 0;
    while (true) {
      const bool bland = degenerate >= opt.degenerate_switch;
      std::size_t enter = tab.cols();
      double best = -opt.cost_tol;
      for (std::size_t j = 0; j < tab.cols(); ++j) {
        if (!allowed[j]) continue;
        const double d = tab.reduced(j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter == tab.cols()) return;

      std::size_t leave = tab.rows();
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < tab.rows(); ++i) {
        const double a = tab.at(i, enter);
        if (a <= opt.pivot_tol) continue;
        const double r = std::max(0.0, tab.rhs(i)) / a;
        const bool better =
            r < ratio - 1e-14 ||
            (r <= ratio + 1e-14 && leave < tab.rows() &&
             (bland ? basis[i] < basis[leave] : a > tab.at(leave, enter)));
        if (leave == tab.rows() || better) {
          leave = i;
          ratio = r;
        }
      }
      if (leave == tab.rows()) throw SolverError("simplex: unbounded direction");
      degenerate = ratio <= 1e-14 ? degenerate + 1 : 0;
      tab.pivot(leave, enter);
      basis[leave] = enter;
      if (++pivots > opt.max_pivots) throw SolverError("simplex: pivot cap reached");
    }
  }
};

}  // namespace

LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opt) {
  const std::size_t m = lp.rhs.size();
  const std::size_t n = lp.cost.size();
  if (lp.A.rows() != m || lp.A.cols() != n || lp.kind.size() != m)
    throw ValidationError("simplex: dimension mismatch");
  for (std::size_t i = 0; i < m; ++i)
    if (!(lp.rhs[i] >= 0.0) || !std::isfinite(lp.rhs[i]))
      throw ValidationError("simplex: right-hand sides must be finite and >= 0");
  for (double c : lp.cost)
    if (!std::isfinite(c)) throw ValidationError("simplex: costs must be finite");

  std::size_t slacks = 0, artificials = 0;
  for (auto k : lp.kind) (k == RowKind::LessEqual ? slacks : artificials)++;
  const std::size_t total = n + slacks + artificials;
  Tableau tab(m, total);
  std::vector<std::size_t> basis(m);
  std::vector<bool> is_artificial(total, false);

  std::size_t next_slack = n, next_art = n + slacks;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) tab.at(i, j) = lp.A(i, j);
    tab.rhs(i) = lp.rhs[i];
    const std::size_t b = lp.kind[i] == RowKind::LessEqual ? next_slack++ : next_art++;
    tab.at(i, b) = 1.0;
    basis[i] = b;
    if (b >= n + slacks) is_artificial[b] = true;
  }

  std::vector<bool> allowed(total, true);
  Engine eng{tab, basis, allowed, opt};

  if (artificials > 0) {
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_artificial[basis[i]]) continue;
      for (std::size_t j = 0; j <= total; ++j)
        if (j == total || !is_artificial[j]) tab.reduced(j) -= j == total ? tab.rhs(i) : tab.at(i, j);
    }
    eng.run();
    double residual = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (is_artificial[basis[i]]) residual += tab.rhs(i);
    if (residual > opt.feas_tol) {
      std::ostringstream os;
      os << "simplex: infeasible, phase-1 residual " << residual;
      throw SolverError(os.str());
    }
    // Drive zero-level artificials out where a structural pivot exists.
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_artificial[basis[i]]) continue;
      for (std::size_t j = 0; j < n + slacks; ++j) {
        if (std::abs(tab.at(i, j)) > opt.pivot_tol) {
          tab.pivot(i, j);
          basis[i] = j;
          break;
        }
      }
    }
    for (std::size_t j = 0; j < total; ++j)
      if (is_artificial[j]) allowed[j] = false;
  }

  for (std::size_t j = 0; j <= total; ++j) tab.reduced(j) = j < n ? lp.cost[j] : 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double cb = basis[i] < n ? lp.cost[basis[i]] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= total; ++j) tab.reduced(j) -= cb * (j == total ? tab.rhs(i) : tab.at(i, j));
  }
  eng.run();

  LpSolution sol;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) sol.x[basis[i]] = std::max(0.0, tab.rhs(i));
  for (std::size_t j = 0; j < n; ++j) sol.objective += lp.cost[j] * sol.x[j];
  sol.pivots = eng.pivots;
  return sol;
}

}  // namespace mectune
