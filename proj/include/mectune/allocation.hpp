#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "mectune/errors.hpp"

namespace mectune {

/// Smallest positive value returned by the per-item root search, as a
/// fraction of the item's largest useful value.
inline constexpr double kAllocationFloor = 1e-30;

namespace detail {

// Bracketed root of an increasing g on [a, b] with g(a) < 0 < g(b).
template <typename G>
double bracketed_root(G&& g, double a, double b, double ga, double gb) {
  std::uintmax_t iters = 200;
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
  const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace detail

/// Root of an increasing function `deriv` on (0, hi]: the point where deriv
/// crosses `level`, clamped to [hi*kAllocationFloor, hi]. Searched in log space.
template <typename Deriv>
double increasing_root(Deriv&& deriv, double level, double hi) {
  const double ghi = deriv(hi) - level;
  if (ghi <= 0.0) return hi;
  const double lo = hi * kAllocationFloor;
  const double glo = deriv(lo) - level;
  if (glo >= 0.0) return lo;
  auto g = [&](double t) { return deriv(std::exp(t)) - level; };
  return std::exp(detail::bracketed_root(g, std::log(lo), std::log(hi), glo, ghi));
}

/// Minimizes sum_i coef_i phi_i(x_i) subject to sum_i coef_i x_i = capacity,
/// x > 0, for convex phi_i given their increasing derivatives deriv(i, x). The
/// multiplier is found by a bracketed root search; the result is rescaled so
/// the equality holds to rounding.
template <typename Deriv>
std::vector<double> allocate_capacity(std::size_t count, const std::vector<double>& coef,
                                      double capacity, Deriv&& deriv, double rel_tol) {
  std::vector<double> x(count, 0.0);
  if (count == 0) return x;
  auto fill = [&](double level) {
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      x[i] = increasing_root([&](double v) { return deriv(i, v); }, level, capacity / coef[i]);
      sum += coef[i] * x[i];
    }
    return sum;
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    hi = std::max(hi, deriv(i, capacity / coef[i]));
    lo = std::min(lo, deriv(i, capacity / (coef[i] * static_cast<double>(count))));
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    std::ostringstream os;
    os << "allocate_capacity: non-finite multiplier bracket [" << lo << ", " << hi << "]";
    throw SolverError(os.str());
  }
  double sum = fill(lo);
  if (lo != hi && std::abs(sum - capacity) > rel_tol * capacity) {
    // Search on asinh(level / scale): the multiplier can span many decades
    // on either side of zero.
    const double scale = std::max(std::abs(lo), std::abs(hi)) * 1e-18;
    auto g = [&](double u) { return fill(scale * std::sinh(u)) / capacity - 1.0; };
    const double ulo = std::asinh(lo / scale), uhi = std::asinh(hi / scale);
    const double glo = sum / capacity - 1.0, ghi = g(uhi);
    if (glo >= 0.0 || ghi <= 0.0) {
      sum = glo >= 0.0 ? fill(lo) : fill(hi);
    } else {
      std::uintmax_t iters = 200;
      auto tol = [&](double a, double b) {
        return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(a);
      };
      // Stop as soon as the capacity residual is within rel_tol.
      auto gt = [&](double u) {
        const double v = g(u);
        return std::abs(v) <= rel_tol ? 0.0 : v;
      };
      const auto r = boost::math::tools::toms748_solve(gt, ulo, uhi, glo, ghi, tol, iters);
      sum = fill(scale * std::sinh(0.5 * (r.first + r.second)));
    }
  }
  if (!(sum > 0.0)) throw SolverError("allocate_capacity: root search produced an empty allocation");
  const double scale = capacity / sum;
  for (double& v : x) v *= scale;
  return x;
}

}  // namespace mectune
