#pragma once

// Quadratic-transform surrogate K of the objective H for a fixed association,
// the closed-form auxiliary updates that make K touch H, and analytic
// gradients of both functions.

#include <cstddef>
#include <vector>

#include "mectune/grid.hpp"
#include "mectune/model.hpp"

namespace mectune {

/// Auxiliary variables of the surrogate. Entries whose term is identically
/// zero (zero numerator, or chi == 0) are stored as 0 and skipped.
struct AuxVars {
  std::vector<double> z;  ///< per user, local-compute term
  Matrix nu;              ///< per link, uplink term
  Matrix q;               ///< per link, edge-compute term
};

/// Partial derivatives of K or H, one block per decision variable group.
struct GradientBundle {
  std::vector<double> alpha;
  std::vector<double> power;
  std::vector<double> freq_user;
  Matrix bandwidth;
  Matrix freq_edge;

  static GradientBundle zeros(std::size_t users, std::size_t servers);
  /// Largest absolute component over all blocks.
  double max_abs() const;
};

/// Rate of a link and its partial derivatives.
struct LinkRate {
  double rate = 0.0;
  double d_power = 0.0;
  double d_bandwidth = 0.0;
};

LinkRate link_rate(double gain, double power, double bandwidth, double noise);

/// Weighted per-layer local cost A(f) = wt psi/(f C D) + we kappa f^2 psi/(C D).
double local_cost_per_layer(const UserDevice& u, double freq, const LlmConfig& llm, double wt,
                            double we);
double local_cost_per_layer_deriv(const UserDevice& u, double freq, const LlmConfig& llm,
                                  double wt, double we);
/// Weighted per-layer edge cost B(f) for a user with `tokens` on `server`.
double edge_cost_per_layer(const EdgeServer& e, double freq, std::int64_t tokens,
                           const LlmConfig& llm, double wt, double we);
double edge_cost_per_layer_deriv(const EdgeServer& e, double freq, std::int64_t tokens,
                                 const LlmConfig& llm, double wt, double we);

/// A(f_n) and B(f_{n,m}) with the scenario's normalized weights.
double A_of(const Scenario& s, std::size_t n, double freq);
double B_of(const Scenario& s, std::size_t n, std::size_t m, double freq);

/// Derivative of the weighted stability term in alpha_n.
double stability_term(const Scenario& s, std::size_t n, double alpha);
double stability_term_deriv(const Scenario& s, std::size_t n, double alpha);

/// z = A/(2 alpha), nu = 1/(2 p s r), q = B/(2 (layers - alpha)).
AuxVars aux_optimal(const Scenario& s, const Decision& dec);

/// Surrogate K(dec, aux) with the association taken from dec.assoc.
double surrogate_K(const Scenario& s, const Decision& dec, const AuxVars& aux);

GradientBundle grad_K(const Scenario& s, const Decision& dec, const AuxVars& aux);
GradientBundle grad_H(const Scenario& s, const Decision& dec);

}  // namespace mectune
