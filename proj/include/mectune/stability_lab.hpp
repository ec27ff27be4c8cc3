#pragma once

// Replace-one stability experiments for masked fine-tuning modelled as the
// regularized ERM argmin_w (1/k) sum |w.x_i - y_i| + (1 - alpha) ||w - w0||^2.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mectune/rng.hpp"

namespace mectune {

struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

struct ToyTask {
  std::vector<Sample> samples;
  Eigen::VectorXd w0;
  double alpha = 0.0;
  double lipschitz = 1.0;  ///< bound on ||x||, hence on the loss slope in w

  std::size_t k() const { return samples.size(); }
  /// Throws ValidationError / DomainError (alpha >= 1).
  void validate() const;
};

double sample_loss(const Eigen::VectorXd& w, const Sample& z);
/// f_S(w) = (1/k) sum loss + (1 - alpha) ||w - w0||^2.
double finetune_objective(const ToyTask& task, const Eigen::VectorXd& w);
/// A subgradient of f_S at w (sign(0) taken as 0).
Eigen::VectorXd finetune_subgradient(const ToyTask& task, const Eigen::VectorXd& w);

struct FinetuneResult {
  Eigen::VectorXd w;
  Eigen::VectorXd dual;      ///< u_i in [-1, 1], the loss subgradient multipliers
  double certificate = 0.0;  ///< largest optimality-condition violation (0 at the exact minimizer)
  int sweeps = 0;
};

/// Exact minimizer of f_S: dual coordinate ascent to identify the active set,
/// then a linear solve on it.
FinetuneResult masked_finetune(const ToyTask& task);

struct ReplaceOneResult {
  double gap = 0.0;         ///< |loss(A(S), z_i) - loss(A(S^i), z_i)|
  double param_dist = 0.0;  ///< ||A(S^i) - A(S)||
};

ReplaceOneResult replace_one_gap(const ToyTask& task, std::size_t i, const Sample& replacement);
/// Same, reusing an already solved A(S).
ReplaceOneResult replace_one_gap(const ToyTask& task, const Eigen::VectorXd& w_full,
                                 std::size_t i, const Sample& replacement);

double stability_bound(double lipschitz, double alpha, std::size_t k);       ///< 2L^2/((1-alpha)k)
double parameter_distance_bound(double lipschitz, double alpha, std::size_t k);  ///< 2L/((1-alpha)k)

struct ToyTaskParams {
  std::size_t k = 50;
  std::size_t dim = 3;
  double alpha = 0.5;
  double lipschitz = 1.0;
  double noise = 0.1;
};

ToyTask make_toy_task(const ToyTaskParams& p, Rng& rng);
/// Replacement drawn either uniformly or adversarially (feature flipped
/// against z_i, label pushed far away), always with ||x|| <= L.
Sample draw_replacement(const ToyTask& task, std::size_t i, bool adversarial, Rng& rng);

struct StabilityGrid {
  std::vector<std::size_t> ks{20, 50, 200};
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.9};
  std::vector<double> lipschitz{0.5, 1.0, 2.0};
  int trials = 200;
  std::size_t dim = 3;
  std::uint64_t seed = 0;
};

struct StabilityReport {
  std::size_t k = 0;
  double alpha = 0.0;
  double lipschitz = 0.0;
  int trial = 0;  ///< trial that produced max_gap
  double max_gap = 0.0;
  double bound = 0.0;
  double ratio = 0.0;  ///< max_gap / bound
  double max_param_dist = 0.0;
  double param_bound = 0.0;
  int violation_count = 0;
  std::vector<double> gaps;
};

/// One report per (k, alpha, L) cell. Throws SolverError with the offending
/// instance serialized when any gap or parameter distance exceeds its bound
/// by more than 1e-8.
std::vector<StabilityReport> verify_as_bound(const StabilityGrid& grid);

std::string stability_csv(const std::vector<StabilityReport>& reports);

/// Mean of ||(I - M)v||^2 / ||v||^2 over random masks with P(M_jj = 1) = alpha;
/// tends to 1 - alpha, the expected regularizer weight.
double mask_regularizer_mean(std::size_t dim, double alpha, int draws, Rng& rng);

}  // namespace mectune
