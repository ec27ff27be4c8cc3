#pragma once

// Cost model for split fine-tuning across mobile users and edge servers:
// per-layer compute delay/energy on both sides, FDMA uplink, the
// replace-one stability bound, and the weighted objective H.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mectune/errors.hpp"
#include "mectune/grid.hpp"

namespace mectune {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct LlmConfig {
  int layers = 32;          ///< total transformer layers
  int batch = 512;          ///< batch size B
  int hidden = 1024;        ///< hidden dimension h
  double lipschitz = 1.0;   ///< loss Lipschitz constant L
  friend bool operator==(const LlmConfig&, const LlmConfig&) = default;
};

struct UserDevice {
  std::int64_t tokens = 1;        ///< d_n
  double cores = 1.0;             ///< C_n^U
  double flops_per_cycle = 1.0;   ///< D_n^U
  double f_max = 1.0;             ///< cycles/s
  double p_max = 1.0;             ///< W
  double kappa = 0.0;             ///< W/(cycle/s)^3
  std::int64_t dataset_size = 1;  ///< k_n
  Point position;
  friend bool operator==(const UserDevice&, const UserDevice&) = default;
};

struct EdgeServer {
  double cores = 1.0;
  double flops_per_cycle = 1.0;
  double f_max = 1.0;  ///< cycles/s
  double b_max = 1.0;  ///< Hz
  double kappa = 0.0;
  Point position;
  friend bool operator==(const EdgeServer&, const EdgeServer&) = default;
};

struct Channel {
  Matrix gain;                ///< linear power gain, users x servers
  double noise_power = 1.0;   ///< sigma^2
  double payload_scale = 1.0; ///< eta, bits per token
  friend bool operator==(const Channel&, const Channel&) = default;
};

/// Reference magnitudes that make the three weights unitless.
struct Normalizers {
  double delay = 1.0;
  double energy = 1.0;
  double stability = 1.0;
  friend bool operator==(const Normalizers&, const Normalizers&) = default;
};

struct Weights {
  double delay = 1.0;      ///< omega_t
  double energy = 1.0;     ///< omega_e
  double stability = 1.0;  ///< omega_s
  Normalizers norm;

  double eff_delay() const { return delay / norm.delay; }
  double eff_energy() const { return energy / norm.energy; }
  double eff_stability() const { return stability / norm.stability; }
  friend bool operator==(const Weights&, const Weights&) = default;
};

struct Scenario {
  LlmConfig llm;
  std::vector<UserDevice> users;
  std::vector<EdgeServer> servers;
  Channel channel;
  Weights weights;

  std::size_t num_users() const { return users.size(); }
  std::size_t num_servers() const { return servers.size(); }

  /// Intermediate-result size s(d_n) in bits.
  double payload_bits(std::size_t n) const {
    return channel.payload_scale * static_cast<double>(users[n].tokens);
  }

  /// Largest admissible continuous split depth (keeps clear of the stability pole).
  double alpha_max() const;

  /// Throws ValidationError naming the first offending field.
  void validate() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Clearance delta_alpha below the stability pole: 1e-3 * layers.
double alpha_clearance(int layers);

struct Decision {
  std::vector<double> alpha;
  std::vector<double> power;
  std::vector<double> freq_user;
  Matrix bandwidth;
  Matrix freq_edge;
  Matrix assoc;

  static Decision zeros(std::size_t users, std::size_t servers);
  std::size_t num_users() const { return alpha.size(); }
  std::size_t num_servers() const { return assoc.cols(); }
  friend bool operator==(const Decision&, const Decision&) = default;
};

struct LayerCost {
  double delay = 0.0;
  double energy = 0.0;
};

/// psi(d) = 72 B d h^2 + 12 B d^2 h, evaluated in 128-bit integers.
unsigned __int128 flops_per_layer_exact(std::int64_t tokens, const LlmConfig& llm);
double flops_per_layer(std::int64_t tokens, const LlmConfig& llm);

LayerCost local_layer_cost(const UserDevice& user, double freq, const LlmConfig& llm);
LayerCost edge_layer_cost(const EdgeServer& server, double freq, std::int64_t tokens,
                          const LlmConfig& llm);

/// Shannon rate b log2(1 + g p / (sigma^2 b)).
double uplink_rate(double gain, double power, double bandwidth, double noise);

/// Energy to push `bits` at `power` over a link of rate `rate`.
double transmit_energy(double bits, double power, double rate);

/// E_n^com summed over the servers user n is associated with.
double uplink_energy(const Scenario& s, const Decision& dec, std::size_t user);

/// 2 L^2 / (k (1 - alpha / layers)).
double as_bound(double lipschitz, double dataset_size, double alpha, int layers);

struct ObjectiveBreakdown {
  double user_cost = 0.0;       ///< sum of Cost_n^u
  double edge_cost = 0.0;       ///< sum of Cost_m^E
  double stability_cost = 0.0;  ///< omega_s-weighted bound sum
  double H = 0.0;

  double delay_cost = 0.0;   ///< omega_t-weighted part of H
  double energy_cost = 0.0;  ///< omega_e-weighted part of H

  double total_delay = 0.0;      ///< s, compute delay summed over users and layers
  double total_energy = 0.0;     ///< J, local + uplink + edge
  double total_stability = 0.0;  ///< sum of per-user bounds (inf when some alpha hits the pole)
};

struct Violation {
  std::string constraint;
  std::size_t index = 0;
  double amount = 0.0;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

struct FeasibilityOptions {
  double tol = 1e-8;               ///< relative tolerance
  bool capacity_equality = false;  ///< demand sum chi*b == b_max instead of <=
  bool integral = false;           ///< integer alpha and binary chi
};

FeasibilityReport check_feasibility(const Scenario& s, const Decision& dec,
                                    const FeasibilityOptions& opt = {});

class InfeasibleDecision : public ValidationError {
 public:
  explicit InfeasibleDecision(FeasibilityReport report)
      : ValidationError("infeasible decision: " + report.describe()), report_(std::move(report)) {}
  const FeasibilityReport& report() const { return report_; }

 private:
  FeasibilityReport report_;
};

/// Objective H of the joint problem with a continuous or binary association.
/// Throws InfeasibleDecision when `dec` violates the decision invariants.
ObjectiveBreakdown total_objective(const Scenario& s, const Decision& dec);

/// Same as total_objective but skips the feasibility screen.
ObjectiveBreakdown evaluate_objective(const Scenario& s, const Decision& dec);

/// Mean over users of alpha T^loc + s/r + (layers - alpha) T^edge.
double average_end_to_end_delay(const Scenario& s, const Decision& dec);

}  // namespace mectune
