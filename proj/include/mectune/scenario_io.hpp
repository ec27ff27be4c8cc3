#pragma once

// Seeded scenario generation, JSON persistence of scenarios and solutions,
// and the fixed-schema results CSV.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mectune/model.hpp"
#include "mectune/orchestrator.hpp"

namespace mectune {

inline constexpr int kSchemaVersion = 1;

template <typename T>
struct Range {
  T lo;
  T hi;
};

struct GenParams {
  std::size_t N = 50;
  std::size_t M = 10;
  double area_size = 500.0;  ///< side of the square, m
  std::uint64_t seed = 0;

  Range<double> p_max{1.0, 2.0};             ///< W
  Range<double> user_f_max{0.5e9, 1.0e9};    ///< cycles/s
  Range<double> server_f_max{1.0e9, 3.0e9};  ///< cycles/s
  double b_max = 20e6;                       ///< Hz
  Range<std::int64_t> tokens{512, 1024};
  Range<std::int64_t> user_cores{4, 6};
  double user_fpc = 1.0;
  Range<std::int64_t> server_cores{2560, 5120};
  Range<std::int64_t> server_fpc{1, 2};
  double kappa_user = 1e-27;
  double kappa_server = 1e-27;
  Range<std::int64_t> dataset_size{1000, 5000};
  double noise_dbm = -134.0;
  double payload_scale = 1.0;

  LlmConfig llm;
  double wt = 1.0, we = 1.0, ws = 1.0;

  void validate() const;
};

/// Path loss 128.1 + 37.6 log10(d_km) in dB, distance clamped to >= 1 m.
double path_loss_db(double distance_m);
double gain_from_distance(double distance_m);
double dbm_to_watt(double dbm);

/// Largest single-user compute delay, energy and stability bound at the
/// box-midpoint decision under the greedy association.
Normalizers reference_normalizers(const Scenario& s);

Scenario generate(const GenParams& gp);

/// Copy of s with new raw weights (normalizers unchanged).
Scenario with_weights(const Scenario& s, double wt, double we, double ws);

nlohmann::json scenario_to_json(const Scenario& s);
/// Throws ValidationError naming the offending field path.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json decision_to_json(const Decision& d);
Decision decision_from_json(const nlohmann::json& j, const std::string& path = "decision");
nlohmann::json solution_to_json(const Solution& sol);
Solution solution_from_json(const nlohmann::json& j);

/// Parses text into JSON; parse errors name the last key seen before the fault.
nlohmann::json parse_json_text(const std::string& text);

/// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

void save_scenario(const std::filesystem::path& path, const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);
void save_solution(const std::filesystem::path& path, const Solution& sol);
Solution load_solution(const std::filesystem::path& path);

inline constexpr std::array<const char*, 16> kResultColumns = {
    "seed",     "method",          "N",         "M",          "omega_t",  "omega_e",
    "omega_s",  "energy_J",        "delay_s",   "stability_bound", "objective",
    "outer_rounds", "ao_iters",    "cccp_iters", "kkt_residual", "runtime_ms"};

struct ResultRow {
  std::uint64_t seed = 0;
  std::string method;
  std::size_t N = 0, M = 0;
  double omega_t = 0.0, omega_e = 0.0, omega_s = 0.0;
  double energy_J = 0.0;
  double delay_s = 0.0;
  double stability_bound = 0.0;
  double objective = 0.0;
  int outer_rounds = 0, ao_iters = 0, cccp_iters = 0;
  double kkt_residual = 0.0;
  double runtime_ms = 0.0;
};

/// Row from a solved scenario; omega_* are the raw weights.
ResultRow make_row(const Scenario& s, std::uint64_t seed, const std::string& method,
                   const Solution& sol);

std::string csv_header();
std::string csv_line(const ResultRow& r);
std::string results_csv(const std::vector<ResultRow>& rows);
/// Throws ValidationError when the header differs from kResultColumns.
std::vector<ResultRow> parse_results_csv(const std::string& text);

}  // namespace mectune
