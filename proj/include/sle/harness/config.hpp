#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace sle::harness {

// Bump when a default or the meaning of a field changes.
inline constexpr int kConfigVersion = 1;
inline constexpr const char* kSoftwareVersion = "0.3.0";

struct SolverConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_min = 1e-14;
  double singular_fraction = 0.25;
  double swallow_cutoff = 1e-6;
};

struct TraceConfig {
  std::string driver = "brownian";  // brownian | zero
  int level = 5;
  int t_points = 65;
  double y_cut = 0x1.0p-10;
  double refinement_bound = 0.1;
};

struct SlitConfig {
  double rel_tol = 1e-4;
  int t_points = 33;
};

struct SolverOrderConfig {
  int level = 3;
  double kappa = 4.0;
  std::vector<int> substeps{1, 2, 4, 8};
  int reference_substeps = 64;
  double nominal_order = 5.0;
  double order_slack = 0.5;
};

// Shared by the martingale, tails, derivative and time-change suites.
struct RadialConfig {
  std::vector<double> kappas{2.5, 3.0, 4.0, 6.0};
  std::vector<double> times{0.25, 0.5, 1.0};
  std::size_t paths = 10000;
  std::size_t derivative_paths = 100;
  int level = 5;
  double martingale_rel_tol = 0.05;
  double martingale_se_factor = 3.0;
  double lambda_min = 2.718281828459045;
  double lambda_max = 20.0;
  int lambda_count = 8;
  double confidence = 0.99;
  double derivative_rel_tol = 1e-3;
  double derivative_abs_tol = 1e-6;
  double time_change_tol = 1e-3;
  // Reported only: a lambda grid below e, where the event is reachable at t <= 1.
  double supplementary_lambda_min = 1.05;
};

struct ExponentConfig {
  int grid_points = 10001;
  double argmax_tol = 1e-3;
};

struct DistributionConfig {
  double kappa = 4.0;
  double z_re = 0.0;
  double z_im = 1.0;
  double t = 0.5;
  std::size_t n = 2000;
  double p_min = 0.01;
  int level = 5;
};

struct SdeLawConfig {
  double kappa = 4.0;
  double horizon = 1.0;  // new time
  double dt = 0x1.0p-14;  // reflected Euler bias in N is still visible at 2^-8
  std::size_t n = 2000;
  double p_min = 0.01;
};

struct ContinuityConfig {
  double kappa_ref = 3.0;
  std::vector<double> deltas{0.4, 0.2, 0.1, 0.05};
  std::size_t seeds = 20;
  int level = 6;
  int t_points = 33;
  double y_cut = 0x1.0p-10;
  double q = 1.5;
  double beta = 0.0;  // <= 0: midpoint of the beta range at kappa_ref
  double map_check_y = 0.05;
  std::vector<double> map_check_times{0.25, 0.5, 1.0};
};

struct WhitneyConfig {
  double kappa_lo = 3.0;
  double kappa_hi = 4.0;
  int n_max = 5;
  int kappa_slices = 9;
  std::size_t seeds = 5;
  int level = 6;
  int top_k = 4;
  int random_k = 4;
  int m_samples = 19;
  double slope_slack = 0.1;
  double trend_tol = 0.0;
};

struct BorelCantelliConfig {
  double epsilon1 = 0.05;
  double beta = 0.0;  // <= 0: derived from the grid
  int n_max = 5;
  std::size_t paths = 500;
  int level = 5;
};

struct ExistenceConfig {
  int j_max = 5;
  std::size_t paths = 20;
  double epsilon1 = 0.05;
  double modulus_c = 4.0;
  int level = 5;
};

struct CapacityConfig {
  std::vector<double> kappas{3.0, 4.0, 6.0};
  int n = 4;
  double epsilon1 = 0.05;
  double t = 1.0;
  std::size_t paths = 2000;
  int level = 5;
};

struct DeterminismConfig {
  std::vector<std::string> suites{"martingale", "distribution", "existence", "continuity"};
  int jobs_a = 1;
  int jobs_b = 4;
  std::size_t paths_cap = 500;  // path counts are capped for the rerun
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string name = "default";
  std::uint64_t seed = 20240601;
  std::vector<double> kappa_grid{2.5, 3.0, 4.0, 6.0, 7.5};
  double epsilon = 0.5;
  double margin_eight = 0.25;
  int jobs = 1;
  std::string out_dir = "out";
  SolverConfig solver;
  TraceConfig trace;
  SlitConfig slit;
  SolverOrderConfig solver_order;
  RadialConfig radial;
  ExponentConfig exponents;
  DistributionConfig distribution;
  SdeLawConfig sde_laws;
  ContinuityConfig continuity;
  WhitneyConfig whitney;
  BorelCantelliConfig borel_cantelli;
  ExistenceConfig existence;
  CapacityConfig capacity;
  DeterminismConfig determinism;
  // Wall-clock budget per suite, checked by the acceptance runner.
  std::map<std::string, double> budget_seconds{
      {"slit", 1},          {"solver_order", 10}, {"martingale", 300},   {"tails", 300},
      {"derivative", 60},   {"timechange", 300},  {"exponents", 1},      {"distribution", 120},
      {"sde_laws", 120},    {"continuity", 900},  {"whitney", 900},      {"borel_cantelli", 600},
      {"existence", 600},   {"capacity", 300},    {"determinism", 900}};
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys and bad values raise
/// invalid-argument.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& file);

/// Range and consistency checks (tolerances > 0, grid admissible, ...).
void validate(const ExperimentConfig& c);

/// FNV-1a 64 over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace sle::harness
