#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/loewner_engine.hpp"
#include "sle/radial_diffusion.hpp"
#include "sle/stats.hpp"

namespace sle::estimates {

using cplx = std::complex<double>;

struct TailBoundSpec {
  double kappa = 4.0;
  double r = 0.0;
  double b = 0.0;
  cplx z0{0.0, 1.0};
  double t = 0.0;  // new time
  double lambda = 1.0;
};

/// lambda^{-b} (|z0| / y0)^{2r} e^{t (r - 2b/kappa)}: Markov's inequality
/// applied to the martingale, no unspecified constants.
double tail_bound(const TailBoundSpec& spec);

/// Branch factor keyed by the sign of r - 2b/kappa:
/// lambda^{r kappa/2 - b}, -log(lambda y0) or y0^{b - r kappa/2}.
/// Requires e <= lambda <= 1/y0 and 0 < y0 <= 1; `extended` relaxes the
/// lower end to lambda >= 1.
double delta_factor(double y0, double lambda, double r, double b, double kappa,
                    bool extended = false);

/// Constant-free bound on P(|h'_t(i y0)| >= lambda) in original time
/// (standard parametrization): the event forces |h~'_j| >= lambda e^{-2/kappa}
/// at some integer new time j <= T, with Im growing like e^{2s/kappa} up to
/// sqrt(4t + y0^2). Minimized over r on a grid in [0, 4/kappa + 1].
double original_time_tail_bound(double kappa, double y0, double t, double lambda,
                                int r_points = 401);

struct OptimizedExponents {
  double kappa = 0.0;
  double r0 = 0.0;
  double b0 = 0.0;
  double alpha = 0.0;          // kappa (1/4 + 2/kappa)^2
  double alpha_from_b = 0.0;   // 2 b0 - kappa r0 / 2
  double alpha_series = 0.0;   // 4/kappa + 1 + kappa/16
  double b0_closed = 0.0;      // 2/kappa + 1 + 3 kappa / 32
  double two_b_minus_2r_over_kappa = 0.0;
  double grid_argmax = 0.0;    // argmax of alpha(r) over a uniform grid
  double grid_spacing = 0.0;
  double beta_low = 0.0;       // beta range (2 / alpha, 1)
  double beta_high = 1.0;
};

/// alpha(r) = 2 b(r) - r kappa / 2.
double alpha_of_r(double kappa, double r);
OptimizedExponents optimize_exponents(double kappa, int grid_points = 10001);

struct TailEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::size_t hits = 0;
  std::size_t n = 0;
};

TailEstimate empirical_tail(std::span<const double> samples, double lambda,
                            double confidence = 0.99);

struct KappaProbability {
  double kappa = 0.0;
  TailEstimate estimate;
};

struct CapacityEstimate {
  std::string event;
  std::vector<KappaProbability> per_kappa;
  double cap = 0.0;
};

using EventFn = std::function<bool(const driver::DriverPath&)>;

struct PathSource {
  int level = 5;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  int jobs = 1;
};

/// Base path i is sample_brownian(derive_seed(seed, stream, i), level, horizon)
/// for every kappa on the grid; cap is the maximum per-kappa frequency.
CapacityEstimate capacity(const std::string& event, const EventFn& evaluator,
                          const driver::KappaGrid& grid, std::size_t n_paths,
                          const PathSource& source = {}, double confidence = 0.99);

CapacityEstimate capacity_from(const std::string& event, std::vector<KappaProbability> per_kappa);

enum class BcMode { theoretical, empirical };

struct BcTerm {
  int n = 0;
  double term = 0.0;
  double partial_sum = 0.0;
  double ratio = 0.0;      // term / previous term; NaN for the first
  double predicted = 0.0;  // 2^{-epsilon1 n}
  // Theoretical mode only: sum over t of max_kappa original_time_tail_bound.
  double constant_free_total = 0.0;
  std::size_t dyadic_times = 0;
};

struct BcOptions {
  BcMode mode = BcMode::theoretical;
  double beta = 0.0;  // threshold exponent; <= 0 picks default_bc_beta
  int n_max = 5;
  std::size_t n_paths = 500;
  PathSource source;
  loewner::SolverOptions solver;
};

/// beta = max over the grid of min((2 + epsilon1) / alpha, midpoint of the beta range).
double default_bc_beta(const driver::KappaGrid& grid, double epsilon1);

/// Limit ratio 2^{2 - alpha beta} of consecutive theoretical terms at one kappa.
double bc_asymptotic_ratio(double kappa, double beta);

/// Per-n totals of sum_{t in D_2n} cap(|h'_t(i 2^-n)| >= 2^{n beta}). The
/// theoretical mode uses the bound 2^{-n beta alpha(kappa)} per time.
std::vector<BcTerm> borel_cantelli_sums(const driver::KappaGrid& grid, double epsilon1,
                                        const BcOptions& opts);

struct ExistenceReport {
  int j_max = 0;
  std::vector<std::vector<double>> abs_derivative;  // [j-1][k]
  std::vector<std::vector<bool>> derivative_ok;
  std::vector<double> r_j;    // 2^-j max_k |f'|
  double decay_rate = 0.0;    // least-squares slope of -log2 r_j in j
  double envelope = 0.0;      // r_1 2^{epsilon1}
  bool modulus_ok = false;
  driver::ModulusReport modulus;
  std::vector<std::string> corner_errors;
  bool holds = false;
};

/// Corners |f'_{k 4^-j}(U + i 2^-j)| for j = 1..j_max, k = 0..4^j, checked
/// against 2^j r_1 2^{-(j-1) epsilon1}, plus the driver modulus certificate.
ExistenceReport existence_certificate(const driver::DriverPath& driver, int j_max,
                                      double epsilon1, double modulus_c = 4.0,
                                      const loewner::SolverOptions& solver = {});

struct IdentityReport {
  stats::KsResult real;
  stats::KsResult imag;
  bool degenerate = false;
  std::size_t n = 0;
};

/// h_t(z) on one path family against f_t(z + U_t) - U_t on an independent one.
IdentityReport distribution_identity_test(double kappa, double t, cplx z, std::size_t n,
                                          std::uint64_t seed, int level = 5, int jobs = 1,
                                          const loewner::SolverOptions& solver = {});

struct MartingaleReport {
  double kappa = 0.0;
  double r = 0.0;
  double b = 0.0;
  double t = 0.0;
  double mean_M = 0.0;
  double M0 = 0.0;
  double stderr_M = 0.0;
  std::size_t n_paths = 0;
};

/// Sample mean of M at t_grid[index] over a batch of radial paths.
MartingaleReport martingale_report(const std::vector<radial::RadialPath>& paths,
                                   const radial::ExponentPair& exps, std::size_t index);

}  // namespace sle::estimates
