#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/loewner_engine.hpp"

namespace sle::radial {

using cplx = std::complex<double>;

struct RadialOptions {
  loewner::Parametrization param = loewner::Parametrization::two_over_kappa;
  ode::Tolerances tol{1e-10, 1e-12, 1e-14};
  double singular_fraction = 0.25;
  // Relative tolerance when locating the original time of a new-time sample.
  double sample_tol = 1e-13;
};

// Backward flow observed in the new time s, ds = c dt / |Z|^2 with Z = h - U
// (c = 1 in the 2/kappa parametrization, c = kappa in the standard one), so
// that Y_s = y0 exp(2 s / kappa).
struct RadialPath {
  double kappa = 0.0;
  cplx z0;
  loewner::Parametrization param = loewner::Parametrization::two_over_kappa;
  std::vector<double> t_grid;  // new time
  std::vector<double> X, Y, R, N, intN;
  std::vector<double> sigma;     // original time at each sample
  std::vector<double> log_deriv;  // log|h'| from the variational equation
  double y_residual = 0.0;       // max |Y - y0 e^{2t/kappa}| / Y
};

/// Integrates in original time and stops exactly at each requested new time.
/// Throws horizon-exceeded when sigma runs past the driver.
RadialPath direct_flow(const driver::DriverPath& driver, cplx z0, std::span<const double> t_grid,
                       const RadialOptions& opts = {});

/// Euler-Maruyama for dR = drift_sign (4/kappa) R ds + sqrt(1 + R^2) dW, one
/// step per `dt`, which must be a multiple of the noise grid step.
std::vector<double> simulate_R_sde(double kappa, double R0, double dt,
                                   const driver::BrownianPath& noise, int drift_sign);

/// Euler-Maruyama for dN = (1 - N)(1 - 4(2/kappa + 1) N) ds + 2 sqrt(N) (1 - N) dW,
/// reflected at 0 and clamped below 1.
std::vector<double> simulate_N_sde(double kappa, double N0, double dt,
                                   const driver::BrownianPath& noise);

/// |h'_t| = exp(-2t/kappa + (4/kappa) intN).
double derivative_from_N(double kappa, double t, double intN);

struct ExponentPair {
  double kappa = 0.0;
  double r = 0.0;
  double b = 0.0;
  double residual = 0.0;  // r^2 - (4/kappa + 1) r + 2b/kappa
};

ExponentPair exponents_from_r(double kappa, double r);

struct MartingaleSample {
  double t = 0.0;
  double M = 0.0;
  double y_power = 0.0;  // Y_t^{b - kappa r / 2}
  double angle = 0.0;    // (1 + R_t^2)^r
  double deriv = 0.0;    // |h'_t|^b
};

/// M_t = y0^{b - kappa r/2} e^{-r t} (1 + R_t^2)^r exp((4b/kappa) intN_t).
std::vector<MartingaleSample> martingale_path(const RadialPath& radial, const ExponentPair& exps);

/// Initial value y0^{b - kappa r/2} (|z0| / y0)^{2r}.
double martingale_start(cplx z0, const ExponentPair& exps);

struct BatchOptions {
  int level = 5;
  double initial_horizon = 4.0;
  double max_horizon = 4096.0;
  int jobs = 1;
};

/// direct_flow on n independent Brownian paths; path i uses the seed
/// derive_seed(seed, stream, i) and its horizon is doubled until sigma fits.
std::vector<RadialPath> radial_batch(double kappa, cplx z0, std::span<const double> t_grid,
                                     std::size_t n_paths, std::uint64_t seed, std::uint64_t stream,
                                     const BatchOptions& batch = {}, const RadialOptions& opts = {});

void write_radial_csv(const RadialPath& path, const std::string& file);

}  // namespace sle::radial
