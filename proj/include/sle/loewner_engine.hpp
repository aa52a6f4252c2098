#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/flow_core.hpp"

namespace sle::loewner {

using cplx = std::complex<double>;

// standard:        dg/dt = 2 / (g - U_t),            U = sqrt(kappa) B
// two_over_kappa:  dg/dt = (2 / kappa) / (g - B_t)
// The two are related by g^(2/k)_t(z) = g_t(sqrt(kappa) z) / sqrt(kappa).
enum class Parametrization { standard, two_over_kappa };
enum class Direction { forward, backward };

std::string to_string(Parametrization p);
Parametrization parametrization_from_string(const std::string& s);

struct SolverOptions {
  flow::StepControl step;
  double swallow_cutoff = 1e-6;
};

struct FlowResult {
  Direction direction = Direction::forward;
  Parametrization param = Parametrization::standard;
  double kappa = 0.0;
  std::vector<double> times;
  std::vector<cplx> points;
  std::vector<cplx> derivative;
  double swallowing_time = flow::kInf;
  long steps = 0;
};

struct MapValue {
  cplx value;
  cplx derivative;
};

/// Forward flow of z0. Outputs at `outputs` (sorted, within [0, t_end]); by
/// default at every driver knot up to t_end and at t_end itself. Stops at the
/// first output past the swallowing time.
FlowResult evolve_forward(const driver::DriverPath& driver, cplx z0, double t_end,
                          const SolverOptions& opts = {},
                          Parametrization param = Parametrization::standard,
                          std::span<const double> outputs = {});

/// Backward flow dh = -a / (h - U) dt with the driver run forward in time.
FlowResult evolve_backward(const driver::DriverPath& driver, cplx z0, double t_end,
                           const SolverOptions& opts = {},
                           Parametrization param = Parametrization::standard,
                           std::span<const double> outputs = {});

/// g_t(z) and g_t'(z); out-of-range when z is swallowed before t.
MapValue forward_map(const driver::DriverPath& driver, double t, cplx z,
                     const SolverOptions& opts = {},
                     Parametrization param = Parametrization::standard);

/// f_t(z) = g_t^{-1}(z) and f_t'(z), from the backward flow driven by
/// s -> U_{t-s}.
MapValue reverse_map(const driver::DriverPath& driver, double t, cplx z,
                     const SolverOptions& opts = {},
                     Parametrization param = Parametrization::standard);

/// f_t(z) in the standard parametrization.
cplx pde_inverse_sample(const driver::DriverPath& driver, double t, cplx z,
                        const SolverOptions& opts = {});

/// Rewrites a flow from z0 as the flow from z0 / sqrt(kappa) in the other
/// parametrization (or back).
FlowResult convert(const FlowResult& flow, Parametrization target);

struct TraceOptions {
  double y_cut = 0x1.0p-10;
  // Solve again at 2 * y_cut and report the gap; raise trace-unresolved
  // when it exceeds refinement_bound.
  bool check_refinement = true;
  double refinement_bound = 0.1;
  SolverOptions solver;
};

struct TraceSample {
  double t = 0.0;
  cplx gamma;
  double y_cut = 0.0;
  double refinement_gap = std::nan("");
};

/// gamma(t) ~ f_t(U_t + i y_cut).
TraceSample trace_point(const driver::DriverPath& driver, double t, const TraceOptions& opts = {});
std::vector<TraceSample> trace(const driver::DriverPath& driver, std::span<const double> t_grid,
                               const TraceOptions& opts = {});

struct HcapEstimate {
  double t = 0.0;
  double hcap = 0.0;
  double fit_residual = 0.0;
};

/// Fits g_t(z) - z ~ a/z + b/z^2 + c/z^3 at z = 100i, 200i, 400i and reports a.
HcapEstimate hcap_estimate(const driver::DriverPath& driver, double t,
                           const SolverOptions& opts = {}, double residual_bound = 1e-3);

/// sup over t_grid of |gamma[B^(lambda)](t) - gamma[B](lambda^2 t) / lambda|.
/// The unscaled side is cut at lambda * y_cut so the identity is exact.
double scaling_check(const driver::BrownianPath& path, double kappa, double lambda,
                     std::span<const double> t_grid, const TraceOptions& opts = {});

struct DistortionReport {
  double constant = 0.0;      // smallest c for which both inequalities hold
  double max_ratio = 0.0;     // max of |f'_{t+s}| / |f'_t| and its inverse
  double max_displacement = 0.0;  // max |f_{t+s} - f_t| / (y |f'_t|)
};

/// Samples s in [0, y^2] and measures the distortion constants at z.
DistortionReport distortion_check(const driver::DriverPath& driver, cplx z, double t,
                                  int samples, const SolverOptions& opts = {});

void write_trace_csv(const std::vector<TraceSample>& samples, const std::string& file);
void write_flow_csv(const FlowResult& flow, const std::string& file);

}  // namespace sle::loewner
