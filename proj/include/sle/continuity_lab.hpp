#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/loewner_engine.hpp"

namespace sle::continuity {

using cplx = std::complex<double>;

struct KappaInterval {
  double lo = 3.0;
  double hi = 4.0;
  double map(double u) const { return lo + u * (hi - lo); }
};

/// S_{n,j,k}(q) in (t, y, kappa) space. The kappa side is laid out on [0, 1]
/// and mapped affinely onto the interval; when 2^{qn} is not an integer the
/// last kappa slab is truncated at 1.
struct WhitneyBox {
  int n = 0, j = 0, k = 0;
  double q = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  double kappa_lo = 0.0, kappa_hi = 0.0;
  // Corner (j 2^{-2n}, 2^{-n}, k 2^{-qn}), kappa coordinate mapped.
  double corner_t = 0.0, corner_y = 0.0, corner_kappa = 0.0;
};

/// Number of kappa slabs at level n: ceil(2^{qn}).
long kappa_slabs(int n, double q);

/// All boxes for n in [n_min, n_max]. Throws invalid-argument for q <= 0,
/// n outside [1, 6] or more than max_boxes boxes.
std::vector<WhitneyBox> whitney_grid(int n_min, int n_max, double q, KappaInterval kappa,
                                     std::size_t max_boxes = std::size_t{1} << 23);

/// Keeps, at every n, all t-columns of at most `slices` kappa slabs spread
/// evenly over the range (first and last included).
std::vector<WhitneyBox> kappa_slices(const std::vector<WhitneyBox>& boxes, int slices);

/// Index of the box at level n containing (t, y, kappa), or -1.
long locate(const std::vector<WhitneyBox>& boxes, double t, double y, double kappa);

/// F(t, y, kappa) = f_t(U_t + i y) for U = sqrt(kappa) B, with F'.
loewner::MapValue eval_F(const driver::BrownianPath& base, double t, double y, double kappa,
                         const loewner::SolverOptions& solver = {});

struct CornerScan {
  std::vector<double> abs_derivative;  // per box, |F'(corner)|
  std::vector<int> per_n_level;
  std::vector<double> per_n_max;       // max |F'| 2^{-n beta} at each level
  double fitted_c = 0.0;               // max over all corners
  double c_used = 0.0;
  long violations = 0;                 // corners with |F'| > c_used 2^{n beta}
  double trend_slope = 0.0;            // LS slope of log2 per_n_max in n
};

/// c <= 0 uses the per-level maximum at the coarsest level as the constant.
CornerScan corner_scan(const driver::BrownianPath& base, const std::vector<WhitneyBox>& boxes,
                       double beta, double c = 0.0, int jobs = 1,
                       const loewner::SolverOptions& solver = {});

/// max pairwise |F(p) - F(p')| over the 8 vertices and m interior points
/// drawn with the sample seed.
double box_diameter(const driver::BrownianPath& base, const WhitneyBox& box, int m_samples,
                    std::uint64_t sample_seed = 0x5eed, const loewner::SolverOptions& solver = {});

struct DiameterScan {
  std::vector<int> levels;
  std::vector<double> max_diameter;
  double slope = 0.0;  // LS slope of log2 max_diameter in n
};

/// Per level: the top_k boxes by corner derivative plus random_k others.
DiameterScan diameter_scan(const driver::BrownianPath& base, const std::vector<WhitneyBox>& boxes,
                           const CornerScan& corners, int top_k, int random_k, int m_samples,
                           std::uint64_t sample_seed, int jobs = 1,
                           const loewner::SolverOptions& solver = {});

/// sqrt(4t + y^2).
double capacity_radius(double t, double y);

/// epsilon exp[ (1/2) sqrt(log(I|f1'|/y) log(I|f2'|/y)) + log log(I/y) ].
double map_difference_bound(double f1_abs_deriv, double f2_abs_deriv, double epsilon, double t,
                            double y);

struct MapDifferenceCheck {
  double t = 0.0;
  cplx u;
  double epsilon = 0.0;     // sup_{s <= t} |U1_s - U2_s|
  double difference = 0.0;  // |f1(u) - f2(u)|
  double bound = 0.0;
  bool holds = false;
};

/// Both inverse maps at u under the coupling U_i = sqrt(kappa_i) B.
MapDifferenceCheck map_difference_check(const driver::BrownianPath& base, double kappa1,
                                        double kappa2, double t, cplx u,
                                        const loewner::SolverOptions& solver = {});

/// sup over t_grid of |gamma^{kappa1}(t) - gamma^{kappa2}(t)|.
double trace_distance(const driver::BrownianPath& base, double kappa1, double kappa2,
                      std::span<const double> t_grid, const loewner::TraceOptions& opts = {});

double phi(double beta);
/// min(1 - beta, q - phi(beta)); requires beta < 1 and q > phi(beta).
double delta_of(double beta, double q);

struct HolderFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
  std::string note;
};

/// Slope of log(distance) against log(delta_kappa). Zero distances are
/// dropped with a note; needs 4 usable pairs spanning a factor of 4.
HolderFit holder_fit(std::span<const double> delta_kappa, std::span<const double> distance);

struct KappaPair {
  double kappa = 0.0;
  double delta_kappa = 0.0;
  double sup_distance = 0.0;
  double theta_bound = 0.0;  // C |delta_kappa|^{delta/q}, C fitted
};

struct ContinuityReport {
  double kappa_ref = 0.0;
  std::vector<KappaPair> pairs;
  double fitted_holder = 0.0;
  double theta_constant = 0.0;
  double delta = 0.0;
  double q = 0.0;
  double beta = 0.0;
};

/// Coupled trace distances from kappa_ref to kappa_ref + delta for each delta.
ContinuityReport kappa_scan(const driver::BrownianPath& base, double kappa_ref,
                            std::span<const double> deltas, std::span<const double> t_grid,
                            double q, double beta, const loewner::TraceOptions& opts = {});

struct ThreeTermSplit {
  int N = 0;
  double y_N = 0.0;
  double direct = 0.0;  // |F(t,y,k1) - F(t,y,k2)|
  double leg1 = 0.0;    // |F(t,y,k1) - F(t,y_N,k1)|
  double leg_kappa = 0.0;
  double leg2 = 0.0;
  bool holds = false;
};

/// N is the integer with 2^{-qN} < |k1 - k2| <= 2^{-q(N-1)}.
int bracket_level(double delta_kappa, double q);
ThreeTermSplit three_term_split(const driver::BrownianPath& base, double t, double y,
                                double kappa1, double kappa2, double q,
                                const loewner::SolverOptions& solver = {});

}  // namespace sle::continuity
