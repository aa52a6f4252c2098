#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sle::driver {

/// Brownian sample path on the uniform grid k * step, k = 0..horizon/step.
///
/// Generated paths use step = 4^-level. Injected and rescaled paths keep the
/// level of their source but may carry a non-dyadic step.
struct BrownianPath {
  std::uint64_t seed = 0;
  int level = 0;
  double horizon = 0.0;
  double step = 0.0;
  bool generated = true;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  /// Piecewise-linear interpolation, clamped to [0, horizon].
  double at(double t) const;
};

/// Dyadic Brownian path built from unit-time Gaussian increments refined by
/// 2 * level Brownian-bridge bisections. Each random draw is keyed by
/// (seed, bisection, interval), so level j and level j + 1 agree at shared
/// points and a longer horizon extends a shorter one.
BrownianPath sample_brownian(std::uint64_t seed, int level, double horizon);

/// Wraps explicit values (test drivers, counterexamples) as a path.
BrownianPath injected_path(int level, double horizon, std::vector<double> values);
/// Samples `fn` on the level grid of [0, horizon].
BrownianPath injected_path(int level, double horizon, const std::function<double(double)>& fn);

/// Brownian scaling B^(lambda)_t = B_{lambda^2 t} / lambda on the grid step / lambda^2.
BrownianPath rescale(const BrownianPath& path, double lambda);

struct AdmissibilityRules {
  double epsilon = 0.5;      // lower exclusion [0, epsilon)
  double margin_eight = 0.25;  // exclusion radius around kappa = 8
};

bool admissible(double kappa, const AdmissibilityRules& rules);

struct KappaGrid {
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  AdmissibilityRules rules;
  std::vector<double> points;

  /// Validates sortedness, range, and the exclusion rules.
  static KappaGrid make(std::vector<double> points, double kappa_min, double kappa_max,
                        AdmissibilityRules rules = {});
  static KappaGrid make(std::vector<double> points, AdmissibilityRules rules = {});
  /// `count` equispaced candidates in [kappa_min, kappa_max]; excluded ones are dropped.
  static KappaGrid uniform(double kappa_min, double kappa_max, int count,
                           AdmissibilityRules rules = {});
};

/// U_t = sqrt(kappa) * B_t on the grid of `base`.
struct DriverPath {
  std::shared_ptr<const BrownianPath> base;
  double kappa = 1.0;
  std::vector<double> values;

  double step() const { return base->step; }
  double horizon() const { return base->horizon; }
  double at(double t) const;
};

DriverPath couple(std::shared_ptr<const BrownianPath> path, double kappa,
                  const AdmissibilityRules& rules = {});
DriverPath couple(const BrownianPath& path, double kappa, const AdmissibilityRules& rules = {});

struct ModulusReport {
  bool holds = false;
  int worst_scale = 0;
  double fitted_c = 0.0;
  std::vector<double> per_scale_c;  // index j - 1
};

/// Checks |U_{t+s} - U_t| <= c1 sqrt(kappa) sqrt(j) 2^-j for 0 <= t <= 1,
/// 0 <= s <= 4^-j, over every scale j = 1..level of the grid.
ModulusReport modulus_certificate(const DriverPath& driver, double c1);

/// Grid level L with step == 4^-L, or -1 when the step is not dyadic.
int dyadic_level(double step);

void write_csv(const BrownianPath& path, const std::string& file);
/// Little-endian binary dump: u64 seed, i32 level, f64 horizon, u64 count, f64 values.
void write_binary(const BrownianPath& path, const std::string& file);
BrownianPath read_binary(const std::string& file);

}  // namespace sle::driver
