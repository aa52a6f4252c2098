#include "sle/estimate_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "sle/errors.hpp"
#include "sle/parallel.hpp"
#include "sle/philox.hpp"

namespace sle::estimates {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::invalid_argument, what);
}

double b_of_r(double kappa, double r) { return kappa * ((4.0 / kappa + 1.0) * r - r * r) / 2.0; }

}  // namespace

double tail_bound(const TailBoundSpec& s) {
  require(s.kappa > 0.0, "tail_bound: kappa must be positive");
  require(s.r >= 0.0 && s.r <= 4.0 / s.kappa + 1.0 + 1e-12, "tail_bound: r outside [0, 4/kappa + 1]");
  require(s.z0.imag() > 0.0, "tail_bound: z0 must lie in the upper half-plane");
  require(s.lambda > 0.0 && s.t >= 0.0, "tail_bound: need lambda > 0 and t >= 0");
  const double y0 = s.z0.imag();
  const double log_bound = -s.b * std::log(s.lambda) + 2.0 * s.r * std::log(std::abs(s.z0) / y0) +
                           s.t * (s.r - 2.0 * s.b / s.kappa);
  return std::exp(log_bound);
}

double delta_factor(double y0, double lambda, double r, double b, double kappa, bool extended) {
  require(y0 > 0.0 && y0 <= 1.0, "delta_factor: need 0 < y0 <= 1");
  const double low = extended ? 1.0 : std::exp(1.0);
  // The upper end is compared with a relative slack so that lambda = 1/y0
  // computed in floating point stays admissible.
  require(lambda >= low * (1.0 - 1e-15) && lambda * y0 <= 1.0 + 1e-15,
          "delta_factor: lambda outside [" + std::string(extended ? "1" : "e") + ", 1/y0]");
  const double gap = r - 2.0 * b / kappa;
  if (gap < 0.0) return std::pow(lambda, r * kappa / 2.0 - b);
  if (gap == 0.0) return -std::log(lambda * y0);
  return std::pow(y0, b - r * kappa / 2.0);
}

double original_time_tail_bound(double kappa, double y0, double t, double lambda, int r_points) {
  require(kappa > 0.0 && y0 > 0.0 && t >= 0.0 && lambda > 0.0 && r_points >= 2,
          "original_time_tail_bound: bad arguments");
  // log|h'| moves at speed at most 2/kappa in the new time, so reaching
  // lambda by new time T forces |h'_j| >= lambda e^{-2/kappa} at j = floor(s).
  const double T = kappa / 2.0 * std::log(std::sqrt(4.0 * t + y0 * y0) / y0);
  const double reduced = lambda * std::exp(-2.0 / kappa);
  const double j_lo = std::max(0.0, std::ceil(kappa / 2.0 * std::log(reduced) - 1e-12));
  const double j_hi = std::floor(T + 1e-12);
  if (j_lo > j_hi) return 0.0;
  const double r_max = 4.0 / kappa + 1.0;
  double best = 1.0;
  for (int i = 0; i < r_points; ++i) {
    const double r = r_max * i / (r_points - 1);
    const double b = b_of_r(kappa, r);
    double sum = 0.0;
    for (double j = j_lo; j <= j_hi; j += 1.0)
      sum += tail_bound({kappa, std::min(r, r_max), b, cplx(0.0, 1.0), j, reduced});
    best = std::min(best, sum);
  }
  return best;
}

double alpha_of_r(double kappa, double r) { return 2.0 * b_of_r(kappa, r) - r * kappa / 2.0; }

OptimizedExponents optimize_exponents(double kappa, int grid_points) {
  require(kappa > 0.0, "optimize_exponents: kappa must be positive");
  require(grid_points >= 2, "optimize_exponents: grid too small");
  OptimizedExponents o;
  o.kappa = kappa;
  o.r0 = 0.25 + 2.0 / kappa;
  o.b0 = b_of_r(kappa, o.r0);
  o.alpha = kappa * (0.25 + 2.0 / kappa) * (0.25 + 2.0 / kappa);
  o.alpha_from_b = 2.0 * o.b0 - kappa * o.r0 / 2.0;
  o.alpha_series = 4.0 / kappa + 1.0 + kappa / 16.0;
  o.b0_closed = 2.0 / kappa + 1.0 + 3.0 * kappa / 32.0;
  o.two_b_minus_2r_over_kappa = 2.0 * o.b0 - 2.0 * o.r0 / kappa;
  const double r_max = 4.0 / kappa + 1.0;
  o.grid_spacing = r_max / (grid_points - 1);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double r = r_max * i / (grid_points - 1);
    const double a = alpha_of_r(kappa, r);
    if (a > best) {
      best = a;
      o.grid_argmax = r;
    }
  }
  o.beta_low = 2.0 / o.alpha_from_b;
  o.beta_high = 1.0;
  return o;
}

TailEstimate empirical_tail(std::span<const double> samples, double lambda, double confidence) {
  require(!samples.empty(), "empirical_tail: empty sample");
  require(samples.size() >= 100, "empirical_tail: need at least 100 samples");
  TailEstimate e;
  e.n = samples.size();
  e.hits = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](double v) { return v >= lambda; }));
  e.p_hat = static_cast<double>(e.hits) / static_cast<double>(e.n);
  const auto ci = stats::clopper_pearson(e.hits, e.n, confidence);
  e.ci_low = ci.low;
  e.ci_high = ci.high;
  return e;
}

CapacityEstimate capacity_from(const std::string& event, std::vector<KappaProbability> per_kappa) {
  CapacityEstimate c;
  c.event = event;
  c.per_kappa = std::move(per_kappa);
  for (const auto& k : c.per_kappa) c.cap = std::max(c.cap, k.estimate.p_hat);
  return c;
}

CapacityEstimate capacity(const std::string& event, const EventFn& evaluator,
                          const driver::KappaGrid& grid, std::size_t n_paths,
                          const PathSource& source, double confidence) {
  require(!grid.points.empty(), "capacity: empty kappa grid");
  require(n_paths > 0, "capacity: need at least one path");
  auto bases = parallel_map(n_paths, source.jobs, [&](std::size_t i) {
    return std::make_shared<const driver::BrownianPath>(driver::sample_brownian(
        rng::derive_seed(source.seed, source.stream, i), source.level, source.horizon));
  });
  std::vector<KappaProbability> per;
  for (double kappa : grid.points) {
    const auto hits = parallel_map(n_paths, source.jobs, [&](std::size_t i) {
      return evaluator(driver::couple(bases[i], kappa, grid.rules)) ? 1 : 0;
    });
    KappaProbability kp;
    kp.kappa = kappa;
    kp.estimate.n = n_paths;
    for (int h : hits) kp.estimate.hits += static_cast<std::size_t>(h);
    kp.estimate.p_hat = static_cast<double>(kp.estimate.hits) / static_cast<double>(n_paths);
    const auto ci = stats::clopper_pearson(kp.estimate.hits, n_paths, confidence);
    kp.estimate.ci_low = ci.low;
    kp.estimate.ci_high = ci.high;
    per.push_back(kp);
  }
  return capacity_from(event, std::move(per));
}

double default_bc_beta(const driver::KappaGrid& grid, double epsilon1) {
  require(!grid.points.empty(), "default_bc_beta: empty kappa grid");
  double beta = 0.0;
  for (double kappa : grid.points) {
    const auto o = optimize_exponents(kappa);
    const double mid = 0.5 * (o.beta_low + o.beta_high);
    beta = std::max(beta, std::min((2.0 + epsilon1) / o.alpha_from_b, mid));
  }
  return beta;
}

double bc_asymptotic_ratio(double kappa, double beta) {
  return std::exp2(2.0 - beta * optimize_exponents(kappa).alpha_from_b);
}

std::vector<BcTerm> borel_cantelli_sums(const driver::KappaGrid& grid, double epsilon1,
                                        const BcOptions& opts) {
  require(!grid.points.empty(), "borel_cantelli_sums: empty kappa grid");
  require(opts.n_max >= 1 && opts.n_max <= 6, "borel_cantelli_sums: n_max must lie in [1, 6]");
  const double beta = opts.beta > 0.0 ? opts.beta : default_bc_beta(grid, epsilon1);
  std::vector<BcTerm> out;
  double partial = 0.0;

  std::vector<std::shared_ptr<const driver::BrownianPath>> bases;
  if (opts.mode == BcMode::empirical) {
    require(opts.source.level >= opts.n_max, "borel_cantelli_sums: driver level below n_max");
    require(opts.n_paths > 0, "borel_cantelli_sums: need paths in empirical mode");
    bases = parallel_map(opts.n_paths, opts.source.jobs, [&](std::size_t i) {
      return std::make_shared<const driver::BrownianPath>(driver::sample_brownian(
          rng::derive_seed(opts.source.seed, opts.source.stream, i), opts.source.level,
          std::max(1.0, opts.source.horizon)));
    });
  }

  for (int n = 1; n <= opts.n_max; ++n) {
    BcTerm term;
    term.n = n;
    const std::size_t count = (std::size_t{1} << (2 * n)) + 1;
    term.dyadic_times = count;
    term.predicted = std::exp2(-epsilon1 * n);
    if (opts.mode == BcMode::theoretical) {
      double worst = 0.0;
      for (double kappa : grid.points) {
        const auto o = optimize_exponents(kappa);
        worst = std::max(worst, std::exp2(-n * beta * o.alpha_from_b));
      }
      term.term = static_cast<double>(count) * worst;
      const double y0 = std::ldexp(1.0, -n);
      for (std::size_t k = 0; k < count; ++k) {
        const double t = std::ldexp(static_cast<double>(k), -2 * n);
        double m = 0.0;
        for (double kappa : grid.points)
          m = std::max(m, original_time_tail_bound(kappa, y0, t, std::exp2(n * beta)));
        term.constant_free_total += m;
      }
    } else {
      std::vector<double> times(count);
      for (std::size_t k = 0; k < count; ++k) times[k] = std::ldexp(static_cast<double>(k), -2 * n);
      const double threshold = std::exp2(n * beta);
      const cplx z0(0.0, std::ldexp(1.0, -n));
      std::vector<double> worst(count, 0.0);
      for (double kappa : grid.points) {
        const auto hits = parallel_map(opts.n_paths, opts.source.jobs, [&](std::size_t i) {
          const auto d = driver::couple(bases[i], kappa, grid.rules);
          const auto flow = loewner::evolve_backward(d, z0, 1.0, opts.solver,
                                                     loewner::Parametrization::standard, times);
          std::vector<char> h(count, 0);
          for (std::size_t k = 0; k < count; ++k) h[k] = std::abs(flow.derivative[k]) >= threshold;
          return h;
        });
        for (std::size_t k = 0; k < count; ++k) {
          std::size_t c = 0;
          for (const auto& h : hits) c += static_cast<std::size_t>(h[k]);
          worst[k] = std::max(worst[k], static_cast<double>(c) / static_cast<double>(opts.n_paths));
        }
      }
      for (double w : worst) term.term += w;
    }
    partial += term.term;
    term.partial_sum = partial;
    term.ratio = out.empty() ? std::nan("") : (out.back().term > 0.0 ? term.term / out.back().term
                                                                     : std::nan(""));
    out.push_back(term);
  }
  return out;
}

ExistenceReport existence_certificate(const driver::DriverPath& driver, int j_max, double epsilon1,
                                      double modulus_c, const loewner::SolverOptions& solver) {
  require(j_max >= 1 && j_max <= 6, "existence_certificate: j_max must lie in [1, 6]");
  require(driver.horizon() >= 1.0, "existence_certificate: driver must cover [0, 1]");
  ExistenceReport rep;
  rep.j_max = j_max;
  rep.modulus = driver::modulus_certificate(driver, modulus_c);
  rep.modulus_ok = rep.modulus.holds;
  bool corners_ok = true;
  for (int j = 1; j <= j_max; ++j) {
    const std::size_t count = (std::size_t{1} << (2 * j)) + 1;
    const double y = std::ldexp(1.0, -j);
    std::vector<double> values(count, std::nan(""));
    double worst = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double t = std::ldexp(static_cast<double>(k), -2 * j);
      try {
        const auto m = loewner::reverse_map(driver, t, cplx(driver.at(t), y), solver);
        values[k] = std::abs(m.derivative);
        worst = std::max(worst, values[k]);
      } catch (const Error& e) {
        corners_ok = false;
        rep.corner_errors.push_back("j=" + std::to_string(j) + " k=" + std::to_string(k) + ": " +
                                    e.what());
      }
    }
    rep.abs_derivative.push_back(std::move(values));
    rep.r_j.push_back(worst * y);
  }
  rep.envelope = rep.r_j[0] * std::exp2(epsilon1);
  bool all_ok = corners_ok;
  for (int j = 1; j <= j_max; ++j) {
    const double limit = std::ldexp(rep.envelope * std::exp2(-j * epsilon1), j);
    std::vector<bool> ok;
    for (double v : rep.abs_derivative[j - 1]) {
      ok.push_back(std::isfinite(v) && v <= limit);
      all_ok = all_ok && ok.back();
    }
    rep.derivative_ok.push_back(std::move(ok));
  }
  if (j_max >= 2) {
    std::vector<double> js, logs;
    for (int j = 1; j <= j_max; ++j) {
      js.push_back(j);
      logs.push_back(-std::log2(rep.r_j[j - 1]));
    }
    rep.decay_rate = stats::least_squares(js, logs).slope;
  }
  rep.holds = all_ok && rep.modulus_ok && (j_max < 2 || rep.decay_rate > 0.0);
  return rep;
}

IdentityReport distribution_identity_test(double kappa, double t, cplx z, std::size_t n,
                                          std::uint64_t seed, int level, int jobs,
                                          const loewner::SolverOptions& solver) {
  require(n >= 500, "distribution_identity_test: need n >= 500");
  require(t >= 0.0 && z.imag() > 0.0, "distribution_identity_test: need t >= 0 and Im z > 0");
  IdentityReport rep;
  rep.n = n;
  if (t == 0.0) {
    // Both sides are the point mass at z.
    rep.degenerate = true;
    rep.real = {0.0, 1.0, n, n};
    rep.imag = {0.0, 1.0, n, n};
    return rep;
  }
  const double horizon = std::ceil(t);
  auto backward = parallel_map(n, jobs, [&](std::size_t i) {
    const auto d = driver::couple(driver::sample_brownian(rng::derive_seed(seed, 1, i), level, horizon),
                                  kappa);
    return loewner::evolve_backward(d, z, t, solver, loewner::Parametrization::standard,
                                    std::span<const double>(&t, 1))
        .points.back();
  });
  auto inverse = parallel_map(n, jobs, [&](std::size_t i) {
    const auto d = driver::couple(driver::sample_brownian(rng::derive_seed(seed, 2, i), level, horizon),
                                  kappa);
    const double u = d.at(t);
    return loewner::reverse_map(d, t, z + u, solver).value - u;
  });
  std::vector<double> re1, im1, re2, im2;
  for (std::size_t i = 0; i < n; ++i) {
    re1.push_back(backward[i].real());
    im1.push_back(backward[i].imag());
    re2.push_back(inverse[i].real());
    im2.push_back(inverse[i].imag());
  }
  rep.real = stats::ks_two_sample(re1, re2);
  rep.imag = stats::ks_two_sample(im1, im2);
  return rep;
}

MartingaleReport martingale_report(const std::vector<radial::RadialPath>& paths,
                                   const radial::ExponentPair& exps, std::size_t index) {
  require(!paths.empty(), "martingale_report: no paths");
  MartingaleReport rep;
  rep.kappa = exps.kappa;
  rep.r = exps.r;
  rep.b = exps.b;
  rep.n_paths = paths.size();
  rep.M0 = radial::martingale_start(paths.front().z0, exps);
  std::vector<double> values;
  values.reserve(paths.size());
  for (const auto& p : paths) {
    require(index < p.t_grid.size(), "martingale_report: index past the time grid");
    values.push_back(radial::martingale_path(p, exps)[index].M);
  }
  rep.t = paths.front().t_grid[index];
  rep.mean_M = stats::mean(values);
  rep.stderr_M = stats::standard_error(values);
  return rep;
}

}  // namespace sle::estimates
