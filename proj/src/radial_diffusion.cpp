#include "sle/radial_diffusion.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sle/errors.hpp"
#include "sle/flow_core.hpp"
#include "sle/parallel.hpp"
#include "sle/philox.hpp"

namespace sle::radial {

namespace {

// [Re h, Im h, Re log h', Im log h', s, int N ds] against original time.
struct RadialRhs {
  flow::DriverView drv;
  double a;
  double c;

  void operator()(double tau, const ode::Vec<6>& y, ode::Vec<6>& dy) const {
    const double zx = y[0] - drv.at(tau);
    const double zy = y[1];
    const double r2 = zx * zx + zy * zy;
    const double ix = zx / r2;
    const double iy = -zy / r2;
    dy[0] = -a * ix;
    dy[1] = -a * iy;
    dy[2] = a * (ix * ix - iy * iy);
    dy[3] = a * 2.0 * ix * iy;
    dy[4] = c / r2;
    dy[5] = c * zx * zx / (r2 * r2);
  }
};

using Stepper = ode::DormandPrince<6, RadialRhs>;

}  // namespace

RadialPath direct_flow(const driver::DriverPath& driver, cplx z0, std::span<const double> t_grid,
                       const RadialOptions& opts) {
  if (!(z0.imag() > 0.0)) throw Error(ErrorKind::invalid_argument, "z0 must lie in the upper half-plane");
  if (t_grid.empty() || t_grid.front() < 0.0 || !std::is_sorted(t_grid.begin(), t_grid.end()))
    throw Error(ErrorKind::invalid_argument, "new-time grid must be sorted and start at >= 0");

  const bool standard = opts.param == loewner::Parametrization::standard;
  const auto& values = standard ? driver.values : driver.base->values;
  const flow::DriverView v{values.data(), values.size(), driver.step(), 0.0, false};
  const double kappa = driver.kappa;
  const double a = standard ? 2.0 : 2.0 / kappa;
  const double c = standard ? kappa : 1.0;
  const double horizon = driver.horizon();

  RadialPath out;
  out.kappa = kappa;
  out.z0 = z0;
  out.param = opts.param;
  out.t_grid.assign(t_grid.begin(), t_grid.end());

  Stepper st(RadialRhs{v, a, c}, opts.tol);
  st.reset(0.0, {z0.real(), z0.imag(), 0.0, 0.0, 0.0, 0.0});

  auto record = [&] {
    const auto& y = st.y();
    const double x = y[0] - v.at(st.t());
    const double r = x / y[1];
    const double r2 = r * r;
    out.X.push_back(x);
    out.Y.push_back(y[1]);
    out.R.push_back(r);
    out.N.push_back(r2 / (1.0 + r2));
    out.intN.push_back(y[5]);
    out.sigma.push_back(st.t());
    out.log_deriv.push_back(y[2]);
  };

  double h = std::min(v.step, 1e-2);
  std::size_t k = 0;
  while (k < t_grid.size() && t_grid[k] == 0.0) {
    record();
    ++k;
  }
  long steps = 0;
  while (k < t_grid.size()) {
    const double target = t_grid[k];
    if (st.t() >= horizon * (1.0 - 1e-15)) {
      std::ostringstream msg;
      msg << "original time passed the driver horizon " << horizon << " before new time " << target;
      throw Error(ErrorKind::horizon_exceeded, msg.str());
    }
    const double limit = std::min(v.next_knot(st.t()), horizon);
    const double room = limit - st.t();
    const auto& y = st.y();
    const double zx = y[0] - v.at(st.t());
    const double cap = opts.singular_fraction * (zx * zx + y[1] * y[1]) / a;
    const double hh = std::min({h, room, cap});
    if (hh < opts.tol.h_min && hh < room) flow::stall(st.t(), hh);
    if (++steps > 50'000'000) throw Error(ErrorKind::solver_stall, "step budget exhausted");

    const double err = st.attempt(hh);
    if (!(err <= 1.0)) {
      h = hh * Stepper::growth(err);
      continue;
    }
    const double s0 = st.y()[4];
    const double s1 = st.proposal()[4];
    if (s1 < target) {
      st.accept();
      if (hh == room) st.snap_time(limit);
      const double grown = hh * Stepper::growth(err);
      h = hh < h ? std::max(h, grown) : grown;
      continue;
    }

    // Illinois iteration on the step length so that s lands on the target.
    double lo = 0.0, hi = hh, f_lo = s0 - target, f_hi = s1 - target;
    int side = 0;
    const double eps = opts.sample_tol * std::max(1.0, target);
    for (int it = 0; it < 100 && std::abs(f_hi) > eps; ++it) {
      double step = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      if (!(step > lo && step < hi)) step = 0.5 * (lo + hi);
      st.attempt(step);
      const double f = st.proposal()[4] - target;
      if (std::abs(f) <= eps) break;
      if (f < 0.0) {
        lo = step;
        f_lo = f;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        hi = step;
        f_hi = f;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
    }
    if (std::abs(st.proposal()[4] - target) > eps) {
      st.attempt(hi);
      if (std::abs(st.proposal()[4] - target) > 1e3 * eps)
        throw Error(ErrorKind::reparametrization_error, "could not locate new time " + std::to_string(target));
    }
    st.accept();
    record();
    ++k;
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < out.t_grid.size(); ++i) {
    const double law = z0.imag() * std::exp(2.0 * out.t_grid[i] / kappa);
    worst = std::max(worst, std::abs(out.Y[i] - law) / out.Y[i]);
    if (i > 0 && !(out.sigma[i] > out.sigma[i - 1]) && out.t_grid[i] > out.t_grid[i - 1])
      throw Error(ErrorKind::reparametrization_error, "time change is not increasing");
  }
  out.y_residual = worst;
  return out;
}

namespace {

std::size_t sde_steps(double dt, const driver::BrownianPath& noise, std::size_t& stride) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be > 0");
  const double ratio = dt / noise.step;
  stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
    throw Error(ErrorKind::invalid_argument, "dt must be a multiple of the noise grid step");
  return (noise.values.size() - 1) / stride;
}

void check_finite(double v, std::size_t k) {
  if (!std::isfinite(v))
    throw Error(ErrorKind::nan_detected, "SDE state became non-finite at step " + std::to_string(k));
}

}  // namespace

std::vector<double> simulate_R_sde(double kappa, double R0, double dt,
                                   const driver::BrownianPath& noise, int drift_sign) {
  if (drift_sign != 1 && drift_sign != -1) throw Error(ErrorKind::invalid_argument, "drift_sign must be +1 or -1");
  std::size_t stride = 0;
  const std::size_t n = sde_steps(dt, noise, stride);
  const double drift = drift_sign * 4.0 / kappa;
  std::vector<double> r(n + 1);
  r[0] = R0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dw = noise.values[(k + 1) * stride] - noise.values[k * stride];
    r[k + 1] = r[k] + drift * r[k] * dt + std::sqrt(1.0 + r[k] * r[k]) * dw;
    check_finite(r[k + 1], k + 1);
  }
  return r;
}

std::vector<double> simulate_N_sde(double kappa, double N0, double dt,
                                   const driver::BrownianPath& noise) {
  if (!(N0 >= 0.0 && N0 < 1.0)) throw Error(ErrorKind::invalid_argument, "N0 must lie in [0, 1)");
  std::size_t stride = 0;
  const std::size_t n = sde_steps(dt, noise, stride);
  const double pull = 4.0 * (2.0 / kappa + 1.0);
  std::vector<double> v(n + 1);
  v[0] = N0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = v[k];
    const double dw = noise.values[(k + 1) * stride] - noise.values[k * stride];
    double next = x + (1.0 - x) * (1.0 - pull * x) * dt + 2.0 * std::sqrt(x) * (1.0 - x) * dw;
    check_finite(next, k + 1);
    if (next < 0.0) next = -next;
    if (next > 1.0 - 1e-12) next = 1.0 - 1e-12;
    v[k + 1] = next;
  }
  return v;
}

double derivative_from_N(double kappa, double t, double intN) {
  return std::exp(-2.0 * t / kappa + 4.0 / kappa * intN);
}

ExponentPair exponents_from_r(double kappa, double r) {
  ExponentPair e;
  e.kappa = kappa;
  e.r = r;
  e.b = kappa * ((4.0 / kappa + 1.0) * r - r * r) / 2.0;
  e.residual = r * r - (4.0 / kappa + 1.0) * r + 2.0 * e.b / kappa;
  return e;
}

double martingale_start(cplx z0, const ExponentPair& e) {
  const double y0 = z0.imag();
  return std::pow(y0, e.b - e.kappa * e.r / 2.0) * std::pow(std::abs(z0) / y0, 2.0 * e.r);
}

std::vector<MartingaleSample> martingale_path(const RadialPath& radial, const ExponentPair& e) {
  if (std::abs(e.kappa - radial.kappa) > 1e-12 * radial.kappa)
    throw Error(ErrorKind::invalid_argument, "exponents were computed for a different kappa");
  const double kappa = radial.kappa;
  const double y0 = radial.z0.imag();
  const double ypow = e.b - kappa * e.r / 2.0;
  std::vector<MartingaleSample> out;
  out.reserve(radial.t_grid.size());
  for (std::size_t i = 0; i < radial.t_grid.size(); ++i) {
    const double t = radial.t_grid[i];
    if (radial.N[i] >= 1.0) throw Error(ErrorKind::martingale_blowup, "N reached 1 at t = " + std::to_string(t));
    MartingaleSample m;
    m.t = t;
    m.y_power = std::exp(ypow * (std::log(y0) + 2.0 * t / kappa));
    m.angle = std::pow(1.0 + radial.R[i] * radial.R[i], e.r);
    m.deriv = std::exp(e.b * (-2.0 * t / kappa + 4.0 / kappa * radial.intN[i]));
    m.M = std::exp(ypow * std::log(y0) - e.r * t + e.r * std::log1p(radial.R[i] * radial.R[i]) +
                   4.0 * e.b / kappa * radial.intN[i]);
    if (!std::isfinite(m.M) || !(m.M > 0.0))
      throw Error(ErrorKind::martingale_blowup, "M is not a positive finite number at t = " + std::to_string(t));
    out.push_back(m);
  }
  return out;
}

std::vector<RadialPath> radial_batch(double kappa, cplx z0, std::span<const double> t_grid,
                                     std::size_t n_paths, std::uint64_t seed, std::uint64_t stream,
                                     const BatchOptions& batch, const RadialOptions& opts) {
  return parallel_map(n_paths, batch.jobs, [&](std::size_t i) {
    const std::uint64_t s = rng::derive_seed(seed, stream, i);
    for (double horizon = batch.initial_horizon;; horizon *= 2.0) {
      const auto d = driver::couple(driver::sample_brownian(s, batch.level, horizon), kappa);
      try {
        return direct_flow(d, z0, t_grid, opts);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::horizon_exceeded || horizon * 2.0 > batch.max_horizon) throw;
      }
    }
  });
}

void write_radial_csv(const RadialPath& p, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  out << "t,X,Y,R,N,intN,sigma\n" << std::setprecision(17);
  for (std::size_t i = 0; i < p.t_grid.size(); ++i)
    out << p.t_grid[i] << ',' << p.X[i] << ',' << p.Y[i] << ',' << p.R[i] << ',' << p.N[i] << ','
        << p.intN[i] << ',' << p.sigma[i] << '\n';
}

}  // namespace sle::radial
