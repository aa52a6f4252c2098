#include "sle/loewner_engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <iomanip>

#include "sle/errors.hpp"

namespace sle::loewner {

namespace {

using flow::DriverView;
using Stepper = ode::DormandPrince<4, flow::LoewnerRhs>;

DriverView view_of(const driver::DriverPath& d, Parametrization param, double origin,
                   bool reversed) {
  const auto& v = param == Parametrization::standard ? d.values : d.base->values;
  return DriverView{v.data(), v.size(), d.step(), origin, reversed};
}

double coefficient(Parametrization param, double kappa) {
  return param == Parametrization::standard ? 2.0 : 2.0 / kappa;
}

void check_point(cplx z) {
  if (!(z.imag() > 0.0) || !std::isfinite(z.real()))
    throw Error(ErrorKind::invalid_argument, "initial point must lie in the upper half-plane");
}

void check_time(const driver::DriverPath& d, double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::invalid_argument, "time must be >= 0");
  if (t > d.horizon() * (1.0 + 1e-12))
    throw Error(ErrorKind::out_of_range, "time " + std::to_string(t) + " beyond driver horizon");
}

double initial_step(const DriverView& v) { return std::min(v.step, 1e-2); }

FlowResult run(const driver::DriverPath& d, cplx z0, double t_end, const SolverOptions& opts,
               Parametrization param, std::span<const double> outputs, Direction dir) {
  check_point(z0);
  check_time(d, t_end);
  const DriverView v = view_of(d, param, 0.0, false);
  const double a = coefficient(param, d.kappa);
  const double sign = dir == Direction::forward ? 1.0 : -1.0;

  std::vector<double> grid;
  if (outputs.empty()) {
    for (std::size_t k = 0; static_cast<double>(k) * v.step < t_end; ++k)
      grid.push_back(static_cast<double>(k) * v.step);
    grid.push_back(t_end);
  } else {
    grid.assign(outputs.begin(), outputs.end());
    if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0.0 || grid.back() > t_end)
      throw Error(ErrorKind::invalid_argument, "output times must be sorted within [0, t_end]");
  }

  FlowResult res;
  res.direction = dir;
  res.param = param;
  res.kappa = d.kappa;
  res.times.reserve(grid.size());
  res.points.reserve(grid.size());
  res.derivative.reserve(grid.size());

  Stepper st(flow::LoewnerRhs{v, a, sign}, opts.step.tol);
  st.reset(0.0, {z0.real(), z0.imag(), 0.0, 0.0});
  double h = initial_step(v);
  const double frac = opts.step.singular_fraction;
  auto cap = [&](double s, const ode::Vec<4>& y) {
    const double zx = y[0] - v.at(s);
    return frac * (zx * zx + y[1] * y[1]) / a;
  };
  const double cut2 = opts.swallow_cutoff * opts.swallow_cutoff;
  auto stop = [&](double s, const ode::Vec<4>& y) {
    if (dir == Direction::backward) return false;
    const double zx = y[0] - v.at(s);
    return zx * zx + y[1] * y[1] < cut2;
  };

  for (double t_out : grid) {
    if (!flow::advance_to(st, t_out, h, v, opts.step, cap, stop, res.steps)) {
      res.swallowing_time = st.t();
      break;
    }
    const auto& y = st.y();
    res.times.push_back(t_out);
    res.points.emplace_back(y[0], y[1]);
    res.derivative.push_back(std::exp(cplx(y[2], y[3])));
  }
  return res;
}

}  // namespace

std::string to_string(Parametrization p) {
  return p == Parametrization::standard ? "standard" : "two_over_kappa";
}

Parametrization parametrization_from_string(const std::string& s) {
  if (s == "standard") return Parametrization::standard;
  if (s == "two_over_kappa") return Parametrization::two_over_kappa;
  throw Error(ErrorKind::invalid_argument, "unknown parametrization '" + s + "'");
}

FlowResult evolve_forward(const driver::DriverPath& driver, cplx z0, double t_end,
                          const SolverOptions& opts, Parametrization param,
                          std::span<const double> outputs) {
  return run(driver, z0, t_end, opts, param, outputs, Direction::forward);
}

FlowResult evolve_backward(const driver::DriverPath& driver, cplx z0, double t_end,
                           const SolverOptions& opts, Parametrization param,
                           std::span<const double> outputs) {
  return run(driver, z0, t_end, opts, param, outputs, Direction::backward);
}

MapValue forward_map(const driver::DriverPath& driver, double t, cplx z, const SolverOptions& opts,
                     Parametrization param) {
  const double out[] = {t};
  const FlowResult r = run(driver, z, t, opts, param, out, Direction::forward);
  if (r.points.empty())
    throw Error(ErrorKind::out_of_range,
                "point swallowed at t = " + std::to_string(r.swallowing_time));
  return {r.points.back(), r.derivative.back()};
}

MapValue reverse_map(const driver::DriverPath& driver, double t, cplx z, const SolverOptions& opts,
                     Parametrization param) {
  check_point(z);
  check_time(driver, t);
  if (t == 0.0) return {z, 1.0};
  const DriverView v = view_of(driver, param, t, true);
  const double a = coefficient(param, driver.kappa);
  Stepper st(flow::LoewnerRhs{v, a, -1.0}, opts.step.tol);
  st.reset(0.0, {z.real(), z.imag(), 0.0, 0.0});
  double h = initial_step(v);
  long steps = 0;
  const double frac = opts.step.singular_fraction;
  flow::advance_to(
      st, t, h, v, opts.step,
      [&](double s, const ode::Vec<4>& y) {
        const double zx = y[0] - v.at(s);
        return frac * (zx * zx + y[1] * y[1]) / a;
      },
      [](double, const ode::Vec<4>&) { return false; }, steps);
  const auto& y = st.y();
  return {cplx(y[0], y[1]), std::exp(cplx(y[2], y[3]))};
}

cplx pde_inverse_sample(const driver::DriverPath& driver, double t, cplx z,
                        const SolverOptions& opts) {
  return reverse_map(driver, t, z, opts, Parametrization::standard).value;
}

FlowResult convert(const FlowResult& flow, Parametrization target) {
  FlowResult out = flow;
  if (target == flow.param) return out;
  const double s = std::sqrt(flow.kappa);
  const double factor = target == Parametrization::two_over_kappa ? 1.0 / s : s;
  out.param = target;
  for (cplx& p : out.points) p *= factor;
  return out;
}

TraceSample trace_point(const driver::DriverPath& driver, double t, const TraceOptions& opts) {
  if (!(opts.y_cut > 0.0)) throw Error(ErrorKind::invalid_argument, "y_cut must be > 0");
  check_time(driver, t);
  TraceSample s;
  s.t = t;
  s.y_cut = opts.y_cut;
  const double u = driver.at(t);
  if (t == 0.0) {
    s.gamma = cplx(u, 0.0);
    s.refinement_gap = 0.0;
    return s;
  }
  s.gamma = reverse_map(driver, t, cplx(u, opts.y_cut), opts.solver).value;
  if (opts.check_refinement) {
    const cplx coarse = reverse_map(driver, t, cplx(u, 2.0 * opts.y_cut), opts.solver).value;
    s.refinement_gap = std::abs(s.gamma - coarse);
    if (s.refinement_gap > opts.refinement_bound) {
      std::ostringstream msg;
      msg << "trace at t = " << t << " moved by " << s.refinement_gap << " between y_cut "
          << 2.0 * opts.y_cut << " and " << opts.y_cut;
      throw Error(ErrorKind::trace_unresolved, msg.str());
    }
  }
  return s;
}

std::vector<TraceSample> trace(const driver::DriverPath& driver, std::span<const double> t_grid,
                               const TraceOptions& opts) {
  std::vector<TraceSample> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(trace_point(driver, t, opts));
  return out;
}

namespace {

// g - z0 carried directly so relative tolerance applies to the small offset.
struct OffsetRhs {
  DriverView drv;
  double a;
  cplx z0;
  void operator()(double s, const ode::Vec<2>& w, ode::Vec<2>& dw) const {
    const double zx = z0.real() + w[0] - drv.at(s);
    const double zy = z0.imag() + w[1];
    const double r2 = zx * zx + zy * zy;
    dw[0] = a * zx / r2;
    dw[1] = -a * zy / r2;
  }
};

}  // namespace

HcapEstimate hcap_estimate(const driver::DriverPath& driver, double t, const SolverOptions& opts,
                           double residual_bound) {
  check_time(driver, t);
  HcapEstimate est;
  est.t = t;
  if (t == 0.0) return est;

  const DriverView v = view_of(driver, Parametrization::standard, 0.0, false);
  constexpr double kRadii[] = {100.0, 200.0, 400.0};
  Eigen::Matrix<double, 6, 5> A;
  Eigen::Matrix<double, 6, 1> rhs;
  ode::Tolerances tol = opts.step.tol;
  tol.rtol = std::min(tol.rtol, 1e-12);
  tol.atol = 1e-18;
  for (int k = 0; k < 3; ++k) {
    const cplx z(0.0, kRadii[k]);
    ode::DormandPrince<2, OffsetRhs> st(OffsetRhs{v, 2.0, z}, tol);
    st.reset(0.0, {0.0, 0.0});
    double h = initial_step(v);
    long steps = 0;
    flow::advance_to(
        st, t, h, v, opts.step, [](double, const ode::Vec<2>&) { return flow::kInf; },
        [](double, const ode::Vec<2>&) { return false; }, steps);
    const cplx w = cplx(st.y()[0], st.y()[1]) * z;
    const cplx u = 1.0 / z;
    const cplx u2 = u * u;
    A.row(2 * k) << 1.0, u.real(), -u.imag(), u2.real(), -u2.imag();
    A.row(2 * k + 1) << 0.0, u.imag(), u.real(), u2.imag(), u2.real();
    rhs(2 * k) = w.real();
    rhs(2 * k + 1) = w.imag();
  }
  const Eigen::Matrix<double, 5, 1> coef = A.colPivHouseholderQr().solve(rhs);
  est.hcap = coef(0);
  est.fit_residual = (A * coef - rhs).cwiseAbs().maxCoeff();
  if (est.fit_residual > residual_bound) {
    std::ostringstream msg;
    msg << "hcap fit residual " << est.fit_residual << " exceeds " << residual_bound;
    throw Error(ErrorKind::normalization_violation, msg.str());
  }
  return est;
}

double scaling_check(const driver::BrownianPath& path, double kappa, double lambda,
                     std::span<const double> t_grid, const TraceOptions& opts) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "lambda must be > 0");
  const driver::DriverPath base = driver::couple(path, kappa);
  const driver::DriverPath scaled = driver::couple(driver::rescale(path, lambda), kappa);
  TraceOptions lhs_opts = opts;
  lhs_opts.check_refinement = false;
  TraceOptions rhs_opts = lhs_opts;
  rhs_opts.y_cut = lambda * opts.y_cut;
  double worst = 0.0;
  for (double t : t_grid) {
    if (lambda * lambda * t > path.horizon * (1.0 + 1e-12))
      throw Error(ErrorKind::invalid_argument, "lambda^2 t exceeds the path horizon");
    const cplx lhs = trace_point(scaled, t, lhs_opts).gamma;
    const cplx rhs = trace_point(base, lambda * lambda * t, rhs_opts).gamma / lambda;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

DistortionReport distortion_check(const driver::DriverPath& driver, cplx z, double t,
                                  int samples, const SolverOptions& opts) {
  if (samples < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 samples");
  const double y = z.imag();
  const MapValue base = reverse_map(driver, t, z, opts);
  const double base_abs = std::abs(base.derivative);
  DistortionReport rep;
  for (int i = 0; i < samples; ++i) {
    const double s = y * y * i / (samples - 1.0);
    if (t + s > driver.horizon()) break;
    const MapValue m = reverse_map(driver, t + s, z, opts);
    const double ratio = std::abs(m.derivative) / base_abs;
    rep.max_ratio = std::max({rep.max_ratio, ratio, 1.0 / ratio});
    rep.max_displacement =
        std::max(rep.max_displacement, std::abs(m.value - base.value) / (y * base_abs));
  }
  rep.constant = std::max(rep.max_ratio, rep.max_displacement);
  return rep;
}

void write_trace_csv(const std::vector<TraceSample>& samples, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  out << "t,re_gamma,im_gamma,y_cut\n" << std::setprecision(17);
  for (const auto& s : samples)
    out << s.t << ',' << s.gamma.real() << ',' << s.gamma.imag() << ',' << s.y_cut << '\n';
}

void write_flow_csv(const FlowResult& flow, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  out << "t,re_z,im_z,re_dz,im_dz\n" << std::setprecision(17);
  for (std::size_t k = 0; k < flow.times.size(); ++k)
    out << flow.times[k] << ',' << flow.points[k].real() << ',' << flow.points[k].imag() << ','
        << flow.derivative[k].real() << ',' << flow.derivative[k].imag() << '\n';
}

}  // namespace sle::loewner
