#include "sle/continuity_lab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "sle/errors.hpp"
#include "sle/parallel.hpp"
#include "sle/philox.hpp"
#include "sle/stats.hpp"

namespace sle::continuity {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::invalid_argument, what);
}

// Message of an Error without its "kind: " prefix.
std::string bare_message(const Error& e) {
  const std::string all = e.what();
  const std::size_t skip = to_string(e.kind()).size() + 2;
  return all.size() > skip ? all.substr(skip) : all;
}

loewner::MapValue centered_inverse(const driver::DriverPath& d, double t, double y,
                                   const loewner::SolverOptions& solver) {
  try {
    return loewner::reverse_map(d, t, cplx(d.at(t), y), solver);
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << bare_message(e) << " at (t, y, kappa) = (" << t << ", " << y << ", " << d.kappa << ")";
    throw Error(e.kind(), msg.str());
  }
}

}  // namespace

long kappa_slabs(int n, double q) {
  return static_cast<long>(std::ceil(std::exp2(q * n) - 1e-9));
}

std::vector<WhitneyBox> whitney_grid(int n_min, int n_max, double q, KappaInterval kappa,
                                     std::size_t max_boxes) {
  require(q > 0.0, "whitney_grid: q must be positive");
  require(n_min >= 1 && n_max <= 6 && n_min <= n_max, "whitney_grid: n range must lie in [1, 6]");
  require(kappa.hi > kappa.lo, "whitney_grid: empty kappa interval");
  std::size_t total = 0;
  for (int n = n_min; n <= n_max; ++n)
    total += (std::size_t{1} << (2 * n)) * static_cast<std::size_t>(kappa_slabs(n, q));
  require(total <= max_boxes, "whitney_grid: " + std::to_string(total) + " boxes exceed the limit");

  std::vector<WhitneyBox> out;
  out.reserve(total);
  for (int n = n_min; n <= n_max; ++n) {
    const long columns = 1L << (2 * n);
    const long slabs = kappa_slabs(n, q);
    const double width = std::exp2(-q * n);
    for (long k = 1; k <= slabs; ++k) {
      const double u_lo = (k - 1) * width;
      const double u_hi = std::min(1.0, k * width);
      for (long j = 1; j <= columns; ++j) {
        WhitneyBox b;
        b.n = n;
        b.j = static_cast<int>(j);
        b.k = static_cast<int>(k);
        b.q = q;
        b.t_lo = std::ldexp(static_cast<double>(j - 1), -2 * n);
        b.t_hi = std::ldexp(static_cast<double>(j), -2 * n);
        b.y_lo = std::ldexp(1.0, -n);
        b.y_hi = std::ldexp(1.0, -n + 1);
        b.kappa_lo = kappa.map(u_lo);
        b.kappa_hi = kappa.map(u_hi);
        b.corner_t = b.t_hi;
        b.corner_y = b.y_lo;
        b.corner_kappa = b.kappa_hi;
        out.push_back(b);
      }
    }
  }
  return out;
}

std::vector<WhitneyBox> kappa_slices(const std::vector<WhitneyBox>& boxes, int slices) {
  require(slices >= 2, "kappa_slices: need at least two slices");
  std::map<int, int> slabs;
  for (const auto& b : boxes) slabs[b.n] = std::max(slabs[b.n], b.k);
  std::map<int, std::vector<int>> keep;
  for (const auto& [n, count] : slabs) {
    auto& ks = keep[n];
    const int m = std::min(slices, count);
    for (int i = 0; i < m; ++i)
      ks.push_back(m == 1 ? 1 : 1 + static_cast<int>(std::lround(double(count - 1) * i / (m - 1))));
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  }
  std::vector<WhitneyBox> out;
  for (const auto& b : boxes) {
    const auto& ks = keep[b.n];
    if (std::binary_search(ks.begin(), ks.end(), b.k)) out.push_back(b);
  }
  return out;
}

long locate(const std::vector<WhitneyBox>& boxes, double t, double y, double kappa) {
  // Half-open on the lower faces so that interior-disjoint boxes give a unique owner;
  // the upper faces of the domain itself are closed.
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const bool in_t = (t > b.t_lo || (b.t_lo == 0.0 && t == 0.0)) && t <= b.t_hi;
    const bool in_y = y >= b.y_lo && y < b.y_hi;
    const bool in_k = (kappa > b.kappa_lo || (b.k == 1 && kappa == b.kappa_lo)) && kappa <= b.kappa_hi;
    if (in_t && in_y && in_k) return static_cast<long>(i);
  }
  return -1;
}

loewner::MapValue eval_F(const driver::BrownianPath& base, double t, double y, double kappa,
                         const loewner::SolverOptions& solver) {
  require(y > 0.0, "eval_F: y must be positive");
  return centered_inverse(driver::couple(base, kappa), t, y, solver);
}

CornerScan corner_scan(const driver::BrownianPath& base, const std::vector<WhitneyBox>& boxes,
                       double beta, double c, int jobs, const loewner::SolverOptions& solver) {
  require(beta > 0.0 && beta <= 1.0, "corner_scan: beta must lie in (0, 1]");
  require(!boxes.empty(), "corner_scan: no boxes");
  const auto shared = std::make_shared<const driver::BrownianPath>(base);
  CornerScan scan;
  scan.abs_derivative = parallel_map(boxes.size(), jobs, [&](std::size_t i) {
    const auto& b = boxes[i];
    const auto d = driver::couple(shared, b.corner_kappa);
    return std::abs(centered_inverse(d, b.corner_t, b.corner_y, solver).derivative);
  });
  std::map<int, double> per_n;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double scaled = scan.abs_derivative[i] * std::exp2(-boxes[i].n * beta);
    per_n[boxes[i].n] = std::max(per_n[boxes[i].n], scaled);
    scan.fitted_c = std::max(scan.fitted_c, scaled);
  }
  for (const auto& [n, m] : per_n) {
    scan.per_n_level.push_back(n);
    scan.per_n_max.push_back(m);
  }
  scan.c_used = c > 0.0 ? c : scan.per_n_max.front();
  for (std::size_t i = 0; i < boxes.size(); ++i)
    // Relative slack so that the corner defining c_used is not counted against itself.
    if (scan.abs_derivative[i] > scan.c_used * std::exp2(boxes[i].n * beta) * (1.0 + 1e-12))
      ++scan.violations;
  if (scan.per_n_level.size() >= 2) {
    std::vector<double> ns, logs;
    for (std::size_t i = 0; i < scan.per_n_level.size(); ++i) {
      ns.push_back(scan.per_n_level[i]);
      logs.push_back(std::log2(scan.per_n_max[i]));
    }
    scan.trend_slope = stats::least_squares(ns, logs).slope;
  }
  return scan;
}

double box_diameter(const driver::BrownianPath& base, const WhitneyBox& box, int m_samples,
                    std::uint64_t sample_seed, const loewner::SolverOptions& solver) {
  require(m_samples >= 8, "box_diameter: need at least 8 samples");
  struct P {
    double t, y, kappa;
  };
  std::vector<P> pts;
  for (int v = 0; v < 8; ++v)
    pts.push_back({v & 1 ? box.t_hi : box.t_lo, v & 2 ? box.y_hi : box.y_lo,
                   v & 4 ? box.kappa_hi : box.kappa_lo});
  const std::uint64_t key = rng::derive_seed(
      sample_seed, static_cast<std::uint64_t>(box.n),
      (static_cast<std::uint64_t>(box.j) << 32) | static_cast<std::uint64_t>(box.k));
  for (int i = 0; i < m_samples; ++i) {
    const std::uint64_t idx = 3 * static_cast<std::uint64_t>(i);
    pts.push_back({box.t_lo + rng::uniform(key, 0, idx) * (box.t_hi - box.t_lo),
                   box.y_lo + rng::uniform(key, 0, idx + 1) * (box.y_hi - box.y_lo),
                   box.kappa_lo + rng::uniform(key, 0, idx + 2) * (box.kappa_hi - box.kappa_lo)});
  }
  const auto shared = std::make_shared<const driver::BrownianPath>(base);
  std::vector<cplx> values;
  for (const auto& p : pts)
    values.push_back(centered_inverse(driver::couple(shared, p.kappa), p.t, p.y, solver).value);
  double diam = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a)
    for (std::size_t b = a + 1; b < values.size(); ++b) diam = std::max(diam, std::abs(values[a] - values[b]));
  return diam;
}

DiameterScan diameter_scan(const driver::BrownianPath& base, const std::vector<WhitneyBox>& boxes,
                           const CornerScan& corners, int top_k, int random_k, int m_samples,
                           std::uint64_t sample_seed, int jobs, const loewner::SolverOptions& solver) {
  require(corners.abs_derivative.size() == boxes.size(), "diameter_scan: corner scan does not match boxes");
  std::map<int, std::vector<std::size_t>> by_n;
  for (std::size_t i = 0; i < boxes.size(); ++i) by_n[boxes[i].n].push_back(i);
  std::vector<std::size_t> chosen;
  std::vector<int> level_of;
  for (auto& [n, idx] : by_n) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return corners.abs_derivative[a] > corners.abs_derivative[b];
    });
    const std::size_t top = std::min<std::size_t>(top_k, idx.size());
    std::vector<std::size_t> rest(idx.begin() + top, idx.end());
    for (std::size_t i = 0; i < top; ++i) chosen.push_back(idx[i]), level_of.push_back(n);
    // Partial Fisher-Yates over the remaining boxes.
    const std::size_t extra = std::min<std::size_t>(random_k, rest.size());
    for (std::size_t i = 0; i < extra; ++i) {
      const double u = rng::uniform(sample_seed, 1000 + n, i);
      const std::size_t pick = i + static_cast<std::size_t>(u * (rest.size() - i));
      std::swap(rest[i], rest[std::min(pick, rest.size() - 1)]);
      chosen.push_back(rest[i]);
      level_of.push_back(n);
    }
  }
  const auto diam = parallel_map(chosen.size(), jobs, [&](std::size_t i) {
    return box_diameter(base, boxes[chosen[i]], m_samples, sample_seed, solver);
  });
  std::map<int, double> worst;
  for (std::size_t i = 0; i < chosen.size(); ++i) worst[level_of[i]] = std::max(worst[level_of[i]], diam[i]);
  DiameterScan scan;
  std::vector<double> logs;
  for (const auto& [n, d] : worst) {
    scan.levels.push_back(n);
    scan.max_diameter.push_back(d);
    logs.push_back(std::log2(d));
  }
  if (scan.levels.size() >= 2) {
    const std::vector<double> ns(scan.levels.begin(), scan.levels.end());
    scan.slope = stats::least_squares(ns, logs).slope;
  }
  return scan;
}

double capacity_radius(double t, double y) { return std::sqrt(4.0 * t + y * y); }

double map_difference_bound(double f1_abs_deriv, double f2_abs_deriv, double epsilon, double t,
                            double y) {
  require(y > 0.0 && t >= 0.0 && epsilon >= 0.0, "map_difference_bound: bad arguments");
  const double I = capacity_radius(t, y);
  require(I / y > std::exp(1.0), "map_difference_bound: need I/y > e");
  const double l1 = std::log(I * f1_abs_deriv / y);
  const double l2 = std::log(I * f2_abs_deriv / y);
  require(l1 >= 0.0 && l2 >= 0.0, "map_difference_bound: need |f'| >= y/I");
  return epsilon * std::exp(0.5 * std::sqrt(l1 * l2) + std::log(std::log(I / y)));
}

MapDifferenceCheck map_difference_check(const driver::BrownianPath& base, double kappa1,
                                        double kappa2, double t, cplx u,
                                        const loewner::SolverOptions& solver) {
  require(t >= 0.0 && t <= base.horizon, "map_difference_check: t outside the path");
  MapDifferenceCheck c;
  c.t = t;
  c.u = u;
  // The coupled drivers differ by (sqrt k2 - sqrt k1) B and are linear between knots.
  double sup_b = std::abs(base.at(t));
  for (std::size_t i = 0; i < base.size() && i * base.step <= t; ++i) sup_b = std::max(sup_b, std::abs(base.values[i]));
  c.epsilon = std::abs(std::sqrt(kappa2) - std::sqrt(kappa1)) * sup_b;
  const auto shared = std::make_shared<const driver::BrownianPath>(base);
  const auto f1 = loewner::reverse_map(driver::couple(shared, kappa1), t, u, solver);
  const auto f2 = loewner::reverse_map(driver::couple(shared, kappa2), t, u, solver);
  c.difference = std::abs(f1.value - f2.value);
  c.bound = map_difference_bound(std::abs(f1.derivative), std::abs(f2.derivative), c.epsilon, t, u.imag());
  c.holds = c.difference <= c.bound;
  return c;
}

double trace_distance(const driver::BrownianPath& base, double kappa1, double kappa2,
                      std::span<const double> t_grid, const loewner::TraceOptions& opts) {
  if (kappa1 == kappa2) return 0.0;
  const auto shared = std::make_shared<const driver::BrownianPath>(base);
  const auto d1 = driver::couple(shared, kappa1);
  const auto d2 = driver::couple(shared, kappa2);
  double sup = 0.0;
  for (double t : t_grid)
    sup = std::max(sup, std::abs(loewner::trace_point(d1, t, opts).gamma -
                                 loewner::trace_point(d2, t, opts).gamma));
  return sup;
}

double phi(double beta) { return std::sqrt((1.0 + beta) / 2.0); }

double delta_of(double beta, double q) {
  require(beta > 0.0 && beta < 1.0, "delta_of: beta must lie in (0, 1)");
  require(q > phi(beta), "delta_of: need q > phi(beta)");
  return std::min(1.0 - beta, q - phi(beta));
}

HolderFit holder_fit(std::span<const double> delta_kappa, std::span<const double> distance) {
  require(delta_kappa.size() == distance.size(), "holder_fit: size mismatch");
  HolderFit fit;
  std::vector<double> x, y;
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < distance.size(); ++i) {
    require(delta_kappa[i] > 0.0, "holder_fit: delta kappa must be positive");
    if (!(distance[i] > 0.0)) {
      ++fit.excluded;
      continue;
    }
    x.push_back(std::log(delta_kappa[i]));
    y.push_back(std::log(distance[i]));
    lo = std::min(lo, delta_kappa[i]);
    hi = std::max(hi, delta_kappa[i]);
  }
  if (fit.excluded > 0) fit.note = std::to_string(fit.excluded) + " zero distance(s) excluded";
  fit.used = x.size();
  require(fit.used >= 4, "holder_fit: need at least 4 usable pairs");
  require(hi >= 4.0 * lo, "holder_fit: pairs must span two dyadic scales");
  const auto line = stats::least_squares(x, y);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  return fit;
}

ContinuityReport kappa_scan(const driver::BrownianPath& base, double kappa_ref,
                            std::span<const double> deltas, std::span<const double> t_grid,
                            double q, double beta, const loewner::TraceOptions& opts) {
  ContinuityReport rep;
  rep.kappa_ref = kappa_ref;
  rep.q = q;
  rep.beta = beta;
  rep.delta = delta_of(beta, q);
  const double exponent = rep.delta / q;
  std::vector<double> dk, dist;
  for (double delta : deltas) {
    KappaPair p;
    p.kappa = kappa_ref + delta;
    p.delta_kappa = std::abs(delta);
    p.sup_distance = trace_distance(base, kappa_ref, p.kappa, t_grid, opts);
    rep.theta_constant = std::max(rep.theta_constant, p.sup_distance / std::pow(p.delta_kappa, exponent));
    rep.pairs.push_back(p);
    dk.push_back(p.delta_kappa);
    dist.push_back(p.sup_distance);
  }
  for (auto& p : rep.pairs) p.theta_bound = rep.theta_constant * std::pow(p.delta_kappa, exponent);
  rep.fitted_holder = std::nan("");
  if (rep.pairs.size() >= 4) {
    try {
      rep.fitted_holder = holder_fit(dk, dist).slope;
    } catch (const Error&) {
      // Too few nonzero distances; the slope stays NaN.
    }
  }
  return rep;
}

int bracket_level(double delta_kappa, double q) {
  require(delta_kappa > 0.0 && q > 0.0, "bracket_level: need delta kappa > 0 and q > 0");
  int N = static_cast<int>(std::floor(-std::log2(delta_kappa) / q)) + 1;
  while (std::exp2(-q * N) >= delta_kappa) ++N;
  while (N > 1 && std::exp2(-q * (N - 1)) < delta_kappa) --N;
  return N;
}

ThreeTermSplit three_term_split(const driver::BrownianPath& base, double t, double y,
                                double kappa1, double kappa2, double q,
                                const loewner::SolverOptions& solver) {
  ThreeTermSplit s;
  s.N = bracket_level(std::abs(kappa2 - kappa1), q);
  s.y_N = std::ldexp(1.0, -s.N);
  const cplx a = eval_F(base, t, y, kappa1, solver).value;
  const cplx b = eval_F(base, t, y, kappa2, solver).value;
  const cplx a_N = eval_F(base, t, s.y_N, kappa1, solver).value;
  const cplx b_N = eval_F(base, t, s.y_N, kappa2, solver).value;
  s.direct = std::abs(a - b);
  s.leg1 = std::abs(a - a_N);
  s.leg_kappa = std::abs(a_N - b_N);
  s.leg2 = std::abs(b_N - b);
  s.holds = s.direct <= (s.leg1 + s.leg_kappa + s.leg2) * (1.0 + 1e-12);
  return s;
}

}  // namespace sle::continuity
