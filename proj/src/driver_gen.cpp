#include "sle/driver_gen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sle/errors.hpp"
#include "sle/philox.hpp"

namespace sle::driver {

namespace {

std::size_t grid_steps(double horizon, double step) {
  const double n = horizon / step;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n)) {
    std::ostringstream msg;
    msg << "horizon " << horizon << " is not a multiple of the grid step " << step;
    throw Error(ErrorKind::invalid_argument, msg.str());
  }
  return static_cast<std::size_t>(rounded);
}

double interpolate(const std::vector<double>& v, double step, double horizon, double t) {
  t = std::clamp(t, 0.0, horizon);
  const double x = t / step;
  auto k = static_cast<std::size_t>(x);
  if (k + 1 >= v.size()) return v.back();
  const double w = x - static_cast<double>(k);
  return v[k] + w * (v[k + 1] - v[k]);
}

}  // namespace

double BrownianPath::at(double t) const { return interpolate(values, step, horizon, t); }

double DriverPath::at(double t) const { return interpolate(values, base->step, base->horizon, t); }

BrownianPath sample_brownian(std::uint64_t seed, int level, double horizon) {
  if (level < 1) throw Error(ErrorKind::invalid_argument, "level must be >= 1");
  if (!(horizon > 0.0)) throw Error(ErrorKind::invalid_argument, "horizon must be > 0");
  if (level > 12) throw Error(ErrorKind::invalid_argument, "level above 12 is not supported");

  const double step = std::ldexp(1.0, -2 * level);
  const std::size_t n = grid_steps(horizon, step);
  const auto units = static_cast<std::size_t>(std::ceil(horizon - 1e-12));

  std::vector<double> current(units + 1, 0.0);
  for (std::size_t m = 1; m <= units; ++m) current[m] = current[m - 1] + rng::gaussian(seed, 0, m - 1);

  double h = 1.0;
  std::vector<double> next;
  for (int b = 1; b <= 2 * level; ++b) {
    const std::size_t intervals = current.size() - 1;
    next.assign(2 * intervals + 1, 0.0);
    const double sd = std::sqrt(h / 4.0);
    for (std::size_t i = 0; i < intervals; ++i) {
      next[2 * i] = current[i];
      next[2 * i + 1] = 0.5 * (current[i] + current[i + 1]) +
                        sd * rng::gaussian(seed, static_cast<std::uint32_t>(b), i);
    }
    next[2 * intervals] = current[intervals];
    current.swap(next);
    h *= 0.5;
  }
  current.resize(n + 1);

  BrownianPath path;
  path.seed = seed;
  path.level = level;
  path.horizon = horizon;
  path.step = step;
  path.values = std::move(current);
  return path;
}

BrownianPath injected_path(int level, double horizon, std::vector<double> values) {
  if (level < 0 || !(horizon > 0.0)) throw Error(ErrorKind::invalid_argument, "bad injected grid");
  const double step = std::ldexp(1.0, -2 * level);
  if (values.size() != grid_steps(horizon, step) + 1)
    throw Error(ErrorKind::invalid_argument, "injected values do not match the grid");
  BrownianPath path;
  path.level = level;
  path.horizon = horizon;
  path.step = step;
  path.generated = false;
  path.values = std::move(values);
  return path;
}

BrownianPath injected_path(int level, double horizon, const std::function<double(double)>& fn) {
  const double step = std::ldexp(1.0, -2 * level);
  const std::size_t n = grid_steps(horizon, step);
  std::vector<double> v(n + 1);
  for (std::size_t k = 0; k <= n; ++k) v[k] = fn(static_cast<double>(k) * step);
  return injected_path(level, horizon, std::move(v));
}

BrownianPath rescale(const BrownianPath& path, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "lambda must be > 0");
  BrownianPath out = path;
  out.step = path.step / (lambda * lambda);
  out.horizon = path.horizon / (lambda * lambda);
  out.generated = false;
  for (double& v : out.values) v /= lambda;
  return out;
}

bool admissible(double kappa, const AdmissibilityRules& rules) {
  return kappa > 0.0 && kappa >= rules.epsilon && std::abs(kappa - 8.0) >= rules.margin_eight &&
         std::isfinite(kappa);
}

KappaGrid KappaGrid::make(std::vector<double> points, double kappa_min, double kappa_max,
                          AdmissibilityRules rules) {
  if (points.empty()) throw Error(ErrorKind::invalid_argument, "empty kappa grid");
  if (!(kappa_min > 0.0) || kappa_max < kappa_min)
    throw Error(ErrorKind::invalid_argument, "kappa interval must satisfy 0 < min <= max");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double k = points[i];
    if (i > 0 && !(k > points[i - 1]))
      throw Error(ErrorKind::invalid_argument, "kappa grid must be strictly increasing");
    if (k < kappa_min || k > kappa_max)
      throw Error(ErrorKind::rejected_kappa, "kappa " + std::to_string(k) + " outside interval");
    if (!admissible(k, rules))
      throw Error(ErrorKind::rejected_kappa, "kappa " + std::to_string(k) + " is excluded");
  }
  KappaGrid grid;
  grid.kappa_min = kappa_min;
  grid.kappa_max = kappa_max;
  grid.rules = rules;
  grid.points = std::move(points);
  return grid;
}

KappaGrid KappaGrid::make(std::vector<double> points, AdmissibilityRules rules) {
  if (points.empty()) throw Error(ErrorKind::invalid_argument, "empty kappa grid");
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end());
  const double kmin = *lo;
  const double kmax = *hi;
  return make(std::move(points), kmin, kmax, rules);
}

KappaGrid KappaGrid::uniform(double kappa_min, double kappa_max, int count,
                             AdmissibilityRules rules) {
  if (count < 1) throw Error(ErrorKind::invalid_argument, "count must be >= 1");
  std::vector<double> pts;
  for (int i = 0; i < count; ++i) {
    const double k =
        count == 1 ? kappa_min : kappa_min + (kappa_max - kappa_min) * i / (count - 1.0);
    if (admissible(k, rules)) pts.push_back(k);
  }
  return make(std::move(pts), kappa_min, kappa_max, rules);
}

DriverPath couple(std::shared_ptr<const BrownianPath> path, double kappa,
                  const AdmissibilityRules& rules) {
  if (!path) throw Error(ErrorKind::invalid_argument, "null base path");
  if (!admissible(kappa, rules))
    throw Error(ErrorKind::rejected_kappa, "kappa " + std::to_string(kappa) + " is not admissible");
  DriverPath d;
  d.kappa = kappa;
  const double s = std::sqrt(kappa);
  d.values.resize(path->values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = s * path->values[i];
  d.base = std::move(path);
  return d;
}

DriverPath couple(const BrownianPath& path, double kappa, const AdmissibilityRules& rules) {
  return couple(std::make_shared<const BrownianPath>(path), kappa, rules);
}

int dyadic_level(double step) {
  for (int l = 0; l <= 20; ++l)
    if (step == std::ldexp(1.0, -2 * l)) return l;
  return -1;
}

ModulusReport modulus_certificate(const DriverPath& driver, double c1) {
  const int level = dyadic_level(driver.step());
  if (level < 0) throw Error(ErrorKind::insufficient_resolution, "grid step is not dyadic");
  if (level < 2) throw Error(ErrorKind::insufficient_resolution, "fewer than 2 dyadic scales");
  if (driver.horizon() < 1.0 - 1e-12)
    throw Error(ErrorKind::invalid_argument, "driver must cover [0, 1]");

  const auto& u = driver.values;
  const std::size_t last_t = static_cast<std::size_t>(std::llround(1.0 / driver.step()));
  const double root_kappa = std::sqrt(driver.kappa);

  ModulusReport report;
  report.per_scale_c.assign(static_cast<std::size_t>(level), 0.0);
  for (int j = 1; j <= level; ++j) {
    const std::size_t w = std::size_t{1} << (2 * (level - j));
    const std::size_t end = std::min(u.size() - 1, last_t + w);
    // Sliding max/min over the forward window [a, a + w] for every start a <= 1.
    std::deque<std::size_t> qmax, qmin;
    double worst = 0.0;
    std::size_t b = 0;
    for (std::size_t a = 0; a <= last_t; ++a) {
      const std::size_t hi = std::min(end, a + w);
      for (; b <= hi; ++b) {
        while (!qmax.empty() && u[qmax.back()] <= u[b]) qmax.pop_back();
        qmax.push_back(b);
        while (!qmin.empty() && u[qmin.back()] >= u[b]) qmin.pop_back();
        qmin.push_back(b);
      }
      while (qmax.front() < a) qmax.pop_front();
      while (qmin.front() < a) qmin.pop_front();
      worst = std::max({worst, u[qmax.front()] - u[a], u[a] - u[qmin.front()]});
    }
    const double scale = root_kappa * std::sqrt(static_cast<double>(j)) * std::ldexp(1.0, -j);
    const double c = worst / scale;
    report.per_scale_c[static_cast<std::size_t>(j - 1)] = c;
    if (j == 1 || c > report.fitted_c) {
      report.fitted_c = c;
      report.worst_scale = j;
    }
  }
  report.holds = report.fitted_c <= c1;
  return report;
}

void write_csv(const BrownianPath& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  out << "t,B_t\n" << std::setprecision(17);
  for (std::size_t k = 0; k < path.values.size(); ++k)
    out << static_cast<double>(k) * path.step << ',' << path.values[k] << '\n';
}

namespace {
static_assert(std::endian::native == std::endian::little, "binary dumps assume little-endian");

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::invalid_argument, "truncated binary path");
  return v;
}
}  // namespace

void write_binary(const BrownianPath& path, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  put<std::uint64_t>(out, path.seed);
  put<std::int32_t>(out, path.level);
  put<double>(out, path.horizon);
  put<std::uint64_t>(out, path.values.size());
  out.write(reinterpret_cast<const char*>(path.values.data()),
            static_cast<std::streamsize>(path.values.size() * sizeof(double)));
}

BrownianPath read_binary(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_argument, "cannot open " + file);
  BrownianPath path;
  path.seed = get<std::uint64_t>(in);
  path.level = get<std::int32_t>(in);
  path.horizon = get<double>(in);
  const auto n = get<std::uint64_t>(in);
  path.step = std::ldexp(1.0, -2 * path.level);
  path.values.resize(n);
  in.read(reinterpret_cast<char*>(path.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error(ErrorKind::invalid_argument, "truncated binary path");
  return path;
}

}  // namespace sle::driver
