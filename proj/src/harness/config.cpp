#include "sle/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sle/driver_gen.hpp"
#include "sle/errors.hpp"

namespace sle::harness {

using nlohmann::json;

namespace {

// One field list per struct drives writing, reading and key checking.
template <class F> void visit(SolverConfig& c, F&& f) {
  f("rtol", c.rtol);
  f("atol", c.atol);
  f("h_min", c.h_min);
  f("singular_fraction", c.singular_fraction);
  f("swallow_cutoff", c.swallow_cutoff);
}
template <class F> void visit(TraceConfig& c, F&& f) {
  f("driver", c.driver);
  f("level", c.level);
  f("t_points", c.t_points);
  f("y_cut", c.y_cut);
  f("refinement_bound", c.refinement_bound);
}
template <class F> void visit(SlitConfig& c, F&& f) {
  f("rel_tol", c.rel_tol);
  f("t_points", c.t_points);
}
template <class F> void visit(SolverOrderConfig& c, F&& f) {
  f("level", c.level);
  f("kappa", c.kappa);
  f("substeps", c.substeps);
  f("reference_substeps", c.reference_substeps);
  f("nominal_order", c.nominal_order);
  f("order_slack", c.order_slack);
}
template <class F> void visit(RadialConfig& c, F&& f) {
  f("kappas", c.kappas);
  f("times", c.times);
  f("paths", c.paths);
  f("derivative_paths", c.derivative_paths);
  f("level", c.level);
  f("martingale_rel_tol", c.martingale_rel_tol);
  f("martingale_se_factor", c.martingale_se_factor);
  f("lambda_min", c.lambda_min);
  f("lambda_max", c.lambda_max);
  f("lambda_count", c.lambda_count);
  f("confidence", c.confidence);
  f("derivative_rel_tol", c.derivative_rel_tol);
  f("derivative_abs_tol", c.derivative_abs_tol);
  f("time_change_tol", c.time_change_tol);
  f("supplementary_lambda_min", c.supplementary_lambda_min);
}
template <class F> void visit(ExponentConfig& c, F&& f) {
  f("grid_points", c.grid_points);
  f("argmax_tol", c.argmax_tol);
}
template <class F> void visit(DistributionConfig& c, F&& f) {
  f("kappa", c.kappa);
  f("z_re", c.z_re);
  f("z_im", c.z_im);
  f("t", c.t);
  f("n", c.n);
  f("p_min", c.p_min);
  f("level", c.level);
}
template <class F> void visit(SdeLawConfig& c, F&& f) {
  f("kappa", c.kappa);
  f("horizon", c.horizon);
  f("dt", c.dt);
  f("n", c.n);
  f("p_min", c.p_min);
}
template <class F> void visit(ContinuityConfig& c, F&& f) {
  f("kappa_ref", c.kappa_ref);
  f("deltas", c.deltas);
  f("seeds", c.seeds);
  f("level", c.level);
  f("t_points", c.t_points);
  f("y_cut", c.y_cut);
  f("q", c.q);
  f("beta", c.beta);
  f("map_check_y", c.map_check_y);
  f("map_check_times", c.map_check_times);
}
template <class F> void visit(WhitneyConfig& c, F&& f) {
  f("kappa_lo", c.kappa_lo);
  f("kappa_hi", c.kappa_hi);
  f("n_max", c.n_max);
  f("kappa_slices", c.kappa_slices);
  f("seeds", c.seeds);
  f("level", c.level);
  f("top_k", c.top_k);
  f("random_k", c.random_k);
  f("m_samples", c.m_samples);
  f("slope_slack", c.slope_slack);
  f("trend_tol", c.trend_tol);
}
template <class F> void visit(BorelCantelliConfig& c, F&& f) {
  f("epsilon1", c.epsilon1);
  f("beta", c.beta);
  f("n_max", c.n_max);
  f("paths", c.paths);
  f("level", c.level);
}
template <class F> void visit(ExistenceConfig& c, F&& f) {
  f("j_max", c.j_max);
  f("paths", c.paths);
  f("epsilon1", c.epsilon1);
  f("modulus_c", c.modulus_c);
  f("level", c.level);
}
template <class F> void visit(CapacityConfig& c, F&& f) {
  f("kappas", c.kappas);
  f("n", c.n);
  f("epsilon1", c.epsilon1);
  f("t", c.t);
  f("paths", c.paths);
  f("level", c.level);
}
template <class F> void visit(DeterminismConfig& c, F&& f) {
  f("suites", c.suites);
  f("jobs_a", c.jobs_a);
  f("jobs_b", c.jobs_b);
  f("paths_cap", c.paths_cap);
}
template <class F> void visit(ExperimentConfig& c, F&& f) {
  f("version", c.version);
  f("name", c.name);
  f("seed", c.seed);
  f("kappa_grid", c.kappa_grid);
  f("epsilon", c.epsilon);
  f("margin_eight", c.margin_eight);
  f("jobs", c.jobs);
  f("out_dir", c.out_dir);
  f("solver", c.solver);
  f("trace", c.trace);
  f("slit", c.slit);
  f("solver_order", c.solver_order);
  f("radial", c.radial);
  f("exponents", c.exponents);
  f("distribution", c.distribution);
  f("sde_laws", c.sde_laws);
  f("continuity", c.continuity);
  f("whitney", c.whitney);
  f("borel_cantelli", c.borel_cantelli);
  f("existence", c.existence);
  f("capacity", c.capacity);
  f("determinism", c.determinism);
  f("budget_seconds", c.budget_seconds);
}

struct Noop {
  template <class T> void operator()(const char*, T&) const {}
};

template <class T>
concept Section = requires(T& t) { visit(t, Noop{}); };

void bad(const std::string& what) { throw Error(ErrorKind::invalid_argument, "config: " + what); }

struct Writer {
  json& out;
  template <class T> void operator()(const char* key, T& v) const {
    if constexpr (Section<T>) {
      json sub = json::object();
      visit(v, Writer{sub});
      out[key] = std::move(sub);
    } else {
      out[key] = v;
    }
  }
};

struct Reader {
  const json& in;
  std::string path;
  template <class T> void operator()(const char* key, T& v) const {
    const auto it = in.find(key);
    if (it == in.end()) return;
    const std::string where = path + key;
    if constexpr (Section<T>) {
      if (!it->is_object()) bad(where + " must be an object");
      check_keys(*it, v, where + ".");
      visit(v, Reader{*it, where + "."});
    } else {
      try {
        // Integers must not silently truncate from floating point input.
        if constexpr (std::is_integral_v<T>) {
          if (!it->is_number_integer()) bad(where + " must be an integer");
          if constexpr (std::is_unsigned_v<T>)
            if (!it->is_number_unsigned() && it->template get<long long>() < 0) bad(where + " must be non-negative");
        }
        v = it->template get<T>();
      } catch (const json::exception& e) {
        bad(where + ": " + e.what());
      }
    }
  }

  template <class S> static void check_keys(const json& obj, S& section, const std::string& where) {
    std::set<std::string> known;
    visit(section, [&](const char* k, auto&) { known.insert(k); });
    for (const auto& [k, _] : obj.items())
      if (!known.count(k)) bad("unknown key " + where + k);
  }
};

}  // namespace

json to_json(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  json out = json::object();
  visit(copy, Writer{out});
  return out;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) bad("top level must be an object");
  ExperimentConfig c;
  Reader::check_keys(j, c, "");
  visit(c, Reader{j, ""});
  if (c.version != kConfigVersion)
    bad("version " + std::to_string(c.version) + " is not supported (expected " +
        std::to_string(kConfigVersion) + ")");
  return c;
}

ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) bad("cannot open " + file);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(file + ": " + e.what());
  }
  auto c = config_from_json(j);
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) bad(std::string(what) + " must be positive");
  };
  positive(c.solver.rtol, "solver.rtol");
  positive(c.solver.atol, "solver.atol");
  positive(c.solver.h_min, "solver.h_min");
  positive(c.solver.singular_fraction, "solver.singular_fraction");
  positive(c.solver.swallow_cutoff, "solver.swallow_cutoff");
  positive(c.trace.y_cut, "trace.y_cut");
  positive(c.trace.refinement_bound, "trace.refinement_bound");
  positive(c.slit.rel_tol, "slit.rel_tol");
  positive(c.radial.martingale_rel_tol, "radial.martingale_rel_tol");
  positive(c.radial.derivative_rel_tol, "radial.derivative_rel_tol");
  positive(c.radial.derivative_abs_tol, "radial.derivative_abs_tol");
  positive(c.radial.time_change_tol, "radial.time_change_tol");
  positive(c.exponents.argmax_tol, "exponents.argmax_tol");
  positive(c.distribution.p_min, "distribution.p_min");
  positive(c.sde_laws.p_min, "sde_laws.p_min");
  positive(c.sde_laws.dt, "sde_laws.dt");
  positive(c.continuity.y_cut, "continuity.y_cut");
  positive(c.continuity.q, "continuity.q");
  positive(c.continuity.map_check_y, "continuity.map_check_y");
  positive(c.whitney.slope_slack, "whitney.slope_slack");
  positive(c.borel_cantelli.epsilon1, "borel_cantelli.epsilon1");
  positive(c.existence.epsilon1, "existence.epsilon1");
  positive(c.existence.modulus_c, "existence.modulus_c");
  positive(c.capacity.epsilon1, "capacity.epsilon1");
  if (c.jobs < 1) bad("jobs must be >= 1");
  if (c.trace.driver != "brownian" && c.trace.driver != "zero") bad("trace.driver must be brownian or zero");
  if (c.trace.t_points < 2) bad("trace.t_points must be >= 2");
  try {
    driver::KappaGrid::make(c.kappa_grid, {c.epsilon, c.margin_eight});
    driver::KappaGrid::make(c.radial.kappas, {c.epsilon, c.margin_eight});
    driver::KappaGrid::make(c.capacity.kappas, {c.epsilon, c.margin_eight});
  } catch (const Error& e) {
    bad(std::string("kappa grid: ") + e.what());
  }
  // The tail suite also evaluates the branch factor, which needs e <= lambda.
  if (c.radial.lambda_min < std::exp(1.0) * (1.0 - 1e-15))
    bad("radial.lambda_min must be >= e (branch table domain)");
  if (c.radial.lambda_max <= c.radial.lambda_min || c.radial.lambda_count < 2)
    bad("radial lambda grid needs lambda_max > lambda_min and lambda_count >= 2");
  if (c.radial.paths < 100) bad("radial.paths must be >= 100");
  if (!(c.radial.confidence > 0.0 && c.radial.confidence < 1.0)) bad("radial.confidence must lie in (0, 1)");
  if (c.distribution.n < 500) bad("distribution.n must be >= 500");
  if (c.sde_laws.n < 100) bad("sde_laws.n must be >= 100");
  if (c.exponents.grid_points < 2) bad("exponents.grid_points must be >= 2");
  if (c.borel_cantelli.n_max < 1 || c.borel_cantelli.n_max > 6) bad("borel_cantelli.n_max must lie in [1, 6]");
  if (c.existence.j_max < 1 || c.existence.j_max > 6) bad("existence.j_max must lie in [1, 6]");
  if (c.whitney.n_max < 1 || c.whitney.n_max > 6) bad("whitney.n_max must lie in [1, 6]");
  if (c.whitney.m_samples < 8) bad("whitney.m_samples must be >= 8");
  if (c.continuity.deltas.size() < 4) bad("continuity.deltas needs at least 4 values");
  if (c.solver_order.substeps.size() < 2) bad("solver_order.substeps needs at least 2 values");
  if (c.determinism.jobs_a < 1 || c.determinism.jobs_b < 1) bad("determinism jobs must be >= 1");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c) {
  // Worker count and output location do not change results.
  json j = to_json(c);
  j.erase("jobs");
  j.erase("out_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace sle::harness
