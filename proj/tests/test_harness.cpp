#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sle/errors.hpp"
#include "sle/harness/config.hpp"
#include "sle/harness/run.hpp"
#include "sle/harness/suites.hpp"

using namespace sle;
using namespace sle::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sle-harness-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::nan_detected;
}

}  // namespace

TEST_CASE("config round trip is lossless") {
  ExperimentConfig c;
  c.name = "rt";
  c.seed = 77;
  c.kappa_grid = {2.0, 5.0};
  c.radial.paths = 321;
  c.continuity.deltas = {0.3, 0.15, 0.075, 0.0375, 0.01};
  c.sde_laws.dt = 0x1.0p-6;
  c.budget_seconds["tails"] = 12.5;
  const json j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_from_json(json::parse(j.dump())).radial.paths == 321);
}

TEST_CASE("missing keys keep defaults") {
  const auto c = config_from_json(json{{"seed", 5}});
  CHECK(c.seed == 5);
  CHECK(to_json(c)["radial"] == to_json(ExperimentConfig{})["radial"]);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK(kind_of([] { config_from_json(json{{"sed", 5}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json{{"radial", {{"pahts", 5}}}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json{{"radial", 5}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json{{"jobs", 1.5}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json{{"radial", {{"paths", -3}}}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json{{"version", 2}}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { config_from_json(json::array()); }) == ErrorKind::invalid_argument);

  ExperimentConfig c;
  c.radial.lambda_min = 2.5;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::invalid_argument);
  c = {};
  c.kappa_grid = {3.0, 8.0};
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::invalid_argument);
  c = {};
  c.jobs = 0;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::invalid_argument);
  c = {};
  c.trace.driver = "levy";
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::invalid_argument);
  c = {};
  c.distribution.n = 499;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::invalid_argument);
  CHECK_NOTHROW(validate(ExperimentConfig{}));
}

TEST_CASE("config hash ignores worker count and output location only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.jobs = 7;
  b.out_dir = "/elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed += 1;
  CHECK(config_hash(a) != config_hash(b));
  // FNV-1a 64 reference values.
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("suite names map onto criteria") {
  CHECK(suite_names().size() == 14);
  CHECK(criterion_of("slit") == "C1");
  CHECK(criterion_of("martingale") == "C3");
  CHECK(criterion_of("existence") == "C13");
  CHECK(criterion_of("capacity") == "capacity");
  CHECK(kind_of([] { criterion_of("nope"); }) == ErrorKind::invalid_argument);
  SuiteRunner runner{ExperimentConfig{}};
  CHECK(kind_of([&] { runner.run("nope"); }) == ErrorKind::invalid_argument);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::invalid_argument) == 2);
  CHECK(exit_code(ErrorKind::rejected_kappa) == 2);
  CHECK(exit_code(ErrorKind::solver_stall) == 3);
  CHECK(exit_code(ErrorKind::out_of_range) == 3);
  const auto j = error_json(Error(ErrorKind::rejected_kappa, "kappa = 8"));
  CHECK(j["kind"] == "rejected-kappa");
  CHECK(j["exit_code"] == 2);
}

TEST_CASE("slit suite separates the literal and corrected checks") {
  SuiteRunner runner{ExperimentConfig{}};
  const auto rep = runner.run("slit");
  REQUIRE(rep.criteria.size() == 1);
  const auto& m = rep.criteria[0].measured;
  CHECK(m["literal_g1_i_equals_i_sqrt5"] == false);
  CHECK(m["swallowing_time_of_i"].get<double>() == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(m["corrected_values_ok"] == true);
  CHECK(m["trace_max_rel_err"].get<double>() <= 1e-4);
  CHECK(m["hcap_max_rel_err"].get<double>() <= 1e-4);
  CHECK_FALSE(rep.pass());
}

TEST_CASE("exponent suite reports both identities") {
  SuiteRunner runner{ExperimentConfig{}};
  const auto rep = runner.run("exponents");
  const auto& m = rep.criteria[0].measured;
  CHECK(m["alpha_at_8"].get<double>() == 2.0);
  CHECK(m["alpha_gt_2"] == true);
  CHECK(m["literal_identity_holds"] == false);
  CHECK(m["corrected_identity_holds"] == true);
  CHECK(m["argmax_ok"] == true);
}

TEST_CASE("run directories are append-only") {
  ExperimentConfig c;
  c.out_dir = scratch("append").string();
  RunDir a(c, "test");
  RunDir b(c, "test");
  CHECK(a.path().filename() == "run-1");
  CHECK(b.path().filename() == "run-2");
  CHECK(a.path().parent_path().filename() == "default-" + config_hash(c));
  a.write("x.txt", "first");
  RunDir again(c, "test");
  CHECK(again.path().filename() == "run-3");
  CHECK(slurp(a.path() / "x.txt") == "first");
  a.finish();
  const auto manifest = json::parse(slurp(a.path() / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(c));
  CHECK(manifest["software_version"] == kSoftwareVersion);
  CHECK(config_from_json(json::parse(slurp(a.path() / "config.json"))).seed == c.seed);
}

TEST_CASE("trace command writes one file per kappa, reproducibly") {
  ExperimentConfig c;
  c.out_dir = scratch("trace").string();
  c.kappa_grid = {3.0, 4.0, 6.0};
  c.trace.level = 3;
  c.trace.t_points = 9;
  RunDir a(c, "trace");
  CHECK(cmd_trace(c, a) == kPass);
  c.jobs = 3;
  RunDir b(c, "trace");
  CHECK(cmd_trace(c, b) == kPass);
  std::size_t csv = 0;
  for (const auto& e : fs::directory_iterator(a.path()))
    if (e.path().extension() == ".csv") {
      ++csv;
      CHECK(slurp(e.path()) == slurp(b.path() / e.path().filename()));
    }
  CHECK(csv == 3);
  CHECK(a.path().parent_path() == b.path().parent_path());

  // Zero driver: the slit 2i sqrt(t).
  c.trace.driver = "zero";
  RunDir z(c, "trace");
  cmd_trace(c, z);
  std::ifstream in(z.path() / "trace-kappa-4.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header.find("t") != std::string::npos);
}

TEST_CASE("verify rejects unknown suites before running anything") {
  ExperimentConfig c;
  c.out_dir = scratch("verify").string();
  RunDir run(c, "verify");
  CHECK(kind_of([&] { cmd_verify(c, {"slit", "bogus"}, run); }) == ErrorKind::invalid_argument);
  CHECK(run.tasks().empty());
  CHECK(cmd_verify(c, {"exponents"}, run) == kVerificationFailed);
  CHECK(fs::exists(run.path() / "report-exponents.json"));
}

TEST_CASE("suite reports do not depend on the worker count") {
  ExperimentConfig c;
  c.kappa_grid = {3.0};
  c.existence.paths = 2;
  c.existence.j_max = 3;
  c.determinism.suites = {"existence"};
  c.determinism.jobs_b = 2;
  const auto r = determinism_check(c);
  CHECK(r.pass);
  CHECK(r.measured["suites"][0]["identical"] == true);
}
