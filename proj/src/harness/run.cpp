#include "sle/harness/run.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "sle/driver_gen.hpp"
#include "sle/loewner_engine.hpp"
#include "sle/philox.hpp"

namespace sle::harness {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::rejected_kappa:
      return kUsage;
    default:
      return kNumerical;
  }
}

json error_json(const std::exception& e) {
  json j;
  j["message"] = e.what();
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["kind"] = std::string(to_string(err->kind()));
    j["exit_code"] = exit_code(err->kind());
  } else {
    j["kind"] = "internal";
    j["exit_code"] = static_cast<int>(kNumerical);
  }
  return j;
}

RunDir::RunDir(const ExperimentConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
  const fs::path root = fs::path(cfg.out_dir) / (cfg.name + "-" + config_hash(cfg));
  fs::create_directories(root);
  for (int k = 1;; ++k) {
    const fs::path candidate = root / ("run-" + std::to_string(k));
    // create_directory is false when it already exists, which keeps concurrent runs apart.
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      break;
    }
  }
  std::ofstream(path_ / "config.json") << to_json(cfg).dump(2) << '\n';
}

std::string RunDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(path_ / name, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_argument, "cannot write " + (path_ / name).string());
  out << content;
  return name;
}

void RunDir::record(TaskRecord task) { tasks_.push_back(std::move(task)); }

void RunDir::finish() {
  json m;
  m["config_hash"] = config_hash(cfg_);
  m["config_version"] = cfg_.version;
  m["software_version"] = kSoftwareVersion;
  m["command"] = command_;
  m["seed"] = cfg_.seed;
  m["jobs"] = cfg_.jobs;
  json tasks = json::array();
  for (const auto& t : tasks_) {
    json e{{"task", t.task}, {"status", t.status}, {"seconds", t.seconds}, {"files", t.files}};
    if (!t.error.empty()) e["error"] = t.error;
    tasks.push_back(std::move(e));
  }
  m["tasks"] = std::move(tasks);
  std::ofstream(path_ / "manifest.json") << m.dump(2) << '\n';
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Runs suites in order; usage errors propagate, numerical ones are recorded
// and turn the exit code into 3 once every suite has had its go.
int run_suites(const ExperimentConfig& cfg, const std::vector<std::string>& suites, RunDir& run) {
  SuiteRunner runner(cfg);
  bool failed = false, errored = false;
  for (const auto& suite : suites) {
    TaskRecord rec;
    rec.task = suite;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (suite == kDeterminismSuite) {
        SuiteReport rep{suite, {determinism_check(cfg)}, {}};
        rec.files.push_back(run.write("report-" + suite + ".json", rep.to_json(cfg).dump(2) + "\n"));
        rec.status = rep.pass() ? "pass" : "fail";
      } else {
        const auto rep = runner.run(suite);
        rec.files.push_back(run.write("report-" + suite + ".json", rep.to_json(cfg).dump(2) + "\n"));
        for (const auto& t : rep.tables) rec.files.push_back(run.write(t.file, t.csv));
        rec.status = rep.pass() ? "pass" : "fail";
      }
    } catch (const Error& e) {
      if (exit_code(e.kind()) == kUsage) throw;
      rec.status = "error";
      rec.error = e.what();
      rec.files.push_back(run.write("error-" + suite + ".json", error_json(e).dump(2) + "\n"));
    }
    rec.seconds = seconds_since(start);
    failed = failed || rec.status == "fail";
    errored = errored || rec.status == "error";
    run.record(std::move(rec));
  }
  run.finish();
  return errored ? kNumerical : failed ? kVerificationFailed : kPass;
}

}  // namespace

int cmd_trace(const ExperimentConfig& cfg, RunDir& run) {
  const auto& tc = cfg.trace;
  const auto base = tc.driver == "zero"
                        ? driver::injected_path(tc.level, 1.0, [](double) { return 0.0; })
                        : driver::sample_brownian(rng::derive_seed(cfg.seed, 0, 0), tc.level, 1.0);
  const auto shared = std::make_shared<const driver::BrownianPath>(base);
  loewner::TraceOptions opts;
  opts.y_cut = tc.y_cut;
  opts.refinement_bound = tc.refinement_bound;
  opts.solver = solver_options(cfg);
  std::vector<double> grid(tc.t_points);
  for (int i = 0; i < tc.t_points; ++i) grid[i] = static_cast<double>(i) / (tc.t_points - 1);
  for (double kappa : cfg.kappa_grid) {
    TaskRecord rec;
    rec.task = "trace";
    const auto start = std::chrono::steady_clock::now();
    const auto d = driver::couple(shared, kappa, {cfg.epsilon, cfg.margin_eight});
    std::ostringstream name;
    name << "trace-kappa-" << kappa << ".csv";
    loewner::write_trace_csv(loewner::trace(d, grid, opts), (run.path() / name.str()).string());
    rec.task += " kappa=" + std::to_string(kappa);
    rec.status = "pass";
    rec.files.push_back(name.str());
    rec.seconds = seconds_since(start);
    run.record(std::move(rec));
  }
  run.finish();
  return kPass;
}

int cmd_verify(const ExperimentConfig& cfg, const std::vector<std::string>& suites, RunDir& run) {
  std::vector<std::string> list = suites;
  if (list.empty()) {
    list = suite_names();
    list.push_back(kDeterminismSuite);
  }
  for (const auto& s : list)
    if (s != kDeterminismSuite) criterion_of(s);  // reject unknown names before any work
  return run_suites(cfg, list, run);
}

int cmd_scan_continuity(const ExperimentConfig& cfg, RunDir& run) {
  return run_suites(cfg, {"continuity", "whitney"}, run);
}

int cmd_capacity(const ExperimentConfig& cfg, RunDir& run) { return run_suites(cfg, {"capacity"}, run); }

int cmd_existence(const ExperimentConfig& cfg, RunDir& run) { return run_suites(cfg, {"existence"}, run); }

}  // namespace sle::harness
