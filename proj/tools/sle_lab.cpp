// Command-line front end: trace, verify, scan-continuity, capacity, existence-cert.
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "sle/harness/run.hpp"

using namespace sle::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config (defaults when omitted)");
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--out", c.out, "output root directory");
  cmd->add_option("--jobs", c.jobs, "worker threads");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.jobs) cfg.jobs = *c.jobs;
  validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLE trace and estimate lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kSoftwareVersion);
  Common common;
  std::vector<std::string> suites;
  auto* trace = app.add_subcommand("trace", "write one trace CSV per kappa in the grid");
  auto* verify = app.add_subcommand("verify", "run verification suites");
  verify->add_option("--suite", suites, "suite name, repeatable (default: all)");
  auto* scan = app.add_subcommand("scan-continuity", "kappa continuity scan and Whitney corners");
  auto* cap = app.add_subcommand("capacity", "capacity of the derivative event");
  auto* exist = app.add_subcommand("existence-cert", "existence certificate on sampled paths");
  for (auto* cmd : {trace, verify, scan, cap, exist}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    const auto cfg = resolve(common);
    const auto* cmd = app.get_subcommands().front();
    RunDir run(cfg, cmd->get_name());
    int rc = kPass;
    if (cmd == trace) rc = cmd_trace(cfg, run);
    else if (cmd == verify) rc = cmd_verify(cfg, suites, run);
    else if (cmd == scan) rc = cmd_scan_continuity(cfg, run);
    else if (cmd == cap) rc = cmd_capacity(cfg, run);
    else rc = cmd_existence(cfg, run);
    for (const auto& t : run.tasks()) std::cout << t.status << "  " << t.task << "  " << t.seconds << " s\n";
    std::cout << run.path().string() << '\n';
    return rc;
  } catch (const std::exception& e) {
    const auto j = error_json(e);
    std::cerr << j.dump(2) << '\n';
    return j["exit_code"].get<int>();
  }
}
