#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sle/harness/config.hpp"
#include "sle/loewner_engine.hpp"
#include "sle/radial_diffusion.hpp"

namespace sle::harness {

struct CriterionResult {
  std::string id;     // "C3", or a suite name for checks without a number
  std::string title;
  bool pass = false;
  nlohmann::json measured = nlohmann::json::object();
  nlohmann::json thresholds = nlohmann::json::object();
  std::vector<std::string> notes;
};

struct Table {
  std::string file;
  std::string csv;
};

struct SuiteReport {
  std::string suite;
  std::vector<CriterionResult> criteria;
  std::vector<Table> tables;

  bool pass() const;
  /// Deterministic: no timings, no paths, no worker count.
  nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

/// Suites in criterion order.
const std::vector<std::string>& suite_names();
/// Criterion id a suite reports, e.g. "martingale" -> "C3".
std::string criterion_of(const std::string& suite);

loewner::SolverOptions solver_options(const ExperimentConfig& cfg);
/// Midpoint of the beta range at the continuity reference kappa unless set.
double continuity_beta(const ExperimentConfig& cfg);

/// Runs suites against one config; radial batches are cached so the
/// martingale, tails, derivative and time-change suites share paths.
class SuiteRunner {
 public:
  explicit SuiteRunner(ExperimentConfig cfg);

  /// Throws invalid-argument for an unknown suite.
  SuiteReport run(const std::string& suite);
  const ExperimentConfig& config() const { return cfg_; }

 private:
  const std::vector<radial::RadialPath>& radial_paths(double kappa, std::size_t n);

  SuiteReport slit();
  SuiteReport solver_order();
  SuiteReport martingale();
  SuiteReport tails();
  SuiteReport derivative();
  SuiteReport timechange();
  SuiteReport exponents();
  SuiteReport distribution();
  SuiteReport sde_laws();
  SuiteReport continuity();
  SuiteReport whitney();
  SuiteReport borel_cantelli();
  SuiteReport existence();
  SuiteReport capacity();

  ExperimentConfig cfg_;
  std::map<std::pair<double, std::size_t>, std::vector<radial::RadialPath>> radial_cache_;
};

/// Reruns each configured suite with two worker counts (path counts capped)
/// and compares the serialized reports byte for byte.
CriterionResult determinism_check(const ExperimentConfig& cfg);

}  // namespace sle::harness
