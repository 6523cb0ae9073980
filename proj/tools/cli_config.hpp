#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "saflow/harness.hpp"

namespace saflow::cli {

// message already carries the dotted path of the offending key
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverEntry {
  Algo algo = Algo::af;
  std::string label;
  double eps = 0.0;
  bool has_schedule = false;
  StepSchedule::Kind schedule_kind = StepSchedule::Kind::constant;
  double base = 0.0;        // step size (af/saf) or relaxation factor (pie)
  bool base_auto = false;   // "auto" resolves to 1/||A||^2 once the ensemble is known
  double theta = 0.25;
  std::size_t batch = 1;
  std::string sampling;     // "", "uniform", "variance_reducing"
  std::uint64_t iters = 100;
  double grad_tol = 0.0;
  std::uint64_t trace_every = 1;
};

struct CliConfig {
  bool has_instance = false;
  InstanceSpec instance;
  std::string ensemble_file;

  std::vector<SolverEntry> solvers;

  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  int threads = 0;

  std::string out = ".";

  bool has_budget = false;
  double budget_gamma = 0.0;  // 0 -> derived default 2 ||A|| sqrt(delta0)
  double budget_floor = 0.0;
};

// flag overrides collected by the command line; unset fields stay empty
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algo;
  std::optional<double> eps;
  std::optional<std::string> mu;      // number or "auto" (af/saf step)
  std::optional<double> theta;
  std::optional<double> alpha0;       // pie relaxation factor
  std::optional<std::uint64_t> iters;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> batch;
  std::optional<std::string> out;
};

// parse + strict-validate a config document; path "" means built-in defaults
CliConfig load_config(const std::string& path);
// apply flag overrides, then re-validate cross-field constraints
void apply_overrides(CliConfig& cfg, const Overrides& ov);

// canonical JSON image of the effective config; equal configs give equal text
nlohmann::json effective_json(const CliConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);

/* manifest.json written next to every command's outputs: config hash, seeds,
 * library version. extra_hash folds in external inputs (ensemble file bytes)
 * so identical manifests imply byte-identical outputs. */
void write_manifest(const std::string& out_dir, const std::string& command, const CliConfig& cfg,
                    std::uint64_t extra_hash = 0);

}  // namespace saflow::cli
