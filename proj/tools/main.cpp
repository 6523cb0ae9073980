#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_config.hpp"
#include "saflow/checks.hpp"
#include "saflow/harness.hpp"
#include "saflow/loss.hpp"
#include "saflow/solvers.hpp"
#include "saflow/stochastic.hpp"
#include "saflow/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saflow;
using cli::CliConfig;
using cli::ConfigError;
using cli::Overrides;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCheckFailed = 3;

std::string f17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize_label(const std::string& raw) {
  std::string out;
  for (char c : raw)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out;
}

// final per-config labels: config value, else algo_<index>; unique after sanitizing
std::vector<std::string> resolve_labels(const std::vector<cli::SolverEntry>& solvers) {
  std::vector<std::string> labels;
  std::set<std::string> used;
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    std::string base = solvers[i].label.empty()
                           ? algo_name(solvers[i].algo) + "_" + std::to_string(i)
                           : sanitize_label(solvers[i].label);
    std::string label = base;
    for (int k = 2; used.count(label) != 0; ++k) label = base + "_" + std::to_string(k);
    used.insert(label);
    labels.push_back(label);
  }
  return labels;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config error: cannot open ensemble file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// the distribution the stochastic solvers resolve internally, reproduced for
// the constants block of the summary
SamplingDistribution summary_dist(const MeasurementEnsemble& e, const cli::SolverEntry& s) {
  if (s.sampling == "variance_reducing") return variance_reducing_distribution(e);
  if (s.sampling == "uniform") return SamplingDistribution::uniform(e.block_count());
  return s.algo == Algo::kaczmarz ? variance_reducing_distribution(e)
                                  : SamplingDistribution::uniform(e.block_count());
}

int run_simulate(const std::string& config_path, const Overrides& ov) {
  CliConfig cfg = cli::load_config(config_path);
  cli::apply_overrides(cfg, ov);
  if (!cfg.has_instance)
    throw ConfigError("config error at instance: simulate needs an instance section");
  fs::create_directories(cfg.out);

  const BuiltInstance inst = build_instance(cfg.instance);
  const MeasurementEnsemble& e = inst.ensemble;
  const auto path = fs::path(cfg.out) / "ensemble.json";
  save_ensemble(e, path.string());
  cli::write_manifest(cfg.out, "simulate", cfg);

  std::printf("d = %zu\n", e.d);
  std::printf("R = %zu\n", e.block_count());
  std::printf("m = %zu\n", e.rows());
  std::printf("norm_a = %s\n", f17(ensemble_norm(e)).c_str());
  std::printf("norm_a_frobenius = %s\n", f17(ensemble_frobenius_norm(e)).c_str());
  if (cfg.instance.noise.kind == NoiseSpec::Kind::none)
    std::printf("loss_at_truth = %s\n", f17(loss_value(e, inst.x, LossSpec{0.0}).value).c_str());
  std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

json kaczmarz_nulling_report(const MeasurementEnsemble& e, const cvec& z) {
  const std::size_t rows = std::min<std::size_t>(e.block_count(), 64);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const cdouble before = e.apply_block(r, z)[0];
    if (std::norm(before) == 0.0) continue;  // projection undefined at exact zero
    const cvec z2 = kaczmarz_step(e, z, r);
    const cdouble after = e.apply_block(r, z2)[0];
    const double amp = std::sqrt(std::max(e.y[r][0], 0.0));
    const double resid = std::abs(std::sqrt(std::norm(after)) - amp) / (1.0 + amp);
    worst = std::max(worst, resid);
    ++checked;
  }
  json rep;
  rep["rows_checked"] = checked;
  rep["worst_residual"] = worst;
  rep["pass"] = checked > 0 && worst <= 1e-10;
  return rep;
}

int run_solve(const std::string& config_path, const Overrides& ov, bool is_sweep) {
  CliConfig cfg = cli::load_config(config_path);
  cli::apply_overrides(cfg, ov);
  if (cfg.solvers.empty())
    throw ConfigError("config error at solvers: nothing to run (use --algo or a config file)");
  if (!is_sweep) cfg.trials = 1;
  // mean curves need every trial on one iteration grid; early stopping breaks that
  if (cfg.trials > 1)
    for (std::size_t i = 0; i < cfg.solvers.size(); ++i)
      if (cfg.solvers[i].grad_tol > 0.0)
        throw ConfigError("config error at solvers[" + std::to_string(i) +
                          "].grad_tol: early stopping cannot be trial-averaged; set grad_tol "
                          "to 0 or trials to 1");
  fs::create_directories(cfg.out);

  MeasurementEnsemble ensemble;
  std::uint64_t extra_hash = 0;
  if (!cfg.ensemble_file.empty()) {
    const std::string bytes = read_file(cfg.ensemble_file);
    extra_hash = cli::fnv1a64(bytes);
    ensemble = ensemble_from_json(bytes);
    if (!ensemble.has_measurements())
      throw ConfigError("config error at ensemble_file: file carries no measurements");
  } else if (cfg.has_instance) {
    ensemble = build_instance(cfg.instance).ensemble;
  } else {
    throw ConfigError("config error: need an instance section or an ensemble_file");
  }

  const double na = ensemble_norm(ensemble);
  const double fro = ensemble_frobenius_norm(ensemble);
  const std::vector<std::string> labels = resolve_labels(cfg.solvers);

  ExperimentPlan plan;
  plan.instance = cfg.instance;
  plan.instance.d = ensemble.d;
  plan.trials = cfg.trials;
  plan.base_seed = cfg.base_seed;
  plan.threads = cfg.threads;
  std::vector<double> resolved_base(cfg.solvers.size(), 0.0);
  for (std::size_t i = 0; i < cfg.solvers.size(); ++i) {
    const cli::SolverEntry& s = cfg.solvers[i];
    SolverRun run;
    run.algo = s.algo;
    run.label = labels[i];
    run.config.loss.eps = s.eps;
    if (s.has_schedule) {
      const double base = s.base_auto ? 1.0 / (na * na) : s.base;
      resolved_base[i] = base;
      run.config.schedule = s.schedule_kind == StepSchedule::Kind::constant
                                ? StepSchedule::constant(base)
                                : StepSchedule::polynomial(base, s.theta);
    }
    run.config.batch = s.batch;
    if (s.sampling == "variance_reducing")
      run.config.dist = variance_reducing_distribution(ensemble);
    else if (s.sampling == "uniform")
      run.config.dist = SamplingDistribution::uniform(ensemble.block_count());
    run.config.iters = s.iters;
    run.config.grad_tol = s.grad_tol;
    run.config.trace_every = s.trace_every;
    plan.configs.push_back(std::move(run));
  }

  const TraceSet set = run_trials(ensemble, plan);

  json summary;
  summary["version"] = kVersion;
  summary["command"] = is_sweep ? "sweep" : "solve";
  {
    json ji;
    ji["d"] = ensemble.d;
    ji["blocks"] = ensemble.block_count();
    ji["rows"] = ensemble.rows();
    ji["norm_a"] = na;
    ji["norm_a_frobenius"] = fro;
    summary["instance"] = ji;
  }
  summary["trials"] = cfg.trials;

  bool any_abort = false;
  json jconfigs = json::array();
  for (std::size_t c = 0; c < plan.configs.size(); ++c) {
    const cli::SolverEntry& s = cfg.solvers[c];
    const AggregateCurve& curve = set.curves[c];
    const std::vector<RunTrace>& traces = set.traces[c];

    json jc;
    jc["label"] = labels[c];
    jc["algo"] = algo_name(s.algo);
    jc["eps"] = s.eps;
    jc["iters"] = s.iters;
    jc["batch"] = s.batch;
    if (s.has_schedule) {
      json sch;
      sch["kind"] = s.schedule_kind == StepSchedule::Kind::constant ? "constant" : "polynomial";
      sch["base"] = resolved_base[c];
      sch["source"] = s.base_auto ? "auto" : "config";
      if (s.schedule_kind == StepSchedule::Kind::polynomial) sch["theta"] = s.theta;
      jc["schedule"] = sch;
    }

    json constants;
    constants["norm_a"] = na;
    constants["norm_a_frobenius"] = fro;
    if (s.eps > 0.0) constants["lipschitz"] = lipschitz_constant(ensemble, LossSpec{s.eps}, na);
    AbcConstants abc;
    if (s.algo == Algo::af) {
      // full gradient: E||g||^2 = ||grad||^2 exactly
      abc.beta = 1.0;
    } else {
      abc = abc_constants(ensemble, summary_dist(ensemble, s), s.batch);
    }
    constants["alpha"] = abc.alpha;
    constants["beta"] = abc.beta;
    constants["delta_upper"] = abc.delta_upper;
    jc["constants"] = constants;

    // trial accounting
    std::size_t converged = 0;
    json aborts = json::array();
    std::set<std::string> warnings;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].aborted) {
        any_abort = true;
        json a;
        a["trial"] = i;
        a["reason"] = traces[i].abort_reason;
        aborts.push_back(a);
      }
      if (traces[i].converged) ++converged;
      for (const auto& w : traces[i].warnings) warnings.insert(w);
    }
    jc["trials_ok"] = curve.trials_ok;
    jc["trials_failed"] = curve.trials_failed;
    jc["converged_trials"] = converged;
    if (!aborts.empty()) jc["aborts"] = aborts;
    jc["warnings"] = json::array();
    for (const auto& w : warnings) jc["warnings"].push_back(w);

    // curve export; with zero usable trials the first partial trace is flushed
    const auto csv_path = fs::path(cfg.out) / (labels[c] + ".csv");
    if (!curve.t.empty()) {
      write_curve_csv(curve, csv_path.string());
      json fin;
      fin["t"] = curve.t.back();
      fin["mean_loss"] = curve.mean_loss.back();
      fin["mean_grad_norm"] = curve.mean_grad_norm.back();
      fin["min_mean_grad_norm"] = curve.min_mean_grad_norm.back();
      fin["cum_mu"] = curve.cum_mu.back();
      fin["cum_weighted_sq"] = curve.cum_weighted_sq.back();
      jc["final"] = fin;
    } else if (!traces.empty()) {
      write_curve_csv(curve_from_trace(traces[0], labels[c]), csv_path.string());
    }
    jc["csv"] = labels[c] + ".csv";

    // guarantee budgets, evaluated at the realized starting gap
    if (curve.trials_ok > 0 && !curve.t.empty()) {
      double delta0 = 0.0;
      for (const RunTrace& tr : traces)
        if (!tr.aborted) delta0 += tr.records.front().loss;
      delta0 = delta0 / double(curve.trials_ok) - cfg.budget_floor;
      if (delta0 >= 0.0) {
        const double gamma =
            cfg.budget_gamma > 0.0 ? cfg.budget_gamma : 2.0 * na * std::sqrt(delta0);
        json jb;
        jb["gamma"] = gamma;
        jb["gamma_source"] = cfg.budget_gamma > 0.0 ? "config" : "2 ||A|| sqrt(delta0)";
        jb["delta0"] = delta0;
        jb["floor"] = cfg.budget_floor;
        if (gamma > 0.0) {
          json jcst;
          try {
            const BudgetResult b = constant_step_budget(gamma, delta0, abc, na);
            jcst["iterations"] = b.iterations;
            if (b.mu) jcst["mu"] = *b.mu;
          } catch (const std::overflow_error&) {
            jcst["iterations"] = nullptr;
            jcst["note"] = "exceeds 2^62 at this gamma";
          }
          jb["constant_step"] = jcst;
          // mu_t[0] rather than the schedule base: for pie the base is a
          // relaxation factor and the realized step folds in p_r/(d ||w||^2)
          const double mu0 = curve.mu_t.front();
          if (s.has_schedule && s.schedule_kind == StepSchedule::Kind::polynomial && mu0 > 0.0) {
            const double c_sq = curve.cum_weighted_sq.back();
            json jdec;
            jdec["c_sq"] = c_sq;
            jdec["c_sq_source"] = "realized weighted square sum";
            jdec["mu"] = mu0;
            try {
              jdec["iterations"] = decaying_step_budget(c_sq, mu0, gamma, s.theta);
            } catch (const std::overflow_error&) {
              jdec["iterations"] = nullptr;
              jdec["note"] = "exceeds 2^62 at this gamma";
            }
            jb["decaying_step"] = jdec;
          }
        }
        jc["budget"] = jb;
      }
    }

    if (s.algo == Algo::kaczmarz) {
      for (const RunTrace& tr : traces)
        if (!tr.aborted) {
          jc["kaczmarz_nulling"] = kaczmarz_nulling_report(ensemble, tr.final_iterate);
          break;
        }
    }
    jconfigs.push_back(jc);

    std::printf("%s: trials_ok=%zu trials_failed=%zu", labels[c].c_str(), curve.trials_ok,
                curve.trials_failed);
    if (!curve.t.empty())
      std::printf(" final_mean_loss=%s final_mean_grad_norm=%s", f17(curve.mean_loss.back()).c_str(),
                  f17(curve.mean_grad_norm.back()).c_str());
    std::printf("\n");
    for (const auto& w : warnings) std::printf("warning(%s): %s\n", labels[c].c_str(), w.c_str());
    for (const auto& a : aborts)
      std::fprintf(stderr, "numerical abort(%s): trial %llu: %s\n", labels[c].c_str(),
                   (unsigned long long)a["trial"].get<std::uint64_t>(),
                   a["reason"].get<std::string>().c_str());
  }
  summary["configs"] = jconfigs;

  {
    std::ofstream out(fs::path(cfg.out) / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << summary.dump(2) << "\n";
  }
  cli::write_manifest(cfg.out, is_sweep ? "sweep" : "solve", cfg, extra_hash);
  return any_abort ? kExitNumerical : kExitOk;
}

int run_check(const std::string& config_path, const Overrides& ov, bool fd, double fd_eps,
              bool tamper) {
  CliConfig cfg = cli::load_config(config_path);
  cli::apply_overrides(cfg, ov);
  const std::uint64_t seed = ov.seed ? *ov.seed : 0x5af0accull;
  cfg.base_seed = seed;
  fs::create_directories(cfg.out);

  std::vector<checks::Result> results = checks::default_suite(tamper, seed);
  if (fd) {
    if (fd_eps < 0.0) throw ConfigError("config error at --eps: must be >= 0");
    results.push_back(checks::gradient_matches_fd_nondegenerate(12, 1e-6, fd_eps, seed));
  }

  json report;
  report["version"] = kVersion;
  json arr = json::array();
  std::vector<std::string> failed;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    json jr;
    jr["name"] = r.name;
    jr["pass"] = r.pass;
    jr["detail"] = r.detail;
    arr.push_back(jr);
    if (!r.pass) failed.push_back(r.name);
  }
  report["results"] = arr;
  report["pass"] = failed.empty();
  report["failed"] = failed;
  {
    std::ofstream out(fs::path(cfg.out) / "check_report.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write check_report.json");
    out << report.dump(2) << "\n";
  }
  std::string mode = "check:" + std::to_string(seed);
  if (fd) mode += ":fd:" + f17(fd_eps);
  if (tamper) mode += ":tamper";
  cli::write_manifest(cfg.out, "check", cfg, cli::fnv1a64(mode));

  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    std::fprintf(stderr, "check failed: %s\n", names.c_str());
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phase-retrieval measurement simulation and solver driver"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, algo, mu;
  std::uint64_t seed = 0, iters = 0;
  std::size_t trials = 0, batch = 0;
  double eps = 0.0, theta = 0.0, alpha0 = 0.0, check_eps = 0.0;
  bool fd = false, tamper = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (schema in schemas/)");
    cmd->add_option("--out", out_dir, "output directory (default .)");
    cmd->add_option("--seed", seed, "instance seed and harness base seed");
  };
  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--algo", algo, "solver for all entries: af|saf|kaczmarz|pie");
    cmd->add_option("--eps", eps, "smoothing parameter for gradient solvers");
    cmd->add_option("--mu", mu, "step size for af/saf, a number or \"auto\" (= 1/||A||^2)");
    cmd->add_option("--theta", theta, "decay exponent; switches the schedule to polynomial");
    cmd->add_option("--alpha0", alpha0, "relaxation factor for pie");
    cmd->add_option("--iters", iters, "iteration budget");
    cmd->add_option("--k", batch, "minibatch size for saf");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "build an instance and write ensemble.json");
  add_common(simulate);

  CLI::App* solve = app.add_subcommand("solve", "run each solver config for one trial");
  add_common(solve);
  add_solver_flags(solve);

  CLI::App* sweep = app.add_subcommand("sweep", "run trial-averaged solver comparisons");
  add_common(sweep);
  add_solver_flags(sweep);
  sweep->add_option("--trials", trials, "Monte-Carlo trials per config");

  CLI::App* check = app.add_subcommand("check", "run the structural self-check suite");
  add_common(check);
  check->add_option("--eps", check_eps, "smoothing parameter for the --fd comparison");
  check->add_flag("--fd", fd, "add a finite-difference gradient comparison at --eps");
  check->add_flag("--tamper-gradient", tamper, "negative control: bias the analytic gradient")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Overrides ov;
  auto fill_common = [&](CLI::App* cmd) {
    if (cmd->count("--out") > 0) ov.out = out_dir;
    if (cmd->count("--seed") > 0) ov.seed = seed;
  };
  auto fill_solver = [&](CLI::App* cmd) {
    if (cmd->count("--algo") > 0) ov.algo = algo;
    if (cmd->count("--eps") > 0) ov.eps = eps;
    if (cmd->count("--mu") > 0) ov.mu = mu;
    if (cmd->count("--theta") > 0) ov.theta = theta;
    if (cmd->count("--alpha0") > 0) ov.alpha0 = alpha0;
    if (cmd->count("--iters") > 0) ov.iters = iters;
    if (cmd->count("--k") > 0) ov.batch = batch;
  };

  try {
    if (simulate->parsed()) {
      fill_common(simulate);
      return run_simulate(config_path, ov);
    }
    if (solve->parsed()) {
      fill_common(solve);
      fill_solver(solve);
      return run_solve(config_path, ov, false);
    }
    if (sweep->parsed()) {
      fill_common(sweep);
      fill_solver(sweep);
      if (sweep->count("--trials") > 0) ov.trials = trials;
      return run_solve(config_path, ov, true);
    }
    if (check->parsed()) {
      fill_common(check);
      return run_check(config_path, ov, fd, check_eps, tamper);
    }
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "%s\n", ex.what());
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitConfig;
  }
  return kExitConfig;
}
