#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saflow/solvers.hpp"

namespace saflow {

enum class Algo { af, saf, kaczmarz, pie };
std::string algo_name(Algo a);
Algo algo_from_name(const std::string& name);

/* Reproducible experiment instance. All randomness (window, dense entries,
 * ground truth) is drawn from fixed streams of `seed`, so the same spec
 * always builds the same ensemble and data. */
struct InstanceSpec {
  enum class Kind { stft, dense };
  enum class Window { ones, hann, gaussian };

  Kind kind = Kind::stft;
  std::size_t d = 8;
  std::vector<long long> shifts;  // stft; empty -> R evenly spaced shifts
  std::size_t stft_blocks = 4;    // R used when shifts is empty
  Window window = Window::gaussian;
  std::size_t rows = 0;           // dense: total rows (single dense block)
  bool row_partition = false;     // dense: split into single-row blocks
  std::uint64_t seed = 1;
  NoiseSpec noise;
};

struct BuiltInstance {
  MeasurementEnsemble ensemble;  // with y filled in
  cvec x;                        // ground truth
};

BuiltInstance build_instance(const InstanceSpec& spec);

// deterministic starting point for a given trial
cvec initial_iterate(const InstanceSpec& spec, std::uint64_t base_seed, std::uint64_t config_id,
                     std::uint64_t trial);

struct SolverRun {
  Algo algo = Algo::af;
  SolverConfig config;
  std::string label;  // used for output file names
};

struct ExperimentPlan {
  InstanceSpec instance;
  std::vector<SolverRun> configs;
  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  int threads = 0;  // <= 0 picks hardware concurrency
};

/* Trial-averaged curves on the shared iteration grid. Aborted trials are
 * excluded from the means and counted. min_mean_grad_norm is the running
 * minimum of the mean gradient-norm curve. */
struct AggregateCurve {
  std::string label;
  std::vector<std::uint64_t> t;
  std::vector<double> mean_loss;
  std::vector<double> mean_grad_norm;
  std::vector<double> min_mean_grad_norm;
  std::vector<double> mu_t;
  std::vector<double> cum_mu;
  std::vector<double> cum_weighted_sq;
  std::size_t trials_ok = 0;
  std::size_t trials_failed = 0;
};

struct TraceSet {
  std::vector<AggregateCurve> curves;             // one per config
  std::vector<std::vector<RunTrace>> traces;      // [config][trial]
};

/* Runs trials x configs. Each (config c, trial i) uses solver stream
 * (c << 32) | i of the plan's base seed and an independent starting point, so
 * results are reproducible and independent of thread count. */
TraceSet run_trials(const ExperimentPlan& plan);
// same, on an ensemble built elsewhere (plan.instance.d must match e.d)
TraceSet run_trials(const MeasurementEnsemble& e, const ExperimentPlan& plan);

// rows: t,mean_loss,mean_grad_norm,min_mean_grad_norm,mu_t,cum_mu,cum_weighted_sq
void write_curve_csv(const AggregateCurve& curve, const std::string& path);
// single-trace export with the same columns (means of one trial)
AggregateCurve curve_from_trace(const RunTrace& trace, const std::string& label);

/* Checks the per-step descent inequality
 *   L(z^{t+1}) <= L(z^t) - mu_t ||grad L(z^t)||^2
 * on consecutive trace rows, with relative slack 1e-10 (1 + |L(z^t)|).
 * Requires trace_every == 1 so rows are adjacent iterations. */
struct DescentReport {
  std::size_t steps_checked = 0;
  std::size_t violations = 0;
  double worst_violation = 0.0;  // most positive slack-adjusted excess
  std::uint64_t worst_t = 0;
};
DescentReport check_descent(const RunTrace& trace, double slack = 1e-10);

/* Monte-Carlo check of the second-moment envelope at a fixed point z:
 * resamples the minibatch gradient `samples` times and compares the mean of
 * ||g||^2 against alpha (L - floor) + beta ||grad L||^2 + delta_upper,
 * allowing 5 standard errors. */
struct SecondMomentReport {
  double mean_sq = 0.0;
  double stderr_sq = 0.0;
  double bound = 0.0;
  bool pass = false;
};
SecondMomentReport check_second_moment(const MeasurementEnsemble& e, const cvec& z,
                                       const LossSpec& spec, const SamplingDistribution& dist,
                                       std::size_t batch, std::size_t samples, SeededRng& rng,
                                       double loss_floor = 0.0);

/* Least-squares slope of log(min_mean_grad_norm) against log(t) over the
 * final decade t in [T/10, T]. A polynomial schedule with exponent theta
 * predicts slope <= theta/2 - 1/4 for a run matching the decay guarantee.
 * If the curve hits exact zero the fit is skipped and converged is set. */
struct RateFit {
  double slope = 0.0;
  double threshold = 0.0;
  std::size_t points = 0;
  bool converged = false;  // curve reached zero, no fit needed
};
RateFit fit_rate(const AggregateCurve& curve, double theta);

}  // namespace saflow
