#include "saflow/solvers.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace saflow {

namespace {

constexpr double kMaxBudget = 4.611686018427387904e18;  // 2^62, sanity cap for ceil results

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint64_t ceil_to_count(double x, const char* what) {
  if (!std::isfinite(x)) throw std::overflow_error(std::string(what) + ": budget is not finite");
  if (x <= 0.0) return 0;
  const double c = std::ceil(x);
  if (c > kMaxBudget) throw std::overflow_error(std::string(what) + ": budget exceeds 2^62");
  return std::uint64_t(c);
}

// |w| as sqrt(|w|^2), matching the loss path so projection targets and
// residuals agree bit for bit with gradient evaluations
inline cdouble sgn(cdouble w) {
  const double a = std::sqrt(std::norm(w));
  return a > 0.0 ? w / a : cdouble(0.0);
}

struct StepOutcome {
  double mu = 0.0;
  std::vector<std::size_t> indices;
  std::size_t clamp_count = 0;
};

using StepFn = std::function<StepOutcome(cvec&, std::uint64_t, const GradientReport&)>;

void validate_common(const MeasurementEnsemble& e, const cvec& z0, const SolverConfig& cfg) {
  if (z0.size() != e.d) throw std::invalid_argument("solver: z0 length != d");
  if (!e.has_measurements()) throw std::invalid_argument("solver: ensemble has no measurements");
  if (cfg.trace_every == 0) throw std::invalid_argument("solver: trace_every must be >= 1");
  if (!(cfg.grad_tol >= 0.0)) throw std::invalid_argument("solver: grad_tol must be >= 0");
}

/* Shared iteration driver. Each iteration evaluates the full loss and
 * gradient at z^t for the trace, then lets the algorithm take its step.
 * A final record at t_end captures the last iterate with mu = 0. */
RunTrace run_loop(const MeasurementEnsemble& e, cvec z, const SolverConfig& cfg,
                  const StepFn& step) {
  const auto t_start = std::chrono::steady_clock::now();
  RunTrace trace;
  trace.norm_a = ensemble_norm(e);
  if (cfg.record_iterates) trace.iterates.push_back(z);

  double cum_mu = 0.0, cum_wsq = 0.0;
  double cur_loss = 0.0, cur_gn = 0.0;
  bool have_final_eval = false;
  std::uint64_t t = 0;
  for (; t < cfg.iters; ++t) {
    const GradientReport full = wirtinger_gradient(e, z, cfg.loss);
    cur_loss = full.loss;
    cur_gn = norm2(full.gradient);
    trace.clamp_count += full.clamp_count;
    have_final_eval = true;
    if (!std::isfinite(cur_loss) || !std::isfinite(cur_gn)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite loss or gradient at iteration " + std::to_string(t);
      break;
    }
    if (cfg.grad_tol > 0.0 && cur_gn <= cfg.grad_tol) {
      trace.converged = true;
      break;
    }
    StepOutcome so = step(z, t, full);
    trace.clamp_count += so.clamp_count;
    cum_mu += so.mu;
    cum_wsq += so.mu * cur_gn * cur_gn;
    if (t % cfg.trace_every == 0)
      trace.records.push_back(
          {t, cur_loss, cur_gn, so.mu, cum_mu, cum_wsq, std::move(so.indices)});
    if (cfg.record_iterates) trace.iterates.push_back(z);
    have_final_eval = false;
  }
  if (!have_final_eval) {
    const GradientReport full = wirtinger_gradient(e, z, cfg.loss);
    cur_loss = full.loss;
    cur_gn = norm2(full.gradient);
    trace.clamp_count += full.clamp_count;
    if (!std::isfinite(cur_loss) || !std::isfinite(cur_gn)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite loss or gradient at iteration " + std::to_string(t);
    }
    if (cfg.grad_tol > 0.0 && cur_gn <= cfg.grad_tol) trace.converged = true;
  }
  trace.records.push_back({t, cur_loss, cur_gn, 0.0, cum_mu, cum_wsq, {}});
  trace.final_iterate = std::move(z);
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

SamplingDistribution resolve_dist(const MeasurementEnsemble& e, const SolverConfig& cfg,
                                  bool variance_reducing_default) {
  if (cfg.dist.size() != 0) {
    if (cfg.dist.size() != e.block_count())
      throw std::invalid_argument("solver: sampling distribution size != block count");
    return cfg.dist;
  }
  return variance_reducing_default ? variance_reducing_distribution(e)
                                   : SamplingDistribution::uniform(e.block_count());
}

}  // namespace

StepSchedule StepSchedule::constant(double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("StepSchedule: constant step must be > 0");
  StepSchedule s;
  s.kind = Kind::constant;
  s.base = mu;
  return s;
}

StepSchedule StepSchedule::polynomial(double mu, double theta) {
  if (!(mu > 0.0)) throw std::invalid_argument("StepSchedule: base step must be > 0");
  if (!(theta > 0.0 && theta < 0.5))
    throw std::invalid_argument("StepSchedule: theta must lie in (0, 1/2)");
  StepSchedule s;
  s.kind = Kind::polynomial;
  s.base = mu;
  s.theta = theta;
  return s;
}

double StepSchedule::value(std::uint64_t t) const {
  if (kind == Kind::constant) return base;
  return base * std::pow(1.0 + double(t), -(0.5 + theta));
}

RunTrace af_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg) {
  validate_common(e, z0, cfg);
  RunTrace trace = [&] {
    const StepFn step = [&](cvec& z, std::uint64_t t, const GradientReport& full) {
      StepOutcome so;
      so.mu = cfg.schedule.value(t);
      for (std::size_t j = 0; j < z.size(); ++j) z[j] -= so.mu * full.gradient[j];
      return so;
    };
    return run_loop(e, std::move(z0), cfg, step);
  }();
  const double bound = 1.0 / (trace.norm_a * trace.norm_a);
  if (cfg.schedule.value(0) > bound * (1.0 + 1e-12))
    trace.warnings.push_back("step size " + fmt_g(cfg.schedule.value(0)) +
                             " exceeds 1/||A||^2 = " + fmt_g(bound) +
                             "; per-step descent is no longer guaranteed");
  return trace;
}

RunTrace saf_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg) {
  validate_common(e, z0, cfg);
  if (cfg.batch == 0) throw std::invalid_argument("saf_run: batch must be >= 1");
  const SamplingDistribution dist = resolve_dist(e, cfg, false);
  SeededRng rng(cfg.seed, cfg.stream);
  const StepFn step = [&](cvec& z, std::uint64_t t, const GradientReport&) {
    StepOutcome so;
    so.indices = sample_indices(dist, cfg.batch, rng);
    const GradientReport g = stochastic_gradient(e, z, cfg.loss, dist, so.indices);
    so.clamp_count = g.clamp_count;
    so.mu = cfg.schedule.value(t);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] -= so.mu * g.gradient[j];
    return so;
  };
  RunTrace trace = run_loop(e, std::move(z0), cfg, step);
  const double beta = 1.0 - 1.0 / double(cfg.batch);
  if (beta > 0.0 && beta * trace.norm_a * trace.norm_a * cfg.schedule.value(0) > 1.0 + 1e-12)
    trace.warnings.push_back("beta ||A||^2 mu_0 > 1: initial step exceeds the constant-step bound");
  return trace;
}

cvec kaczmarz_step(const MeasurementEnsemble& e, const cvec& z, std::size_t r) {
  if (r >= e.block_count()) throw std::invalid_argument("kaczmarz_step: block index out of range");
  const Block& b = e.blocks[r];
  if (b.kind != Block::Kind::dense || b.dense.m != 1)
    throw std::invalid_argument("kaczmarz_step: needs a single-row dense block");
  if (!e.has_measurements()) throw std::invalid_argument("kaczmarz_step: no measurements");
  const double rn = b.dense.row_norm_sq(0);
  if (!(rn > 0.0)) throw std::invalid_argument("kaczmarz_step: zero row");
  const cdouble w = e.apply_block(r, z)[0];
  // amplitude target sqrt(y_r): the row residual |(A z')_r| - sqrt(y_r)
  // vanishes exactly after the projection (for (A z)_r != 0)
  const double amp = std::sqrt(std::max(e.y[r][0], 0.0));
  const cdouble correction = (sgn(w) * amp - w) / rn;
  const cvec back = e.adjoint_block(r, {correction});
  cvec out = z;
  for (std::size_t j = 0; j < z.size(); ++j) out[j] += back[j];
  return out;
}

RunTrace kaczmarz_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg) {
  validate_common(e, z0, cfg);
  for (std::size_t r = 0; r < e.block_count(); ++r)
    if (e.blocks[r].kind != Block::Kind::dense || e.blocks[r].dense.m != 1)
      throw std::invalid_argument("kaczmarz_run: ensemble must be a single-row partition");
  if (cfg.loss.eps != 0.0)
    throw std::invalid_argument("kaczmarz_run: projection steps assume eps = 0");
  const SamplingDistribution dist = resolve_dist(e, cfg, true);
  SeededRng rng(cfg.seed, cfg.stream);
  const StepFn step = [&](cvec& z, std::uint64_t t, const GradientReport&) {
    (void)t;
    StepOutcome so;
    so.indices = sample_indices(dist, 1, rng);
    const std::size_t r = so.indices[0];
    // minibatch view of the projection: mu_t = p_r / ||row_r||^2
    so.mu = dist.p[r] / e.blocks[r].dense.row_norm_sq(0);
    z = kaczmarz_step(e, z, r);
    return so;
  };
  return run_loop(e, std::move(z0), cfg, step);
}

cvec pie_step(const MeasurementEnsemble& e, const cvec& z, std::size_t r, double alpha) {
  if (r >= e.block_count()) throw std::invalid_argument("pie_step: block index out of range");
  if (!e.is_stft()) throw std::invalid_argument("pie_step: needs a windowed-DFT ensemble");
  if (!e.has_measurements()) throw std::invalid_argument("pie_step: no measurements");
  if (!std::isfinite(alpha)) throw std::invalid_argument("pie_step: alpha must be finite");
  const cvec sw = e.shifted_window(r);
  cvec psi(e.d);
  for (std::size_t j = 0; j < e.d; ++j) psi[j] = sw[j] * z[j];
  const cvec spectrum = dft(psi);
  cvec projected(e.d);
  const std::vector<double>& yr = e.y[r];
  for (std::size_t j = 0; j < e.d; ++j)
    projected[j] = std::sqrt(std::max(yr[j], 0.0)) * sgn(spectrum[j]);
  const cvec corrected = idft(projected);
  const double winf = norm_inf(e.window);
  const double factor = alpha / (winf * winf);
  cvec out = z;
  for (std::size_t j = 0; j < e.d; ++j)
    out[j] += factor * std::conj(sw[j]) * (corrected[j] - psi[j]);
  return out;
}

RunTrace pie_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg) {
  validate_common(e, z0, cfg);
  if (!e.is_stft()) throw std::invalid_argument("pie_run: needs a windowed-DFT ensemble");
  if (cfg.loss.eps != 0.0)
    throw std::invalid_argument("pie_run: magnitude projection assumes eps = 0");
  const SamplingDistribution dist = resolve_dist(e, cfg, false);
  SeededRng rng(cfg.seed, cfg.stream);
  const double winf = norm_inf(e.window);
  const double norm_factor = 1.0 / (double(e.d) * winf * winf);
  const StepFn step = [&](cvec& z, std::uint64_t t, const GradientReport&) {
    StepOutcome so;
    so.indices = sample_indices(dist, 1, rng);
    const std::size_t r = so.indices[0];
    const double alpha = cfg.schedule.value(t);
    so.mu = alpha * dist.p[r] * norm_factor;
    z = pie_step(e, z, r, alpha);
    return so;
  };
  RunTrace trace = run_loop(e, std::move(z0), cfg, step);
  if (cfg.schedule.kind == StepSchedule::Kind::constant)
    trace.warnings.push_back(
        "constant relaxation factor: classical practice, no decay so the "
        "decaying-step convergence guarantee does not apply");
  return trace;
}

BudgetResult constant_step_budget(double gamma, double delta0, const AbcConstants& abc,
                                  double norm_a) {
  if (!(gamma > 0.0)) throw std::invalid_argument("constant_step_budget: gamma must be > 0");
  if (!(delta0 >= 0.0)) throw std::invalid_argument("constant_step_budget: delta0 must be >= 0");
  if (!(norm_a > 0.0)) throw std::invalid_argument("constant_step_budget: norm_a must be > 0");
  const double na2 = norm_a * norm_a;
  const double g2 = gamma * gamma;

  double sum_bn = 0.0;
  for (double b : abc.block_norms_sq) sum_bn += b;
  // Variance-reducing unit-batch regime: the fixed projection step mu = 1/alpha
  // already satisfies the step bound when gamma^2 >= 4 delta0 ||A||^2, and the
  // budget tightens to the first-display form 4 delta0 / (gamma^2 mu).
  const bool variance_reducing = abc.beta == 0.0 && abc.delta_upper == 0.0 && abc.alpha > 0.0 &&
                                 sum_bn > 0.0 &&
                                 std::abs(abc.alpha - sum_bn) <= 1e-9 * sum_bn;
  if (variance_reducing && g2 >= 4.0 * delta0 * na2 * (1.0 - 1e-12)) {
    BudgetResult res;
    res.iterations = ceil_to_count(4.0 * abc.alpha * delta0 / g2, "constant_step_budget");
    res.mu = 1.0 / abc.alpha;
    return res;
  }

  double t_req = 0.0;
  if (abc.alpha > 0.0)
    t_req = std::max(t_req, 16.0 * abc.alpha * na2 * delta0 * delta0 / (g2 * g2));
  if (abc.beta > 0.0) t_req = std::max(t_req, 4.0 * abc.beta * na2 * delta0 / g2);
  if (abc.delta_upper > 0.0) t_req = std::max(t_req, 8.0 * abc.delta_upper * na2 * delta0 / g2);

  BudgetResult res;
  res.iterations = ceil_to_count(t_req, "constant_step_budget");
  double mu = std::numeric_limits<double>::infinity();
  if (abc.alpha > 0.0 && res.iterations > 0)
    mu = std::min(mu, 1.0 / (std::sqrt(abc.alpha * double(res.iterations)) * norm_a));
  if (abc.beta > 0.0) mu = std::min(mu, 1.0 / (abc.beta * na2));
  if (abc.delta_upper > 0.0) mu = std::min(mu, g2 / (2.0 * abc.delta_upper * na2));
  if (std::isfinite(mu)) res.mu = mu;
  return res;
}

std::uint64_t decaying_step_budget(double c_sq, double mu, double gamma, double theta) {
  if (!(c_sq >= 0.0)) throw std::invalid_argument("decaying_step_budget: c_sq must be >= 0");
  if (!(mu > 0.0)) throw std::invalid_argument("decaying_step_budget: mu must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("decaying_step_budget: gamma must be > 0");
  if (!(theta > 0.0 && theta < 0.5))
    throw std::invalid_argument("decaying_step_budget: theta must lie in (0, 1/2)");
  const double base = c_sq / (mu * gamma * gamma) * (0.5 - theta) + 1.0;
  return ceil_to_count(std::pow(base, 2.0 / (1.0 - 2.0 * theta)) - 1.0, "decaying_step_budget");
}

}  // namespace saflow
