#include "saflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace saflow {

namespace {

// fixed sub-streams of the instance seed
constexpr std::uint64_t kStreamWindow = 0x1;
constexpr std::uint64_t kStreamMatrix = 0x2;
constexpr std::uint64_t kStreamTruth = 0x3;
// trial starting points live in the top half of the stream space
constexpr std::uint64_t kInitFlag = 1ull << 63;

cvec make_window(const InstanceSpec& spec) {
  switch (spec.window) {
    case InstanceSpec::Window::ones:
      return cvec(spec.d, 1.0);
    case InstanceSpec::Window::hann: {
      cvec w(spec.d);
      for (std::size_t j = 0; j < spec.d; ++j)
        w[j] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(j) / double(spec.d));
      // j = 0 would be exactly zero; lift it so the window has full support
      w[0] = 1e-3;
      return w;
    }
    case InstanceSpec::Window::gaussian: {
      SeededRng rng(spec.seed, kStreamWindow);
      return random_complex_gaussian(spec.d, rng);
    }
  }
  throw std::invalid_argument("build_instance: unknown window kind");
}

std::vector<long long> make_shifts(const InstanceSpec& spec) {
  if (!spec.shifts.empty()) return spec.shifts;
  if (spec.stft_blocks == 0 || spec.stft_blocks > spec.d)
    throw std::invalid_argument("build_instance: need 1 <= blocks <= d");
  std::vector<long long> shifts(spec.stft_blocks);
  for (std::size_t r = 0; r < spec.stft_blocks; ++r)
    shifts[r] = (long long)((r * spec.d) / spec.stft_blocks);
  return shifts;
}

}  // namespace

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::af: return "af";
    case Algo::saf: return "saf";
    case Algo::kaczmarz: return "kaczmarz";
    case Algo::pie: return "pie";
  }
  return "?";
}

Algo algo_from_name(const std::string& name) {
  if (name == "af") return Algo::af;
  if (name == "saf") return Algo::saf;
  if (name == "kaczmarz") return Algo::kaczmarz;
  if (name == "pie") return Algo::pie;
  throw std::invalid_argument("unknown algorithm '" + name + "' (want af|saf|kaczmarz|pie)");
}

BuiltInstance build_instance(const InstanceSpec& spec) {
  if (spec.d == 0) throw std::invalid_argument("build_instance: d must be positive");
  BuiltInstance out;
  if (spec.kind == InstanceSpec::Kind::stft) {
    out.ensemble = build_stft_ensemble(spec.d, make_window(spec), make_shifts(spec));
  } else {
    if (spec.rows == 0) throw std::invalid_argument("build_instance: dense instance needs rows");
    SeededRng rng(spec.seed, kStreamMatrix);
    DenseOperator a(spec.rows, spec.d, random_complex_gaussian(spec.rows * spec.d, rng));
    out.ensemble = spec.row_partition ? build_row_partition(a)
                                      : build_dense_ensemble(spec.d, {std::move(a)});
  }
  SeededRng rng(spec.seed, kStreamTruth);
  out.x = random_complex_gaussian(spec.d, rng);
  simulate(out.ensemble, out.x, spec.noise);
  return out;
}

cvec initial_iterate(const InstanceSpec& spec, std::uint64_t base_seed, std::uint64_t config_id,
                     std::uint64_t trial) {
  SeededRng rng(base_seed, kInitFlag | (config_id << 32) | trial);
  return random_complex_gaussian(spec.d, rng);
}

namespace {

RunTrace run_one(const MeasurementEnsemble& e, const ExperimentPlan& plan, std::size_t c,
                 std::size_t i) {
  SolverConfig cfg = plan.configs[c].config;
  cfg.seed = plan.base_seed;
  cfg.stream = (std::uint64_t(c) << 32) | std::uint64_t(i);
  const cvec z0 = initial_iterate(plan.instance, plan.base_seed, c, i);
  switch (plan.configs[c].algo) {
    case Algo::af: return af_run(e, z0, cfg);
    case Algo::saf: return saf_run(e, z0, cfg);
    case Algo::kaczmarz: return kaczmarz_run(e, z0, cfg);
    case Algo::pie: return pie_run(e, z0, cfg);
  }
  throw std::logic_error("run_one: unknown algorithm");
}

}  // namespace

TraceSet run_trials(const ExperimentPlan& plan) {
  const BuiltInstance inst = build_instance(plan.instance);
  return run_trials(inst.ensemble, plan);
}

TraceSet run_trials(const MeasurementEnsemble& ensemble, const ExperimentPlan& plan) {
  if (plan.trials == 0) throw std::invalid_argument("run_trials: need at least one trial");
  if (plan.configs.empty()) throw std::invalid_argument("run_trials: no solver configs");
  if (plan.configs.size() >= (1ull << 31) || plan.trials >= (1ull << 31))
    throw std::invalid_argument("run_trials: config/trial counts exceed the stream space");
  if (plan.instance.d != ensemble.d)
    throw std::invalid_argument("run_trials: plan dimension != ensemble dimension");

  TraceSet set;
  set.traces.assign(plan.configs.size(), std::vector<RunTrace>(plan.trials));

  // flat job list; results land in fixed slots so thread count never matters
  struct Job {
    std::size_t c, i;
  };
  std::vector<Job> jobs;
  jobs.reserve(plan.configs.size() * plan.trials);
  for (std::size_t c = 0; c < plan.configs.size(); ++c)
    for (std::size_t i = 0; i < plan.trials; ++i) jobs.push_back({c, i});

  unsigned threads = plan.threads > 0 ? unsigned(plan.threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(jobs.size()));
  if (threads <= 1) {
    for (const Job& job : jobs) set.traces[job.c][job.i] = run_one(ensemble, plan, job.c, job.i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1))
          set.traces[jobs[j].c][jobs[j].i] = run_one(ensemble, plan, jobs[j].c, jobs[j].i);
      });
    for (auto& th : pool) th.join();
  }

  set.curves.reserve(plan.configs.size());
  for (std::size_t c = 0; c < plan.configs.size(); ++c) {
    AggregateCurve curve;
    curve.label = plan.configs[c].label.empty()
                      ? algo_name(plan.configs[c].algo) + "_" + std::to_string(c)
                      : plan.configs[c].label;
    const std::vector<RunTrace>& trials = set.traces[c];
    // grid comes from the first usable trial; all share iters and stride
    const RunTrace* grid = nullptr;
    for (const RunTrace& tr : trials)
      if (!tr.aborted) {
        grid = &tr;
        break;
      }
    if (grid != nullptr) {
      const std::size_t rows = grid->records.size();
      curve.t.resize(rows);
      for (std::size_t k = 0; k < rows; ++k) curve.t[k] = grid->records[k].t;
      curve.mean_loss.assign(rows, 0.0);
      curve.mean_grad_norm.assign(rows, 0.0);
      curve.mu_t.assign(rows, 0.0);
      curve.cum_mu.assign(rows, 0.0);
      curve.cum_weighted_sq.assign(rows, 0.0);
      for (const RunTrace& tr : trials) {
        if (tr.aborted) {
          ++curve.trials_failed;
          continue;
        }
        if (tr.records.size() != rows)
          throw std::runtime_error("run_trials: trials disagree on the trace grid");
        ++curve.trials_ok;
        for (std::size_t k = 0; k < rows; ++k) {
          curve.mean_loss[k] += tr.records[k].loss;
          curve.mean_grad_norm[k] += tr.records[k].grad_norm;
          curve.mu_t[k] += tr.records[k].mu;
          curve.cum_mu[k] += tr.records[k].cum_mu;
          curve.cum_weighted_sq[k] += tr.records[k].cum_weighted_sq;
        }
      }
      const double inv = 1.0 / double(curve.trials_ok);
      for (std::size_t k = 0; k < rows; ++k) {
        curve.mean_loss[k] *= inv;
        curve.mean_grad_norm[k] *= inv;
        curve.mu_t[k] *= inv;
        curve.cum_mu[k] *= inv;
        curve.cum_weighted_sq[k] *= inv;
      }
      curve.min_mean_grad_norm.resize(rows);
      double running = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < rows; ++k) {
        running = std::min(running, curve.mean_grad_norm[k]);
        curve.min_mean_grad_norm[k] = running;
      }
    } else {
      curve.trials_failed = trials.size();
    }
    set.curves.push_back(std::move(curve));
  }
  return set;
}

AggregateCurve curve_from_trace(const RunTrace& trace, const std::string& label) {
  AggregateCurve curve;
  curve.label = label;
  curve.trials_ok = trace.aborted ? 0 : 1;
  curve.trials_failed = trace.aborted ? 1 : 0;
  double running = std::numeric_limits<double>::infinity();
  for (const TraceRecord& rec : trace.records) {
    curve.t.push_back(rec.t);
    curve.mean_loss.push_back(rec.loss);
    curve.mean_grad_norm.push_back(rec.grad_norm);
    running = std::min(running, rec.grad_norm);
    curve.min_mean_grad_norm.push_back(running);
    curve.mu_t.push_back(rec.mu);
    curve.cum_mu.push_back(rec.cum_mu);
    curve.cum_weighted_sq.push_back(rec.cum_weighted_sq);
  }
  return curve;
}

void write_curve_csv(const AggregateCurve& curve, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("write_curve_csv: cannot open " + path);
  std::fputs("t,mean_loss,mean_grad_norm,min_mean_grad_norm,mu_t,cum_mu,cum_weighted_sq\n", f);
  for (std::size_t k = 0; k < curve.t.size(); ++k)
    std::fprintf(f, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                 (unsigned long long)curve.t[k], curve.mean_loss[k], curve.mean_grad_norm[k],
                 curve.min_mean_grad_norm[k], curve.mu_t[k], curve.cum_mu[k],
                 curve.cum_weighted_sq[k]);
  if (std::fclose(f) != 0) throw std::runtime_error("write_curve_csv: write failed for " + path);
}

DescentReport check_descent(const RunTrace& trace, double slack) {
  DescentReport rep;
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    const TraceRecord& a = trace.records[k];
    const TraceRecord& b = trace.records[k + 1];
    if (b.t != a.t + 1)
      throw std::invalid_argument("check_descent: needs consecutive rows (trace_every = 1)");
    ++rep.steps_checked;
    const double excess =
        b.loss - (a.loss - a.mu * a.grad_norm * a.grad_norm) - slack * (1.0 + std::abs(a.loss));
    if (excess > 0.0) {
      ++rep.violations;
      if (excess > rep.worst_violation) {
        rep.worst_violation = excess;
        rep.worst_t = a.t;
      }
    }
  }
  return rep;
}

SecondMomentReport check_second_moment(const MeasurementEnsemble& e, const cvec& z,
                                       const LossSpec& spec, const SamplingDistribution& dist,
                                       std::size_t batch, std::size_t samples, SeededRng& rng,
                                       double loss_floor) {
  if (samples < 2) throw std::invalid_argument("check_second_moment: need >= 2 samples");
  const GradientReport full = wirtinger_gradient(e, z, spec);
  const double gn = norm2(full.gradient);
  const AbcConstants abc = abc_constants(e, dist, batch);

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto idx = sample_indices(dist, batch, rng);
    const GradientReport g = stochastic_gradient(e, z, spec, dist, idx);
    const double v = norm2(g.gradient);
    sum += v * v;
    sum_sq += v * v * v * v;
  }
  SecondMomentReport rep;
  const double n = double(samples);
  rep.mean_sq = sum / n;
  const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
  rep.stderr_sq = std::sqrt(var / n);
  rep.bound = abc.alpha * (full.loss - loss_floor) + abc.beta * gn * gn + abc.delta_upper;
  rep.pass = rep.mean_sq <= rep.bound + 5.0 * rep.stderr_sq;
  return rep;
}

RateFit fit_rate(const AggregateCurve& curve, double theta) {
  RateFit fit;
  fit.threshold = 0.5 * theta - 0.25;
  if (curve.t.empty()) throw std::invalid_argument("fit_rate: empty curve");
  const std::uint64_t t_max = curve.t.back();
  const std::uint64_t t_min = std::max<std::uint64_t>(1, t_max / 10);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < curve.t.size(); ++k) {
    if (curve.t[k] < t_min) continue;
    const double v = curve.min_mean_grad_norm[k];
    if (v <= 0.0) {
      fit.converged = true;
      return fit;
    }
    const double x = std::log(double(curve.t[k]));
    const double y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++fit.points;
  }
  if (fit.points < 2) throw std::invalid_argument("fit_rate: fewer than two points in the decade");
  const double n = double(fit.points);
  const double denom = sxx - sx * sx / n;
  if (denom <= 0.0) throw std::invalid_argument("fit_rate: degenerate abscissa");
  fit.slope = (sxy - sx * sy / n) / denom;
  return fit;
}

}  // namespace saflow
