#include "saflow/checks.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "saflow/linalg.hpp"
#include "saflow/loss.hpp"
#include "saflow/measurement.hpp"
#include "saflow/rng.hpp"
#include "saflow/solvers.hpp"
#include "saflow/stochastic.hpp"

namespace saflow::checks {

namespace {

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

BuiltInstance stft_instance(std::size_t d, std::size_t blocks, std::uint64_t seed,
                            NoiseSpec noise = {},
                            InstanceSpec::Window win = InstanceSpec::Window::gaussian) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::stft;
  spec.d = d;
  spec.stft_blocks = blocks;
  spec.window = win;
  spec.seed = seed;
  spec.noise = noise;
  return build_instance(spec);
}

BuiltInstance dense_instance(std::size_t d, std::size_t rows, std::uint64_t seed, bool partition,
                             NoiseSpec noise = {}) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::dense;
  spec.d = d;
  spec.rows = rows;
  spec.row_partition = partition;
  spec.seed = seed;
  spec.noise = noise;
  return build_instance(spec);
}

NoiseSpec gaussian_noise(double sigma, std::uint64_t seed) {
  NoiseSpec n;
  n.kind = NoiseSpec::Kind::gaussian;
  n.sigma = sigma;
  n.seed = seed;
  return n;
}

NoiseSpec poisson_noise(double scale, std::uint64_t seed) {
  NoiseSpec n;
  n.kind = NoiseSpec::Kind::poisson;
  n.scale = scale;
  n.seed = seed;
  return n;
}

cvec scaled_point(std::size_t d, SeededRng& rng, double scale) {
  cvec z = random_complex_gaussian(d, rng);
  for (auto& v : z) v *= scale;
  return z;
}

double max_target(const MeasurementEnsemble& e, double eps) {
  double t = 0.0;
  for (const auto& block : e.y)
    for (double y : block) t = std::max(t, std::sqrt(std::max(y + eps, 0.0)));
  return t;
}

}  // namespace

Result gradient_matches_fd(std::size_t cases, double tol, std::uint64_t seed, bool tamper) {
  const std::size_t dims[3] = {4, 8, 16};
  const double eps_values[2] = {1e-2, 1.0};

  double worst = 0.0;
  std::size_t done = 0;
  for (std::size_t i = 0; done < cases; ++i) {
    const std::size_t d = dims[i % 3];
    const bool use_stft = ((i / 3) % 2) == 0;
    const double eps = eps_values[(i / 6) % 2];
    const bool noisy = (i % 2) == 1;

    NoiseSpec noise;
    if (noisy) noise = gaussian_noise(0.1, seed + i);
    BuiltInstance inst = use_stft ? stft_instance(d, std::max<std::size_t>(2, d / 2), seed + i, noise)
                                  : dense_instance(d, 3 * d, seed + i, false, noise);

    SeededRng rng(seed, 1000 + i);
    cvec z = scaled_point(d, rng, 0.5 + rng.next_double());
    LossSpec spec{eps};

    cvec g = wirtinger_gradient(inst.ensemble, z, spec).gradient;
    if (tamper) g[0] += 1e-3 * (1.0 + std::abs(g[0]));
    cvec g_fd = fd_gradient(inst.ensemble, z, spec);

    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff += std::norm(g[j] - g_fd[j]);
    const double rel = std::sqrt(diff) / std::max(norm2(g_fd), 1e-30);
    worst = std::max(worst, rel);
    ++done;
  }
  Result r;
  r.name = "gradient_matches_fd";
  r.pass = worst <= tol;
  r.detail = fmt("worst rel err %.3e over %zu cases (tol %.1e)", worst, done, tol);
  return r;
}

Result gradient_matches_fd_nondegenerate(std::size_t cases, double tol, double eps,
                                         std::uint64_t seed) {
  const std::size_t dims[3] = {4, 8, 16};
  const double margin = 1e-2;  // min |A z|_j floor, far above the fd step

  double worst = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t done = 0;
  for (std::size_t i = 0; done < cases && i < 50 * cases; ++i) {
    const std::size_t d = dims[i % 3];
    const bool use_stft = ((i / 3) % 2) == 0;
    BuiltInstance inst = use_stft
                             ? stft_instance(d, std::max<std::size_t>(2, d / 2), seed + i)
                             : dense_instance(d, 3 * d, seed + i, false);

    SeededRng rng(seed, 4000 + i);
    cvec z = scaled_point(d, rng, 0.5 + rng.next_double());
    double min_amp = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < inst.ensemble.block_count(); ++r)
      for (const cdouble& w : inst.ensemble.apply_block(r, z))
        min_amp = std::min(min_amp, std::sqrt(std::norm(w)));
    if (min_amp < margin) continue;  // skip points near a kink of the eps = 0 loss
    worst_margin = std::min(worst_margin, min_amp);

    const LossSpec spec{eps};
    cvec g = wirtinger_gradient(inst.ensemble, z, spec).gradient;
    cvec g_fd = fd_gradient(inst.ensemble, z, spec);
    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff += std::norm(g[j] - g_fd[j]);
    const double rel = std::sqrt(diff) / std::max(norm2(g_fd), 1e-30);
    worst = std::max(worst, rel);
    ++done;
  }
  Result r;
  r.name = "gradient_matches_fd_nondegenerate";
  r.pass = done == cases && worst <= tol;
  r.detail = fmt("worst rel err %.3e over %zu cases at eps %.3g, min |Az|_j %.3e (tol %.1e)",
                 worst, done, eps, worst_margin, tol);
  return r;
}

Result adjoint_consistent(std::uint64_t seed) {
  std::vector<BuiltInstance> insts;
  insts.push_back(stft_instance(16, 4, seed));
  insts.push_back(dense_instance(8, 24, seed + 1, false));
  insts.push_back(dense_instance(8, 8, seed + 2, true));

  double worst = 0.0;
  SeededRng rng(seed, 2000);
  for (const auto& inst : insts) {
    const auto& e = inst.ensemble;
    for (std::size_t r = 0; r < e.block_count(); ++r) {
      cvec z = random_complex_gaussian(e.d, rng);
      cvec u = random_complex_gaussian(e.block_rows(r), rng);
      cvec az = e.apply_block(r, z);
      cvec atu = e.adjoint_block(r, u);
      const cdouble lhs = inner(u, az);
      const cdouble rhs = inner(atu, z);
      const double scale = 1.0 + norm2(u) * norm2(az);
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  Result res;
  res.name = "adjoint_consistent";
  res.pass = worst <= 1e-12;
  res.detail = fmt("worst scaled defect %.3e (tol 1e-12)", worst);
  return res;
}

Result stochastic_gradient_unbiased(std::size_t resamples, std::uint64_t seed) {
  BuiltInstance inst = stft_instance(8, 4, seed);
  const auto& e = inst.ensemble;
  const LossSpec spec{0.1};

  const SamplingDistribution dists[2] = {
      SamplingDistribution::uniform(e.block_count()),
      SamplingDistribution::from_probabilities({0.1, 0.2, 0.3, 0.4}),
  };

  double worst = 0.0;
  std::size_t combo = 0;
  for (std::size_t k = 1; k <= 2; ++k) {
    for (const auto& dist : dists) {
      SeededRng point_rng(seed, 3000 + combo);
      cvec z = scaled_point(e.d, point_rng, 1.0);
      cvec full = wirtinger_gradient(e, z, spec).gradient;

      std::vector<double> sum(2 * e.d, 0.0), sum_sq(2 * e.d, 0.0);
      SeededRng rng(seed, 3100 + combo);
      for (std::size_t n = 0; n < resamples; ++n) {
        auto idx = sample_indices(dist, k, rng);
        cvec g = stochastic_gradient(e, z, spec, dist, idx).gradient;
        for (std::size_t j = 0; j < e.d; ++j) {
          const double re = g[j].real(), im = g[j].imag();
          sum[2 * j] += re;
          sum_sq[2 * j] += re * re;
          sum[2 * j + 1] += im;
          sum_sq[2 * j + 1] += im * im;
        }
      }
      const double n = double(resamples);
      for (std::size_t c = 0; c < 2 * e.d; ++c) {
        const double mean = sum[c] / n;
        const double var = std::max(0.0, (sum_sq[c] - n * mean * mean) / (n - 1.0));
        const double se = std::sqrt(var / n);
        const double target = (c % 2 == 0) ? full[c / 2].real() : full[c / 2].imag();
        const double allowed = 5.0 * se + 1e-13 * (1.0 + std::abs(target));
        worst = std::max(worst, std::abs(mean - target) / allowed);
      }
      ++combo;
    }
  }
  Result res;
  res.name = "stochastic_gradient_unbiased";
  res.pass = worst <= 1.0;
  res.detail = fmt("worst |mean - grad| / (5 se) = %.3f over %zu combos, N=%zu", worst, combo,
                   resamples);
  return res;
}

Result second_moment_bounded(std::size_t points, std::size_t resamples, std::uint64_t seed) {
  BuiltInstance inst = stft_instance(8, 4, seed);
  const auto& e = inst.ensemble;
  const SamplingDistribution dists[2] = {
      variance_reducing_distribution(e),
      SamplingDistribution::from_probabilities({0.1, 0.2, 0.3, 0.4}),
  };
  const double eps_values[2] = {0.0, 0.1};

  double worst_margin = -1e300;
  std::size_t failed = 0, idx = 0;
  for (std::size_t p = 0; p < points; ++p) {
    const std::size_t k = 1 + (p % 2);
    const auto& dist = dists[(p / 2) % 2];
    const LossSpec spec{eps_values[(p / 4) % 2]};

    SeededRng point_rng(seed, 4000 + p);
    cvec z = scaled_point(e.d, point_rng, 0.5 + 2.5 * double(p) / double(std::max<std::size_t>(points - 1, 1)));

    SeededRng rng(seed, 4100 + idx);
    auto rep = check_second_moment(e, z, spec, dist, k, resamples, rng, 0.0);
    if (!rep.pass) ++failed;
    const double margin = (rep.mean_sq - rep.bound) / std::max(rep.stderr_sq, 1e-30);
    worst_margin = std::max(worst_margin, margin);
    ++idx;
  }
  Result res;
  res.name = "second_moment_bounded";
  res.pass = failed == 0;
  res.detail = fmt("%zu/%zu points within bound, worst (mean-bound)/se = %.2f (limit 5)",
                   idx - failed, idx, worst_margin);
  return res;
}

Result descent_monotone(std::uint64_t iters, std::uint64_t seed) {
  std::vector<BuiltInstance> insts;
  insts.push_back(stft_instance(16, 8, seed));
  insts.push_back(dense_instance(16, 48, seed + 1, false, gaussian_noise(0.05, seed + 2)));

  std::size_t violations = 0, steps = 0;
  double worst = 0.0;
  int run_id = 0;
  for (const auto& inst : insts) {
    const double na = ensemble_norm(inst.ensemble);
    for (double eps : {0.0, 0.1}) {
      SolverConfig cfg;
      cfg.loss.eps = eps;
      cfg.schedule = StepSchedule::constant(1.0 / (na * na));
      cfg.iters = iters;
      cfg.seed = seed;
      cfg.stream = 5000 + run_id++;
      SeededRng rng(seed, 5100 + run_id);
      cvec z0 = random_complex_gaussian(inst.ensemble.d, rng);
      RunTrace trace = af_run(inst.ensemble, z0, cfg);
      if (trace.aborted) {
        Result res;
        res.name = "descent_monotone";
        res.pass = false;
        res.detail = "run aborted: " + trace.abort_reason;
        return res;
      }
      DescentReport rep = check_descent(trace);
      violations += rep.violations;
      steps += rep.steps_checked;
      worst = std::max(worst, rep.worst_violation);
    }
  }
  Result res;
  res.name = "descent_monotone";
  res.pass = violations == 0;
  res.detail = fmt("%zu violations in %zu steps, worst excess %.3e", violations, steps, worst);
  return res;
}

Result lipschitz_bound_sampled(std::size_t pairs, std::uint64_t seed) {
  std::vector<BuiltInstance> insts;
  insts.push_back(stft_instance(8, 4, seed));
  insts.push_back(dense_instance(8, 24, seed + 1, false, gaussian_noise(0.1, seed + 2)));

  double worst_ratio = 0.0;
  std::size_t checked = 0, violations = 0;
  SeededRng rng(seed, 6000);
  for (std::size_t i = 0; checked < pairs; ++i) {
    const auto& inst = insts[i % 2];
    const double eps = ((i / 2) % 2 == 0) ? 1e-2 : 1.0;
    const LossSpec spec{eps};
    const double na = ensemble_norm(inst.ensemble);
    const double lip = lipschitz_constant(inst.ensemble, spec, na);

    cvec z = scaled_point(inst.ensemble.d, rng, 1.0);
    cvec v;
    if (i % 2 == 0) {
      v = z;
      cvec step = scaled_point(inst.ensemble.d, rng, 1e-3);
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += step[j];
    } else {
      v = scaled_point(inst.ensemble.d, rng, 2.0);
    }

    cvec gz = wirtinger_gradient(inst.ensemble, z, spec).gradient;
    cvec gv = wirtinger_gradient(inst.ensemble, v, spec).gradient;
    double dg = 0.0, dz = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      dg += std::norm(gz[j] - gv[j]);
      dz += std::norm(z[j] - v[j]);
    }
    dg = std::sqrt(dg);
    dz = std::sqrt(dz);
    if (dz == 0.0) continue;
    const double ratio = dg / (lip * dz);
    worst_ratio = std::max(worst_ratio, ratio);
    if (dg > lip * dz * (1.0 + 1e-10) + 1e-15) ++violations;
    ++checked;
  }
  Result res;
  res.name = "lipschitz_bound_sampled";
  res.pass = violations == 0;
  res.detail = fmt("%zu violations in %zu pairs, worst ||dg||/(L ||dz||) = %.6f", violations,
                   checked, worst_ratio);
  return res;
}

Result hessian_form_bounded(std::size_t samples, std::size_t fd_samples, double fd_tol,
                            std::uint64_t seed) {
  std::vector<BuiltInstance> insts;
  insts.push_back(stft_instance(8, 4, seed));
  insts.push_back(dense_instance(8, 24, seed + 1, false, poisson_noise(50.0, seed + 2)));
  const double norms[2] = {ensemble_norm(insts[0].ensemble), ensemble_norm(insts[1].ensemble)};

  std::size_t bound_violations = 0;
  double worst_fd = 0.0;
  SeededRng rng(seed, 7000);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t which = i % 2;
    const auto& e = insts[which].ensemble;
    const double eps = ((i / 2) % 2 == 0) ? 1e-2 : 1.0;
    const LossSpec spec{eps};
    const double na2 = norms[which] * norms[which];

    cvec z = scaled_point(e.d, rng, 1.0);
    cvec u = scaled_point(e.d, rng, 1.0);
    const double q = hessian_quadratic_form(e, z, u, spec);
    const double u2 = norm2(u) * norm2(u);
    const double tmax = max_target(e, eps);
    const double lower = -2.0 * std::max(tmax / std::sqrt(eps) - 1.0, 0.0) * na2 * u2;
    const double upper = 2.0 * na2 * u2;
    const double slack = 1e-10 * (1.0 + std::abs(q) + na2 * u2);
    if (q < lower - slack || q > upper + slack) ++bound_violations;

    if (i < fd_samples) {
      // q is d^2/ds^2 L(z+su) at 0, i.e. the slope of the directional
      // derivative phi(s) = 2 Re <grad(z+su), u>. Differencing phi instead of
      // a three-point loss stencil avoids the 1/h^2 roundoff amplification.
      const double h = 1e-6 * (1.0 + norm_inf(z)) / (1.0 + norm_inf(u));
      cvec zp = z, zm = z;
      for (std::size_t j = 0; j < e.d; ++j) {
        zp[j] += h * u[j];
        zm[j] -= h * u[j];
      }
      const double phi_p = 2.0 * inner(wirtinger_gradient(e, zp, spec).gradient, u).real();
      const double phi_m = 2.0 * inner(wirtinger_gradient(e, zm, spec).gradient, u).real();
      const double q_fd = (phi_p - phi_m) / (2.0 * h);
      worst_fd = std::max(worst_fd, std::abs(q_fd - q) / std::max(std::abs(q), 1.0));
    }
  }
  Result res;
  res.name = "hessian_form_bounded";
  res.pass = bound_violations == 0 && worst_fd <= fd_tol;
  res.detail = fmt("%zu bound violations in %zu samples, worst fd rel err %.3e (tol %.1e)",
                   bound_violations, samples, worst_fd, fd_tol);
  return res;
}

Result kaczmarz_residual_nulling(std::size_t steps, std::uint64_t seed) {
  BuiltInstance inst = dense_instance(8, 24, seed, true);
  const auto& e = inst.ensemble;
  SamplingDistribution dist = variance_reducing_distribution(e);

  SeededRng rng(seed, 8000);
  cvec z = random_complex_gaussian(e.d, rng);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t r = sample_indices(dist, 1, rng)[0];
    const cdouble before = e.apply_block(r, z)[0];
    z = kaczmarz_step(e, z, r);
    if (std::abs(before) == 0.0) continue;  // projection leaves z unchanged
    const double target = std::sqrt(std::max(e.y[r][0], 0.0));
    const double resid = std::abs(std::abs(e.apply_block(r, z)[0]) - target);
    worst = std::max(worst, resid / (1.0 + target));
    ++checked;
  }
  Result res;
  res.name = "kaczmarz_residual_nulling";
  res.pass = worst <= 1e-10;
  res.detail = fmt("worst |(|Az|_r - sqrt(y_r))| / (1 + sqrt(y_r)) = %.3e over %zu steps", worst,
                   checked);
  return res;
}

Result pie_matches_saf(std::uint64_t iters, double tol, std::uint64_t seed) {
  double worst = 0.0;
  for (std::size_t blocks : {std::size_t(1), std::size_t(4), std::size_t(16)}) {
    BuiltInstance inst = stft_instance(16, blocks, seed + blocks);
    const auto& e = inst.ensemble;
    const double winf = norm_inf(e.window);
    SamplingDistribution dist = SamplingDistribution::uniform(e.block_count());

    SeededRng rng(seed, 9000 + blocks);
    cvec z0 = random_complex_gaussian(e.d, rng);

    const double alpha0 = 0.9;
    SolverConfig pie_cfg;
    pie_cfg.schedule = StepSchedule::polynomial(alpha0, 0.25);
    pie_cfg.dist = dist;
    pie_cfg.iters = iters;
    pie_cfg.seed = seed;
    pie_cfg.stream = 9100 + blocks;
    pie_cfg.trace_every = iters;
    pie_cfg.record_iterates = true;
    RunTrace pie_trace = pie_run(e, z0, pie_cfg);

    SolverConfig saf_cfg = pie_cfg;
    saf_cfg.loss.eps = 0.0;
    saf_cfg.batch = 1;
    saf_cfg.schedule = StepSchedule::polynomial(
        alpha0 * dist.p[0] * (1.0 / (double(e.d) * winf * winf)), 0.25);
    RunTrace saf_trace = saf_run(e, z0, saf_cfg);

    if (pie_trace.iterates.size() != saf_trace.iterates.size()) {
      Result res;
      res.name = "pie_matches_saf";
      res.pass = false;
      res.detail = "iterate counts differ";
      return res;
    }
    for (std::size_t t = 0; t < pie_trace.iterates.size(); ++t) {
      const cvec& a = pie_trace.iterates[t];
      const cvec& b = saf_trace.iterates[t];
      for (std::size_t j = 0; j < e.d; ++j)
        worst = std::max(worst, std::abs(a[j] - b[j]) / (1.0 + std::abs(a[j])));
    }
  }
  Result res;
  res.name = "pie_matches_saf";
  res.pass = worst <= tol;
  res.detail = fmt("worst scaled iterate gap %.3e over R in {1,4,16} (tol %.1e)", worst, tol);
  return res;
}

Result block_norm_identity(std::uint64_t seed) {
  BuiltInstance inst = stft_instance(16, 4, seed);
  const auto& e = inst.ensemble;
  const double winf = norm_inf(e.window);
  const double target = double(e.d) * winf * winf;

  double worst = 0.0;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    BlockOperator op(e, r);
    const double sigma = spectral_norm(op);
    worst = std::max(worst, std::abs(sigma * sigma - target) / target);
    worst = std::max(worst, std::abs(e.block_norm_sq(r) - target) / target);
  }

  // stacked operator: A*A = diag(q), q_j = d sum_r |(S_{s_r} w)_j|^2
  double qmax = 0.0;
  for (std::size_t j = 0; j < e.d; ++j) {
    double q = 0.0;
    for (std::size_t r = 0; r < e.block_count(); ++r) {
      const cvec sw = e.shifted_window(r);
      q += std::norm(sw[j]);
    }
    qmax = std::max(qmax, double(e.d) * q);
  }
  const double na = ensemble_norm(e);
  worst = std::max(worst, std::abs(na * na - qmax) / qmax);

  Result res;
  res.name = "block_norm_identity";
  res.pass = worst <= 1e-8;
  res.detail = fmt("worst rel gap to d ||w||_inf^2 / diagonal formula: %.3e (tol 1e-8)", worst);
  return res;
}

Result gradient_zero_at_origin(std::uint64_t seed) {
  std::vector<BuiltInstance> insts;
  insts.push_back(stft_instance(8, 4, seed, gaussian_noise(0.1, seed + 1)));
  insts.push_back(dense_instance(8, 24, seed + 2, false, poisson_noise(20.0, seed + 3)));

  double worst = 0.0;
  for (const auto& inst : insts) {
    for (double eps : {0.0, 0.5}) {
      cvec zero(inst.ensemble.d, cdouble(0.0, 0.0));
      cvec g = wirtinger_gradient(inst.ensemble, zero, LossSpec{eps}).gradient;
      worst = std::max(worst, norm2(g));
    }
  }
  Result res;
  res.name = "gradient_zero_at_origin";
  res.pass = worst == 0.0;
  res.detail = fmt("max ||grad(0)|| = %.3e (must be exactly 0)", worst);
  return res;
}

Result solver_phase_equivariance(std::uint64_t iters, double tol, std::uint64_t seed) {
  BuiltInstance stft = stft_instance(8, 4, seed);
  BuiltInstance rows = dense_instance(8, 24, seed + 1, true);
  const double na = ensemble_norm(stft.ensemble);

  SeededRng rng(seed, 10000);
  const cdouble phase = random_phase(rng);
  cvec z0 = random_complex_gaussian(8, rng);
  cvec z0_rot = z0;
  for (auto& v : z0_rot) v *= phase;

  double worst = 0.0;
  for (Algo algo : {Algo::af, Algo::saf, Algo::kaczmarz, Algo::pie}) {
    const auto& inst = (algo == Algo::kaczmarz) ? rows : stft;
    SolverConfig cfg;
    cfg.iters = iters;
    cfg.seed = seed;
    cfg.stream = 10100 + std::size_t(algo);
    switch (algo) {
      case Algo::af:
        cfg.loss.eps = 0.1;
        cfg.schedule = StepSchedule::constant(0.9 / (na * na));
        break;
      case Algo::saf:
        cfg.loss.eps = 0.1;
        cfg.schedule = StepSchedule::polynomial(0.5 / (na * na), 0.25);
        break;
      case Algo::kaczmarz:
        cfg.loss.eps = 0.0;
        break;
      case Algo::pie:
        cfg.loss.eps = 0.0;
        cfg.schedule = StepSchedule::polynomial(0.9, 0.25);
        break;
    }
    RunTrace a, b;
    switch (algo) {
      case Algo::af:
        a = af_run(inst.ensemble, z0, cfg);
        b = af_run(inst.ensemble, z0_rot, cfg);
        break;
      case Algo::saf:
        a = saf_run(inst.ensemble, z0, cfg);
        b = saf_run(inst.ensemble, z0_rot, cfg);
        break;
      case Algo::kaczmarz:
        a = kaczmarz_run(inst.ensemble, z0, cfg);
        b = kaczmarz_run(inst.ensemble, z0_rot, cfg);
        break;
      case Algo::pie:
        a = pie_run(inst.ensemble, z0, cfg);
        b = pie_run(inst.ensemble, z0_rot, cfg);
        break;
    }
    for (std::size_t j = 0; j < a.final_iterate.size(); ++j) {
      const cdouble expect = phase * a.final_iterate[j];
      worst = std::max(worst,
                       std::abs(expect - b.final_iterate[j]) / (1.0 + std::abs(expect)));
    }
  }
  Result res;
  res.name = "solver_phase_equivariance";
  res.pass = worst <= tol;
  res.detail = fmt("worst scaled drift %.3e across af/saf/kaczmarz/pie (tol %.1e)", worst, tol);
  return res;
}

Result kaczmarz_budget_claim(std::size_t trials, std::uint64_t seed) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::dense;
  spec.d = 16;
  spec.rows = 256;
  spec.row_partition = true;
  spec.seed = seed;
  BuiltInstance inst = build_instance(spec);
  const auto& e = inst.ensemble;

  const double na = ensemble_norm(e);
  const double fro = ensemble_frobenius_norm(e);
  const std::uint64_t t_formula =
      std::uint64_t(std::ceil(fro * fro / (4.0 * na * na)));

  SamplingDistribution dist = variance_reducing_distribution(e);
  AbcConstants abc = abc_constants(e, dist, 1);

  SeededRng rng(seed, 11000);
  cvec probe = random_complex_gaussian(e.d, rng);
  const double delta0 = loss_value(e, probe, LossSpec{0.0}).value;
  const double gamma_probe = 4.0 * na * std::sqrt(delta0);
  BudgetResult budget = constant_step_budget(gamma_probe, delta0, abc, na);

  const bool budget_ok = budget.iterations == t_formula && budget.mu.has_value() &&
                         std::abs(*budget.mu - 1.0 / abc.alpha) <= 1e-12 / abc.alpha;

  ExperimentPlan plan;
  plan.instance = spec;
  SolverRun run;
  run.algo = Algo::kaczmarz;
  run.config.loss.eps = 0.0;
  run.config.iters = budget.iterations;
  run.label = "kaczmarz";
  plan.configs = {run};
  plan.trials = trials;
  plan.base_seed = seed;
  plan.threads = 1;
  TraceSet set = run_trials(plan);
  const AggregateCurve& curve = set.curves[0];

  double gamma_mean = 0.0;
  std::size_t ok = 0;
  for (const RunTrace& tr : set.traces[0]) {
    if (tr.aborted || tr.records.empty()) continue;
    gamma_mean += 4.0 * na * std::sqrt(tr.records.front().loss);
    ++ok;
  }
  gamma_mean /= double(std::max<std::size_t>(ok, 1));

  double min_grad = 1e300;
  for (std::size_t i = 0; i < curve.t.size(); ++i)
    if (curve.t[i] < budget.iterations) min_grad = std::min(min_grad, curve.mean_grad_norm[i]);

  Result res;
  res.name = "kaczmarz_budget_claim";
  res.pass = budget_ok && min_grad <= gamma_mean;
  res.detail = fmt("T=%llu (formula %llu), min mean ||grad|| %.4f vs 4 ||A|| sqrt(L0) %.4f",
                   (unsigned long long)budget.iterations, (unsigned long long)t_formula, min_grad,
                   gamma_mean);
  return res;
}

Result decaying_rate_trend(std::uint64_t iters, std::size_t trials, std::uint64_t seed) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::stft;
  spec.d = 32;
  spec.stft_blocks = 8;
  spec.window = InstanceSpec::Window::gaussian;
  spec.seed = seed;
  BuiltInstance inst = build_instance(spec);
  const auto& e = inst.ensemble;
  const double na = ensemble_norm(e);
  const double theta = 0.25;

  ExperimentPlan plan;
  plan.instance = spec;
  plan.trials = trials;
  plan.base_seed = seed;
  plan.threads = 0;

  SolverRun saf;
  saf.algo = Algo::saf;
  saf.config.loss.eps = 0.0;
  saf.config.schedule = StepSchedule::polynomial(1.0 / (na * na), theta);
  saf.config.batch = 1;
  saf.config.iters = iters;
  saf.config.trace_every = std::max<std::uint64_t>(1, iters / 1000);
  saf.label = "saf";

  SolverRun pie = saf;
  pie.algo = Algo::pie;
  pie.config.schedule = StepSchedule::polynomial(1.0, theta);
  pie.label = "pie";

  plan.configs = {saf, pie};
  TraceSet set = run_trials(plan);

  bool pass = true;
  std::string detail;
  for (const AggregateCurve& curve : set.curves) {
    RateFit fit = fit_rate(curve, theta);
    const bool slope_ok = fit.converged || fit.slope <= fit.threshold + 0.05;

    double cum_half = 0.0, cum_final = 0.0;
    const std::uint64_t half = iters / 2;
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
      if (curve.t[i] <= half) cum_half = curve.cum_weighted_sq[i];
      cum_final = curve.cum_weighted_sq[i];
    }
    const bool cum_ok = cum_final < 2.0 * cum_half;
    pass = pass && slope_ok && cum_ok;
    detail += fmt("%s slope %.3f (need <= %.3f) cum ratio %.3f; ", curve.label.c_str(), fit.slope,
                  fit.threshold + 0.05, cum_final / std::max(cum_half, 1e-300));
  }
  Result res;
  res.name = "decaying_rate_trend";
  res.pass = pass;
  res.detail = detail;
  return res;
}

std::vector<Result> default_suite(bool tamper_gradient, std::uint64_t seed) {
  std::vector<Result> out;
  out.push_back(gradient_matches_fd(24, 1e-6, seed, tamper_gradient));
  out.push_back(adjoint_consistent(seed));
  out.push_back(stochastic_gradient_unbiased(40000, seed));
  out.push_back(second_moment_bounded(10, 4000, seed));
  out.push_back(descent_monotone(200, seed));
  out.push_back(lipschitz_bound_sampled(2000, seed));
  out.push_back(hessian_form_bounded(2000, 50, 1e-4, seed));
  out.push_back(kaczmarz_residual_nulling(2000, seed));
  out.push_back(pie_matches_saf(200, 1e-12, seed));
  out.push_back(block_norm_identity(seed));
  out.push_back(gradient_zero_at_origin(seed));
  out.push_back(solver_phase_equivariance(100, 1e-10, seed));
  return out;
}

}  // namespace saflow::checks
