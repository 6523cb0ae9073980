#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saflow/stochastic.hpp"

namespace saflow {

/* Step-size schedule: constant mu, or mu / (1 + t)^(1/2 + theta) with
 * 0 < theta < 1/2. For the magnitude-projection solver the same schedule
 * plays the role of the relaxation factor alpha_t. */
struct StepSchedule {
  enum class Kind { constant, polynomial };
  Kind kind = Kind::constant;
  double base = 0.0;
  double theta = 0.25;

  static StepSchedule constant(double mu);
  static StepSchedule polynomial(double mu, double theta);
  double value(std::uint64_t t) const;
};

struct SolverConfig {
  LossSpec loss;                // eps; forced to 0 by the projection solvers
  StepSchedule schedule;
  std::size_t batch = 1;        // minibatch size K (stochastic solvers)
  SamplingDistribution dist;    // stochastic solvers; empty -> uniform
  std::uint64_t iters = 0;
  double grad_tol = 0.0;        // > 0 enables early stop on the full gradient norm
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t trace_every = 1;
  bool record_iterates = false;
};

struct TraceRecord {
  std::uint64_t t = 0;
  double loss = 0.0;       // L_eps(z^t), before the step at t
  double grad_norm = 0.0;  // ||grad L_eps(z^t)||_2
  double mu = 0.0;         // step size applied at t (0 on the final record)
  double cum_mu = 0.0;         // sum of mu_s for s <= t
  double cum_weighted_sq = 0.0;  // sum of mu_s ||grad(z^s)||^2 for s <= t
  std::vector<std::size_t> indices;  // blocks sampled at t (empty for full-gradient steps)
};

struct RunTrace {
  std::vector<TraceRecord> records;  // every trace_every iterations plus the final state
  cvec final_iterate;
  std::vector<cvec> iterates;        // filled when record_iterates (z^0, z^1, ...)
  bool aborted = false;              // non-finite loss or gradient encountered
  std::string abort_reason;
  bool converged = false;            // grad_tol reached before the budget
  std::vector<std::string> warnings;
  double norm_a = 0.0;               // ||A|| computed for the step-bound warnings
  double wall_seconds = 0.0;         // in-memory only, never serialized
  std::size_t clamp_count = 0;
};

/* Full-gradient descent z <- z - mu_t grad L_eps(z). With constant
 * mu <= 1/||A||^2 every step decreases the loss by at least mu ||grad||^2;
 * a larger step only triggers a warning, not an error. */
RunTrace af_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg);

/* Minibatch descent z <- z - mu_t g_t with the importance-weighted gradient.
 * Warns when beta ||A||^2 mu_0 > 1, the step bound of the constant-step
 * guarantee. Fresh indices are drawn each iteration from (seed, stream). */
RunTrace saf_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg);

/* One randomized row projection on a single-row dense partition:
 *   z <- z + conj(row_r)/||row_r||^2 * ( sgn((A z)_r) sqrt(y_r) - (A z)_r )
 * The updated iterate satisfies |(A z)_r| = sqrt(y_r) exactly (residual
 * nulling) whenever (A z)_r != 0. Note the target is sqrt(y_r): matching the
 * amplitude, not the intensity, is what makes the row residual vanish and
 * what makes the step a minibatch step with mu = p_r / ||row_r||^2. */
cvec kaczmarz_step(const MeasurementEnsemble& e, const cvec& z, std::size_t r);
RunTrace kaczmarz_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg);

/* One ptychographic-engine update on a windowed-DFT ensemble, executed
 * literally: exit wave psi = (S_s w) .* z, spectrum Psi = F psi, magnitude
 * projection Psi' = sqrt(y^r) .* sgn(Psi), psi' = F^{-1} Psi', then
 *   z <- z + (alpha / ||w||_inf^2) conj(S_s w) .* (psi' - psi).
 * Equivalent to a minibatch step with eps = 0, K = 1 and
 * mu_t = alpha_t p_r / (d ||w||_inf^2). */
cvec pie_step(const MeasurementEnsemble& e, const cvec& z, std::size_t r, double alpha);
RunTrace pie_run(const MeasurementEnsemble& e, cvec z0, const SolverConfig& cfg);

/* Iteration budget and step size for the constant-step schedule, given a
 * gradient-norm target gamma and initial gap delta0 = L(z^0) - floor.
 * When the sampling is variance-reducing with unit batches (beta = delta = 0,
 * alpha equals the summed block norms) and gamma >= 2 ||A|| sqrt(delta0),
 * the sharper constant-step-projection budget applies:
 *   mu = 1/alpha, T = ceil(4 alpha delta0 / gamma^2).
 * Otherwise T = ceil(max{16 alpha ||A||^2 delta0^2 / gamma^4,
 *                        4 beta ||A||^2 delta0 / gamma^2,
 *                        8 delta ||A||^2 delta0 / gamma^2})
 * with zero-constant terms dropped, and mu is the binding step bound
 *   min{ 1/(sqrt(alpha T) ||A||), 1/(beta ||A||^2), gamma^2/(2 delta ||A||^2) }
 * evaluated at that T; mu is empty when no term constrains it. */
struct BudgetResult {
  std::uint64_t iterations = 0;
  std::optional<double> mu;
};
BudgetResult constant_step_budget(double gamma, double delta0, const AbcConstants& abc,
                                  double norm_a);

/* Iteration budget for the decaying schedule mu_t = mu (1+t)^{-(1/2+theta)}:
 *   T = ceil( [ c_sq / (mu gamma^2) * (1/2 - theta) + 1 ]^{2/(1-2 theta)} - 1 )
 * where c_sq bounds the weighted square sum of gradient norms. */
std::uint64_t decaying_step_budget(double c_sq, double mu, double gamma, double theta);

}  // namespace saflow
