#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saflow/harness.hpp"

namespace saflow::checks {

struct Result {
  std::string name;
  bool pass = false;
  std::string detail;
};

/* Each check builds its own seeded instances, so results are reproducible.
 * `tamper` on the gradient check injects a deliberate bias into the analytic
 * gradient before comparison; it exists as a negative control so the suite
 * provably fails when the thing it guards breaks. */

// analytic gradient vs central differences, dense and windowed, eps {1e-2, 1}
Result gradient_matches_fd(std::size_t cases, double tol, std::uint64_t seed, bool tamper = false);

// same comparison at a caller-chosen eps (0 allowed), restricted to points
// whose measurement magnitudes all sit well above the finite-difference step,
// where the unsmoothed loss is differentiable
Result gradient_matches_fd_nondegenerate(std::size_t cases, double tol, double eps,
                                         std::uint64_t seed);

// <A z, u> == <z, A* u> across block types
Result adjoint_consistent(std::uint64_t seed);

// componentwise mean of the minibatch gradient within 5 standard errors of
// the full gradient, K in {1, 2}, uniform and skewed sampling
Result stochastic_gradient_unbiased(std::size_t resamples, std::uint64_t seed);

// mean ||g||^2 against the alpha/beta/delta envelope at random points
Result second_moment_bounded(std::size_t points, std::size_t resamples, std::uint64_t seed);

// full-gradient descent with mu = 1/||A||^2 decreases the loss every step
Result descent_monotone(std::uint64_t iters, std::uint64_t seed);

// ||grad(z) - grad(v)|| <= L ||z - v|| on sampled pairs, eps {1e-2, 1}
Result lipschitz_bound_sampled(std::size_t pairs, std::uint64_t seed);

// curvature form inside its two-sided bound, plus agreement with the
// second directional difference on a subsample
Result hessian_form_bounded(std::size_t samples, std::size_t fd_samples, double fd_tol,
                            std::uint64_t seed);

// after each row projection the sampled row residual is exactly matched
Result kaczmarz_residual_nulling(std::size_t steps, std::uint64_t seed);

// magnitude-projection updates equal minibatch descent with mapped steps,
// d = 16, R in {1, 4, 16}, iterate-by-iterate
Result pie_matches_saf(std::uint64_t iters, double tol, std::uint64_t seed);

// power iteration on each windowed block reproduces d ||w||_inf^2, and the
// stacked norm matches the diagonal normal-operator formula
Result block_norm_identity(std::uint64_t seed);

// gradient at z = 0 is identically zero for eps = 0 and eps > 0
Result gradient_zero_at_origin(std::uint64_t seed);

// solvers commute with a global phase on the start point
Result solver_phase_equivariance(std::uint64_t iters, double tol, std::uint64_t seed);

// constant-step budget for the row-projection setting matches the
// closed form ceil(||A||_F^2 / (4 ||A||^2)) and the gradient target is met
Result kaczmarz_budget_claim(std::size_t trials, std::uint64_t seed);

/* Decaying-step trend on the reference noiseless windowed instance
 * (d = 32, R = 8): minibatch and magnitude-projection runs with theta = 1/4
 * produce running-min gradient curves with log-log slope at most
 * theta/2 - 1/4 + 0.05 over the final decade, and the weighted square sums
 * settle (final < 2x halfway). Heavy; this is the long-horizon check. */
Result decaying_rate_trend(std::uint64_t iters, std::size_t trials, std::uint64_t seed);

// the default fast suite run by the command-line `check` subcommand
std::vector<Result> default_suite(bool tamper_gradient, std::uint64_t seed = 0x5af0acc);

}  // namespace saflow::checks
