#pragma once

#include <cstddef>
#include <vector>

#include "saflow/loss.hpp"
#include "saflow/measurement.hpp"
#include "saflow/rng.hpp"

namespace saflow {

/* Block-sampling distribution. Weights must be positive and sum to one
 * (within 1e-12); sampling inverts the cumulative table, so a given rng
 * stream always yields the same index sequence. */
struct SamplingDistribution {
  std::vector<double> p;
  std::vector<double> cdf;  // prefix sums, last entry forced to 1

  static SamplingDistribution uniform(std::size_t count);
  static SamplingDistribution from_probabilities(std::vector<double> probs);
  std::size_t size() const { return p.size(); }
};

// p_r proportional to the squared block spectral norm; for single-row dense
// partitions this is the row-norm-squared over squared-Frobenius weighting
SamplingDistribution variance_reducing_distribution(const MeasurementEnsemble& e);

// K i.i.d. draws with replacement
std::vector<std::size_t> sample_indices(const SamplingDistribution& dist, std::size_t k,
                                        SeededRng& rng);

/* Importance-weighted minibatch gradient
 *   g = (1/K) sum_k (1/p_{r_k}) grad L_{eps, r_k}(z),
 * an unbiased estimate of the full gradient under i.i.d. index draws. The
 * report's loss field carries the matching importance-weighted loss estimate. */
GradientReport stochastic_gradient(const MeasurementEnsemble& e, const cvec& z,
                                   const LossSpec& spec, const SamplingDistribution& dist,
                                   const std::vector<std::size_t>& indices);

/* Second-moment envelope constants for the minibatch gradient:
 *   E ||g||^2 <= alpha (L_eps(z) - loss_floor) + beta ||grad L_eps(z)||^2 + delta
 * with alpha = (1/K) max_r ||A_r||^2 / p_r and beta = 1 - 1/K. delta_upper is
 * alpha * (loss_floor - sum_r block_loss_floors[r]); both floors default to 0,
 * which is exact for noiseless data and gives delta_upper = 0. */
struct AbcConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double delta_upper = 0.0;
  std::vector<double> block_norms_sq;
};

AbcConstants abc_constants(const MeasurementEnsemble& e, const SamplingDistribution& dist,
                           std::size_t k, double loss_floor = 0.0,
                           const std::vector<double>& block_loss_floors = {});

}  // namespace saflow
