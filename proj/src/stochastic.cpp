#include "saflow/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saflow {

SamplingDistribution SamplingDistribution::uniform(std::size_t count) {
  if (count == 0) throw std::invalid_argument("SamplingDistribution: empty support");
  return from_probabilities(std::vector<double>(count, 1.0 / double(count)));
}

SamplingDistribution SamplingDistribution::from_probabilities(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("SamplingDistribution: empty support");
  double sum = 0.0;
  for (double v : probs) {
    if (!(v > 0.0)) throw std::invalid_argument("SamplingDistribution: probabilities must be > 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("SamplingDistribution: probabilities must sum to 1");
  SamplingDistribution d;
  d.p = std::move(probs);
  d.cdf.resize(d.p.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < d.p.size(); ++r) {
    acc += d.p[r];
    d.cdf[r] = acc;
  }
  d.cdf.back() = 1.0;  // guards the inversion against rounding in the prefix sum
  return d;
}

SamplingDistribution variance_reducing_distribution(const MeasurementEnsemble& e) {
  const std::size_t R = e.block_count();
  if (R == 0) throw std::invalid_argument("variance_reducing_distribution: empty ensemble");
  std::vector<double> w(R);
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    w[r] = e.block_norm_sq(r);
    if (!(w[r] > 0.0))
      throw std::invalid_argument("variance_reducing_distribution: block " + std::to_string(r) +
                                  " has zero norm");
    total += w[r];
  }
  for (auto& v : w) v /= total;
  return SamplingDistribution::from_probabilities(std::move(w));
}

std::vector<std::size_t> sample_indices(const SamplingDistribution& dist, std::size_t k,
                                        SeededRng& rng) {
  if (dist.size() == 0) throw std::invalid_argument("sample_indices: empty distribution");
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double u = rng.next_double();
    const auto it = std::upper_bound(dist.cdf.begin(), dist.cdf.end(), u);
    out[i] = std::min<std::size_t>(std::size_t(it - dist.cdf.begin()), dist.size() - 1);
  }
  return out;
}

GradientReport stochastic_gradient(const MeasurementEnsemble& e, const cvec& z,
                                   const LossSpec& spec, const SamplingDistribution& dist,
                                   const std::vector<std::size_t>& indices) {
  if (dist.size() != e.block_count())
    throw std::invalid_argument("stochastic_gradient: distribution size != block count");
  if (indices.empty()) throw std::invalid_argument("stochastic_gradient: empty index batch");
  GradientReport rep;
  rep.gradient.assign(e.d, 0.0);
  const double kinv = 1.0 / double(indices.size());
  for (std::size_t r : indices) {
    if (r >= e.block_count()) throw std::invalid_argument("stochastic_gradient: index out of range");
    GradientReport br = block_gradient(e, r, z, spec);
    const double w = kinv / dist.p[r];
    for (std::size_t j = 0; j < e.d; ++j) rep.gradient[j] += w * br.gradient[j];
    rep.loss += w * br.loss;
    rep.clamp_count += br.clamp_count;
  }
  return rep;
}

AbcConstants abc_constants(const MeasurementEnsemble& e, const SamplingDistribution& dist,
                           std::size_t k, double loss_floor,
                           const std::vector<double>& block_loss_floors) {
  if (k == 0) throw std::invalid_argument("abc_constants: batch size must be >= 1");
  if (dist.size() != e.block_count())
    throw std::invalid_argument("abc_constants: distribution size != block count");
  if (!block_loss_floors.empty() && block_loss_floors.size() != e.block_count())
    throw std::invalid_argument("abc_constants: block floor count != block count");

  AbcConstants c;
  c.block_norms_sq.resize(e.block_count());
  double worst = 0.0;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    c.block_norms_sq[r] = e.block_norm_sq(r);
    worst = std::max(worst, c.block_norms_sq[r] / dist.p[r]);
  }
  c.alpha = worst / double(k);
  c.beta = 1.0 - 1.0 / double(k);
  double floor_sum = 0.0;
  for (double f : block_loss_floors) floor_sum += f;
  const double gap = loss_floor - floor_sum;
  if (gap < 0.0)
    throw std::invalid_argument("abc_constants: loss floor below the sum of block floors");
  c.delta_upper = c.alpha * gap;
  return c;
}

}  // namespace saflow
