#pragma once

#include <cstddef>
#include <vector>

#include "saflow/measurement.hpp"

namespace saflow {

/* Smoothed amplitude loss
 *   L_eps(z) = sum_j ( sqrt(|(A z)_j|^2 + eps) - sqrt(y_j + eps) )^2
 * summed block by block in index order. eps = 0 gives the plain amplitude
 * residual. Noisy y_j + eps may be negative; the sqrt is clamped at 0 and the
 * clamps are counted so callers can see how often it fired. */
struct LossSpec {
  double eps = 0.0;  // >= 0
};

struct LossReport {
  double value = 0.0;
  std::vector<double> per_block;  // sums to value by construction
  std::size_t clamp_count = 0;
};

struct GradientReport {
  cvec gradient;
  double loss = 0.0;
  std::vector<double> per_block_loss;
  std::size_t clamp_count = 0;
};

LossReport loss_value(const MeasurementEnsemble& e, const cvec& z, const LossSpec& spec);

/* Gradient with respect to conj(z) (the direction of steepest ascent for a
 * real-valued loss of a complex argument):
 *   eps > 0:  A^* ( A z - sqrt(y + eps) .* (A z) ./ sqrt(|A z|^2 + eps) )
 *   eps = 0:  A^* ( A z - sqrt(y) .* sgn(A z) ),  sgn(0) = 0
 * so the gradient is identically zero at z = 0 in both cases. */
GradientReport wirtinger_gradient(const MeasurementEnsemble& e, const cvec& z,
                                  const LossSpec& spec);

// gradient and loss of the single-block term L_{eps,r}
GradientReport block_gradient(const MeasurementEnsemble& e, std::size_t r, const cvec& z,
                              const LossSpec& spec);

/* Gradient Lipschitz constant for eps > 0:
 *   ||A||^2 * max{ 1, max_j sqrt(y_j + eps) / sqrt(eps) - 1 }.
 * Throws for eps = 0 (the gradient is discontinuous there). */
double lipschitz_constant(const LossSpec& spec, const std::vector<std::vector<double>>& y,
                          double norm_a);
double lipschitz_constant(const MeasurementEnsemble& e, const LossSpec& spec, double norm_a);

/* Curvature quadratic form u -> d^2/dh^2 L_eps(z + h u) |_{h=0}, eps > 0:
 *   sum_j 2 [1 - eps t_j / (a_j + eps)^{3/2}] |v_j|^2
 *        + t_j / (a_j + eps)^{3/2} [ Re(w_j^2 conj(v_j)^2) - a_j |v_j|^2 ]
 * with w = A z, v = A u, a_j = |w_j|^2, t_j = sqrt(y_j + eps). Bounded by
 * 2 ||A||^2 ||u||^2 above and -2 (max_j t_j / sqrt(eps) - 1) ||A||^2 ||u||^2
 * below. */
double hessian_quadratic_form(const MeasurementEnsemble& e, const cvec& z, const cvec& u,
                              const LossSpec& spec);

/* Central-difference gradient: per coordinate (g_re + i g_im)/2 from real and
 * imaginary perturbations of loss_value. Built only on loss evaluations, so
 * it stays independent of the analytic gradient path; used by the self-check
 * suite. h <= 0 picks 1e-6 * (1 + ||z||_inf). */
cvec fd_gradient(const MeasurementEnsemble& e, const cvec& z, const LossSpec& spec,
                 double h = 0.0);

}  // namespace saflow
