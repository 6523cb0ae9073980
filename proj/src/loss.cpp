#include "saflow/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace saflow {

namespace {

void validate(const MeasurementEnsemble& e, const cvec& z, const LossSpec& spec) {
  if (!(spec.eps >= 0.0)) throw std::invalid_argument("loss: eps must be >= 0");
  if (z.size() != e.d) throw std::invalid_argument("loss: z length != d");
  if (!e.has_measurements()) throw std::invalid_argument("loss: ensemble has no measurements");
}

// sqrt(max(y + eps, 0)), counting clamps on negative arguments
inline double target_amp(double y, double eps, std::size_t& clamps) {
  const double s = y + eps;
  if (s < 0.0) {
    ++clamps;
    return 0.0;
  }
  return std::sqrt(s);
}

struct BlockEval {
  cvec residual;  // A z - target direction, ready for the adjoint
  double loss = 0.0;
  std::size_t clamps = 0;
};

BlockEval eval_block(const MeasurementEnsemble& e, std::size_t r, const cvec& z, double eps) {
  BlockEval out;
  const cvec w = e.apply_block(r, z);
  const std::vector<double>& yr = e.y[r];
  out.residual.resize(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double a = std::norm(w[j]);
    const double t = target_amp(yr[j], eps, out.clamps);
    double model;
    if (eps > 0.0) {
      model = std::sqrt(a + eps);
      out.residual[j] = w[j] - t * w[j] / model;
    } else {
      model = std::sqrt(a);
      out.residual[j] = model > 0.0 ? w[j] - t * (w[j] / model) : w[j];
    }
    const double diff = model - t;
    out.loss += diff * diff;
  }
  return out;
}

}  // namespace

LossReport loss_value(const MeasurementEnsemble& e, const cvec& z, const LossSpec& spec) {
  validate(e, z, spec);
  LossReport rep;
  rep.per_block.resize(e.block_count());
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    const cvec w = e.apply_block(r, z);
    const std::vector<double>& yr = e.y[r];
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double t = target_amp(yr[j], spec.eps, rep.clamp_count);
      const double diff = std::sqrt(std::norm(w[j]) + spec.eps) - t;
      acc += diff * diff;
    }
    rep.per_block[r] = acc;
    rep.value += acc;
  }
  return rep;
}

GradientReport wirtinger_gradient(const MeasurementEnsemble& e, const cvec& z,
                                  const LossSpec& spec) {
  validate(e, z, spec);
  GradientReport rep;
  rep.gradient.assign(e.d, 0.0);
  rep.per_block_loss.resize(e.block_count());
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    BlockEval ev = eval_block(e, r, z, spec.eps);
    const cvec g = e.adjoint_block(r, ev.residual);
    for (std::size_t j = 0; j < e.d; ++j) rep.gradient[j] += g[j];
    rep.per_block_loss[r] = ev.loss;
    rep.loss += ev.loss;
    rep.clamp_count += ev.clamps;
  }
  return rep;
}

GradientReport block_gradient(const MeasurementEnsemble& e, std::size_t r, const cvec& z,
                              const LossSpec& spec) {
  validate(e, z, spec);
  if (r >= e.block_count()) throw std::invalid_argument("block_gradient: block index out of range");
  GradientReport rep;
  BlockEval ev = eval_block(e, r, z, spec.eps);
  rep.gradient = e.adjoint_block(r, ev.residual);
  rep.loss = ev.loss;
  rep.per_block_loss = {ev.loss};
  rep.clamp_count = ev.clamps;
  return rep;
}

double lipschitz_constant(const LossSpec& spec, const std::vector<std::vector<double>>& y,
                          double norm_a) {
  if (!(spec.eps > 0.0))
    throw std::invalid_argument("lipschitz_constant: defined only for eps > 0");
  std::size_t clamps = 0;
  double tmax = 0.0;
  for (const auto& yr : y)
    for (double v : yr) tmax = std::max(tmax, target_amp(v, spec.eps, clamps));
  return norm_a * norm_a * std::max(1.0, tmax / std::sqrt(spec.eps) - 1.0);
}

double lipschitz_constant(const MeasurementEnsemble& e, const LossSpec& spec, double norm_a) {
  if (!e.has_measurements())
    throw std::invalid_argument("lipschitz_constant: ensemble has no measurements");
  return lipschitz_constant(spec, e.y, norm_a);
}

double hessian_quadratic_form(const MeasurementEnsemble& e, const cvec& z, const cvec& u,
                              const LossSpec& spec) {
  validate(e, z, spec);
  if (!(spec.eps > 0.0))
    throw std::invalid_argument("hessian_quadratic_form: defined only for eps > 0");
  if (u.size() != e.d) throw std::invalid_argument("hessian_quadratic_form: u length != d");
  const double eps = spec.eps;
  double q = 0.0;
  std::size_t clamps = 0;
  for (std::size_t r = 0; r < e.block_count(); ++r) {
    const cvec w = e.apply_block(r, z);
    const cvec v = e.apply_block(r, u);
    const std::vector<double>& yr = e.y[r];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double a = std::norm(w[j]);
      const double t = target_amp(yr[j], eps, clamps);
      const double den = std::pow(a + eps, 1.5);
      const double vsq = std::norm(v[j]);
      const cdouble cross = w[j] * w[j] * std::conj(v[j]) * std::conj(v[j]);
      q += 2.0 * (1.0 - eps * t / den) * vsq + (t / den) * (cross.real() - a * vsq);
    }
  }
  return q;
}

cvec fd_gradient(const MeasurementEnsemble& e, const cvec& z, const LossSpec& spec, double h) {
  validate(e, z, spec);
  if (h <= 0.0) h = 1e-6 * (1.0 + norm_inf(z));
  cvec g(z.size());
  cvec zp = z;
  const auto probe = [&](std::size_t j, cdouble delta) {
    zp[j] = z[j] + delta;
    const double f = loss_value(e, zp, spec).value;
    zp[j] = z[j];
    return f;
  };
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double g_re = (probe(j, {h, 0.0}) - probe(j, {-h, 0.0})) / (2.0 * h);
    const double g_im = (probe(j, {0.0, h}) - probe(j, {0.0, -h})) / (2.0 * h);
    g[j] = {0.5 * g_re, 0.5 * g_im};
  }
  return g;
}

}  // namespace saflow
