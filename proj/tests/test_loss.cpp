#include <doctest.h>

#include <cmath>
#include <complex>

#include "saflow/harness.hpp"
#include "saflow/linalg.hpp"
#include "saflow/loss.hpp"
#include "saflow/measurement.hpp"
#include "saflow/rng.hpp"
#include "support/oracles.hpp"

using namespace saflow;

namespace {

// d = 1 instance with a single 1x1 block [2] and one measurement
MeasurementEnsemble tiny(double y) {
  DenseOperator op(1, 1, {cdouble(2.0, 0.0)});
  auto e = build_dense_ensemble(1, {op});
  e.y = {{y}};
  return e;
}

BuiltInstance noisy_stft(std::uint64_t seed) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::stft;
  spec.d = 8;
  spec.stft_blocks = 4;
  spec.seed = seed;
  spec.noise.kind = NoiseSpec::Kind::gaussian;
  spec.noise.sigma = 0.2;
  spec.noise.seed = seed + 1;
  return build_instance(spec);
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("single-measurement values by hand") {
  // A = [2], z = 1.5 -> w = 3, y = 4
  auto e = tiny(4.0);
  cvec z = {cdouble(1.5, 0.0)};
  SUBCASE("eps 0: (|w| - sqrt(y))^2") {
    CHECK(loss_value(e, z, LossSpec{0.0}).value == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("eps 1: (sqrt(w^2+1) - sqrt(y+1))^2") {
    const double want = std::pow(std::sqrt(10.0) - std::sqrt(5.0), 2.0);
    CHECK(loss_value(e, z, LossSpec{1.0}).value == doctest::Approx(want).epsilon(1e-15));
  }
  SUBCASE("gradient eps 0: A*(w - sqrt(y) sgn(w)) = 2(3-2) = 2") {
    cvec g = wirtinger_gradient(e, z, LossSpec{0.0}).gradient;
    CHECK(std::abs(g[0] - cdouble(2.0, 0.0)) < 1e-14);
  }
}

TEST_CASE("negative targets are clamped and counted") {
  auto e = tiny(-5.0);
  cvec z = {cdouble(1.0, 0.0)};
  auto rep = loss_value(e, z, LossSpec{1.0});
  // sqrt(y + eps) clamps to 0, leaving (sqrt(4+1) - 0)^2
  CHECK(rep.value == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(rep.clamp_count == 1);
  auto grad = wirtinger_gradient(e, z, LossSpec{1.0});
  CHECK(grad.clamp_count == 1);

  auto ok = loss_value(tiny(3.0), z, LossSpec{1.0});
  CHECK(ok.clamp_count == 0);
}

TEST_CASE("loss agrees with the reference sum on random instances") {
  SeededRng rng(41, 0);
  auto inst = noisy_stft(900);
  for (double eps : {0.0, 0.3}) {
    for (int i = 0; i < 5; ++i) {
      cvec z = random_complex_gaussian(8, rng);
      const double got = loss_value(inst.ensemble, z, LossSpec{eps}).value;
      const double want = oracle::loss(inst.ensemble, z, eps);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-block losses sum to the total") {
  SeededRng rng(42, 0);
  auto inst = noisy_stft(901);
  cvec z = random_complex_gaussian(8, rng);
  auto rep = loss_value(inst.ensemble, z, LossSpec{0.2});
  double sum = 0.0;
  for (double v : rep.per_block) sum += v;
  CHECK(rep.per_block.size() == 4);
  CHECK(sum == doctest::Approx(rep.value).epsilon(1e-14));
}

TEST_CASE("analytic gradient matches the reference finite difference") {
  SeededRng rng(43, 0);
  auto inst = noisy_stft(902);
  for (double eps : {1e-2, 1.0}) {
    cvec z = random_complex_gaussian(8, rng);
    cvec g = wirtinger_gradient(inst.ensemble, z, LossSpec{eps}).gradient;
    cvec g_ref = oracle::fd_gradient(inst.ensemble, z, eps, 1e-6);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      num += std::norm(g[j] - g_ref[j]);
      den += std::norm(g_ref[j]);
    }
    CHECK(std::sqrt(num / den) < 1e-7);
  }
}

TEST_CASE("library finite difference agrees with the independent one") {
  SeededRng rng(44, 0);
  auto inst = noisy_stft(903);
  cvec z = random_complex_gaussian(8, rng);
  cvec a = fd_gradient(inst.ensemble, z, LossSpec{0.5}, 1e-6);
  cvec b = oracle::fd_gradient(inst.ensemble, z, 0.5, 1e-6);
  // same h, but the reference evaluates the loss in extended precision;
  // the leftover is double-eval roundoff amplified by 1/(2h)
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-7 * (1.0 + std::abs(b[j])));
}

TEST_CASE("block gradients sum to the full gradient") {
  SeededRng rng(45, 0);
  auto inst = noisy_stft(904);
  cvec z = random_complex_gaussian(8, rng);
  for (double eps : {0.0, 0.7}) {
    cvec total(8, cdouble(0.0));
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      auto rep = block_gradient(inst.ensemble, r, z, LossSpec{eps});
      for (std::size_t j = 0; j < 8; ++j) total[j] += rep.gradient[j];
      loss_sum += rep.loss;
    }
    auto full = wirtinger_gradient(inst.ensemble, z, LossSpec{eps});
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::abs(total[j] - full.gradient[j]) < 1e-12 * (1.0 + std::abs(full.gradient[j])));
    CHECK(loss_sum == doctest::Approx(full.loss).epsilon(1e-13));
  }
}

TEST_CASE("gradient vanishes exactly at the origin") {
  auto inst = noisy_stft(905);
  for (double eps : {0.0, 0.4}) {
    cvec g = wirtinger_gradient(inst.ensemble, cvec(8, cdouble(0.0)), LossSpec{eps}).gradient;
    CHECK(norm2(g) == 0.0);
  }
}

TEST_CASE("a zero block contributes nothing") {
  // block with an all-zero row: its measurement is constant in z
  DenseOperator op(1, 2, {cdouble(0.0), cdouble(0.0)});
  auto e = build_dense_ensemble(2, {op});
  e.y = {{2.5}};
  cvec z = {cdouble(1.0, -0.5), cdouble(0.25, 2.0)};
  auto rep = wirtinger_gradient(e, z, LossSpec{0.0});
  CHECK(norm2(rep.gradient) == 0.0);
  CHECK(rep.loss == doctest::Approx(2.5).epsilon(1e-15));  // (0 - sqrt(2.5))^2
}

TEST_CASE("smoothness constant: formula and validity") {
  auto inst = noisy_stft(906);
  const double na = ensemble_norm(inst.ensemble);
  const LossSpec spec{0.25};
  double tmax = 0.0;
  for (const auto& blk : inst.ensemble.y)
    for (double y : blk) tmax = std::max(tmax, std::sqrt(std::max(y + 0.25, 0.0)));
  const double want = na * na * std::max(1.0, tmax / 0.5 - 1.0);
  CHECK(lipschitz_constant(inst.ensemble, spec, na) == doctest::Approx(want).epsilon(1e-13));
  CHECK_THROWS(lipschitz_constant(inst.ensemble, LossSpec{0.0}, na));
}

TEST_CASE("curvature form: reference second difference and scaling") {
  SeededRng rng(46, 0);
  auto inst = noisy_stft(907);
  const LossSpec spec{0.5};
  cvec z = random_complex_gaussian(8, rng);
  cvec u = random_complex_gaussian(8, rng);

  const double q = hessian_quadratic_form(inst.ensemble, z, u, spec);
  const double h = 1e-5;
  cvec zp = z, zm = z;
  for (std::size_t j = 0; j < 8; ++j) {
    zp[j] += h * u[j];
    zm[j] -= h * u[j];
  }
  const double fd = (oracle::loss(inst.ensemble, zp, 0.5) -
                     2.0 * oracle::loss(inst.ensemble, z, 0.5) +
                     oracle::loss(inst.ensemble, zm, 0.5)) /
                    (h * h);
  CHECK(q == doctest::Approx(fd).epsilon(1e-5));

  // quadratic in u
  cvec u3 = u;
  for (auto& v : u3) v *= 3.0;
  CHECK(hessian_quadratic_form(inst.ensemble, z, u3, spec) ==
        doctest::Approx(9.0 * q).epsilon(1e-12));

  CHECK_THROWS(hessian_quadratic_form(inst.ensemble, z, u, LossSpec{0.0}));
}

TEST_CASE("automatic step size for the finite difference") {
  auto inst = noisy_stft(908);
  SeededRng rng(47, 0);
  cvec z = random_complex_gaussian(8, rng);
  cvec auto_h = fd_gradient(inst.ensemble, z, LossSpec{0.3});
  const double h = 1e-6 * (1.0 + norm_inf(z));
  cvec manual = fd_gradient(inst.ensemble, z, LossSpec{0.3}, h);
  for (std::size_t j = 0; j < 8; ++j) CHECK(auto_h[j] == manual[j]);
}

}  // TEST_SUITE
