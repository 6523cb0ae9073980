#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "saflow/harness.hpp"
#include "saflow/linalg.hpp"
#include "saflow/rng.hpp"

using namespace saflow;

namespace {

InstanceSpec reference_spec(std::uint64_t seed = 100) {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::stft;
  spec.d = 8;
  spec.stft_blocks = 4;
  spec.seed = seed;
  return spec;
}

ExperimentPlan small_plan(std::uint64_t seed, std::size_t trials, std::uint64_t iters) {
  ExperimentPlan plan;
  plan.instance = reference_spec(seed);
  SolverRun run;
  run.algo = Algo::saf;
  run.config.loss.eps = 0.0;
  run.config.schedule = StepSchedule::polynomial(0.01, 0.25);
  run.config.iters = iters;
  run.label = "saf";
  plan.configs = {run};
  plan.trials = trials;
  plan.base_seed = seed;
  return plan;
}

bool curves_bitwise_equal(const AggregateCurve& a, const AggregateCurve& b) {
  auto eq = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() &&
           (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  };
  return a.t == b.t && eq(a.mean_loss, b.mean_loss) && eq(a.mean_grad_norm, b.mean_grad_norm) &&
         eq(a.min_mean_grad_norm, b.min_mean_grad_norm) && eq(a.mu_t, b.mu_t) &&
         eq(a.cum_mu, b.cum_mu) && eq(a.cum_weighted_sq, b.cum_weighted_sq);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("algorithm names round trip") {
  for (Algo a : {Algo::af, Algo::saf, Algo::kaczmarz, Algo::pie})
    CHECK(algo_from_name(algo_name(a)) == a);
  CHECK_THROWS(algo_from_name("nonsense"));
}

TEST_CASE("instances are a pure function of their spec") {
  auto a = build_instance(reference_spec());
  auto b = build_instance(reference_spec());
  CHECK(std::memcmp(a.x.data(), b.x.data(), 8 * sizeof(cdouble)) == 0);
  for (std::size_t r = 0; r < 4; ++r)
    CHECK(std::memcmp(a.ensemble.y[r].data(), b.ensemble.y[r].data(), 8 * sizeof(double)) == 0);

  auto c = build_instance(reference_spec(101));
  CHECK(std::memcmp(a.x.data(), c.x.data(), 8 * sizeof(cdouble)) != 0);
}

TEST_CASE("default shifts are evenly spaced") {
  auto inst = build_instance(reference_spec());
  REQUIRE(inst.ensemble.block_count() == 4);
  for (std::size_t r = 0; r < 4; ++r) CHECK(inst.ensemble.blocks[r].shift == (long long)(2 * r));
}

TEST_CASE("explicit shifts override the spacing") {
  InstanceSpec spec = reference_spec();
  spec.shifts = {1, 3, 6};
  auto inst = build_instance(spec);
  REQUIRE(inst.ensemble.block_count() == 3);
  CHECK(inst.ensemble.blocks[2].shift == 6);
}

TEST_CASE("window families") {
  InstanceSpec spec = reference_spec();
  spec.window = InstanceSpec::Window::ones;
  auto ones = build_instance(spec);
  for (const auto& w : ones.ensemble.window) CHECK(w == cdouble(1.0, 0.0));

  spec.window = InstanceSpec::Window::hann;
  auto hann = build_instance(spec);
  for (const auto& w : hann.ensemble.window) CHECK(std::abs(w) > 0.0);  // endpoint lifted

  spec.window = InstanceSpec::Window::gaussian;
  auto gauss = build_instance(spec);
  for (const auto& w : gauss.ensemble.window) CHECK(std::abs(w) > 0.0);
}

TEST_CASE("dense specs build and partition") {
  InstanceSpec spec;
  spec.kind = InstanceSpec::Kind::dense;
  spec.d = 6;
  spec.rows = 18;
  spec.seed = 102;
  SUBCASE("single block") {
    auto inst = build_instance(spec);
    CHECK(inst.ensemble.block_count() == 1);
    CHECK(inst.ensemble.rows() == 18);
  }
  SUBCASE("row partition") {
    spec.row_partition = true;
    auto inst = build_instance(spec);
    CHECK(inst.ensemble.block_count() == 18);
    CHECK(inst.ensemble.rows() == 18);
  }
}

TEST_CASE("starting points differ across trials and configs") {
  auto spec = reference_spec();
  cvec a = initial_iterate(spec, 5, 0, 0);
  cvec b = initial_iterate(spec, 5, 0, 1);
  cvec c = initial_iterate(spec, 5, 1, 0);
  cvec a2 = initial_iterate(spec, 5, 0, 0);
  CHECK(std::memcmp(a.data(), a2.data(), 8 * sizeof(cdouble)) == 0);
  CHECK(std::memcmp(a.data(), b.data(), 8 * sizeof(cdouble)) != 0);
  CHECK(std::memcmp(a.data(), c.data(), 8 * sizeof(cdouble)) != 0);
}

TEST_CASE("trial aggregation is independent of thread count") {
  auto plan = small_plan(103, 6, 50);
  plan.threads = 1;
  auto serial = run_trials(plan);
  plan.threads = 4;
  auto pooled = run_trials(plan);
  REQUIRE(serial.curves.size() == 1);
  CHECK(curves_bitwise_equal(serial.curves[0], pooled.curves[0]));
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::memcmp(serial.traces[0][i].final_iterate.data(),
                      pooled.traces[0][i].final_iterate.data(), 8 * sizeof(cdouble)) == 0);
}

TEST_CASE("mean curves equal the arithmetic mean of per-trial traces") {
  auto plan = small_plan(104, 3, 20);
  plan.threads = 1;
  auto set = run_trials(plan);
  const auto& curve = set.curves[0];
  REQUIRE(curve.t.size() == 21);
  CHECK(curve.trials_ok == 3);
  CHECK(curve.trials_failed == 0);

  for (std::size_t k = 0; k < curve.t.size(); ++k) {
    double loss = 0.0, gn = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      loss += set.traces[0][i].records[k].loss;
      gn += set.traces[0][i].records[k].grad_norm;
    }
    CHECK(curve.mean_loss[k] == doctest::Approx(loss / 3.0).epsilon(1e-15));
    CHECK(curve.mean_grad_norm[k] == doctest::Approx(gn / 3.0).epsilon(1e-15));
  }
  // running minimum is nonincreasing and dominated by the mean
  for (std::size_t k = 1; k < curve.t.size(); ++k) {
    CHECK(curve.min_mean_grad_norm[k] <= curve.min_mean_grad_norm[k - 1]);
    CHECK(curve.min_mean_grad_norm[k] <= curve.mean_grad_norm[k]);
  }
}

TEST_CASE("diverging configurations are counted, not hidden") {
  auto plan = small_plan(105, 3, 10);
  plan.configs[0].config.schedule = StepSchedule::constant(1e18);
  plan.threads = 1;
  auto set = run_trials(plan);
  CHECK(set.curves[0].trials_failed == 3);
  CHECK(set.curves[0].trials_ok == 0);
  CHECK(set.curves[0].t.empty());
  for (const auto& tr : set.traces[0]) CHECK(tr.aborted);
}

TEST_CASE("csv export format is pinned") {
  AggregateCurve curve;
  curve.label = "fixture";
  curve.t = {0, 1};
  curve.mean_loss = {0.1, 1.0};
  curve.mean_grad_norm = {2.0, 0.5};
  curve.min_mean_grad_norm = {2.0, 0.5};
  curve.mu_t = {0.25, 0.25};
  curve.cum_mu = {0.25, 0.5};
  curve.cum_weighted_sq = {1.0, 1.0625};

  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "saflow_curve_test.csv";
  write_curve_csv(curve, path.string());
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string want =
      "t,mean_loss,mean_grad_norm,min_mean_grad_norm,mu_t,cum_mu,cum_weighted_sq\n"
      "0,0.10000000000000001,2,2,0.25,0.25,1\n"
      "1,1,0.5,0.5,0.25,0.5,1.0625\n";
  CHECK(buf.str() == want);
  fs::remove(path);
}

TEST_CASE("csv roundtrip preserves every bit of a real run") {
  auto plan = small_plan(106, 2, 12);
  plan.threads = 1;
  auto set = run_trials(plan);
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "saflow_roundtrip.csv";
  write_curve_csv(set.curves[0], path.string());

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,mean_loss,mean_grad_norm,min_mean_grad_norm,mu_t,cum_mu,cum_weighted_sq");
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::uint64_t t;
    double v[6];
    row >> t >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5];
    CHECK(t == set.curves[0].t[k]);
    CHECK(v[0] == set.curves[0].mean_loss[k]);  // %.17g round trips exactly
    CHECK(v[1] == set.curves[0].mean_grad_norm[k]);
    CHECK(v[5] == set.curves[0].cum_weighted_sq[k]);
    ++k;
  }
  CHECK(k == set.curves[0].t.size());
  fs::remove(path);
}

TEST_CASE("single-trace curve matches the trace") {
  auto plan = small_plan(107, 1, 8);
  plan.threads = 1;
  auto set = run_trials(plan);
  auto curve = curve_from_trace(set.traces[0][0], "one");
  CHECK(curve.t.size() == set.traces[0][0].records.size());
  for (std::size_t k = 0; k < curve.t.size(); ++k)
    CHECK(curve.mean_loss[k] == set.traces[0][0].records[k].loss);
}

TEST_CASE("descent checker flags violations and bad strides") {
  RunTrace good;
  good.records = {{0, 10.0, 2.0, 0.5, 0.5, 2.0, {}},
                  {1, 8.0 - 1e-6, 1.0, 0.5, 1.0, 2.5, {}},
                  {2, 7.0, 0.0, 0.0, 1.0, 2.5, {}}};
  auto rep = check_descent(good);
  CHECK(rep.steps_checked == 2);
  CHECK(rep.violations == 0);

  RunTrace bad = good;
  bad.records[1].loss = 9.0;  // needed: <= 10 - 0.5 * 4 = 8
  rep = check_descent(bad);
  CHECK(rep.violations == 1);
  CHECK(rep.worst_t == 0);
  CHECK(rep.worst_violation == doctest::Approx(1.0).epsilon(1e-8));

  RunTrace strided;
  strided.records = {{0, 10.0, 2.0, 0.5, 0.5, 2.0, {}}, {2, 8.0, 1.0, 0.5, 1.0, 2.5, {}}};
  CHECK_THROWS(check_descent(strided));
}

TEST_CASE("rate fit recovers planted slopes") {
  AggregateCurve curve;
  for (std::uint64_t t = 1; t <= 1000; ++t) {
    curve.t.push_back(t);
    curve.min_mean_grad_norm.push_back(3.0 * std::pow(double(t), -0.25));
  }
  auto fit = fit_rate(curve, 0.25);
  CHECK(fit.slope == doctest::Approx(-0.25).epsilon(1e-10));
  CHECK(fit.threshold == doctest::Approx(-0.125).epsilon(1e-15));
  CHECK(!fit.converged);

  AggregateCurve flat;
  for (std::uint64_t t = 1; t <= 200; ++t) {
    flat.t.push_back(t);
    flat.min_mean_grad_norm.push_back(1.5);
  }
  CHECK(fit_rate(flat, 0.25).slope == doctest::Approx(0.0).epsilon(1e-12));

  AggregateCurve zero;
  for (std::uint64_t t = 1; t <= 200; ++t) {
    zero.t.push_back(t);
    zero.min_mean_grad_norm.push_back(0.0);
  }
  CHECK(fit_rate(zero, 0.25).converged);

  AggregateCurve tiny;
  tiny.t = {5};
  tiny.min_mean_grad_norm = {1.0};
  CHECK_THROWS(fit_rate(tiny, 0.25));
}

TEST_CASE("second-moment report on a healthy configuration") {
  auto inst = build_instance(reference_spec(108));
  SeededRng rng(108, 50);
  cvec z = random_complex_gaussian(8, rng);
  auto dist = SamplingDistribution::uniform(4);
  SeededRng mc(108, 51);
  auto rep = check_second_moment(inst.ensemble, z, LossSpec{0.0}, dist, 1, 4000, mc, 0.0);
  CHECK(rep.pass);
  CHECK(rep.mean_sq <= rep.bound + 5.0 * rep.stderr_sq);
  CHECK(rep.stderr_sq > 0.0);
}

}  // TEST_SUITE
