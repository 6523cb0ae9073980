// Acceptance gate: one line per criterion, exit 0 only if every line passes.
// Criteria with a wall-clock limit fail when the limit is exceeded.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "saflow/checks.hpp"

namespace {

using saflow::checks::Result;

struct Criterion {
  std::string label;
  double time_limit_s;  // 0 = no limit
  std::function<Result()> run;
};

Result all_of(std::vector<Result> parts) {
  Result out;
  out.pass = true;
  for (auto& p : parts) {
    out.pass = out.pass && p.pass;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += p.name + (p.pass ? " ok" : " FAILED") + " (" + p.detail + ")";
  }
  return out;
}

}  // namespace

int main() {
  constexpr std::uint64_t seed = 0x5af0acc;

  const std::vector<Criterion> criteria = {
      {"gradient matches central differences, rel err <= 1e-6, 20 instances", 10.0,
       [&] { return saflow::checks::gradient_matches_fd(20, 1e-6, seed); }},
      {"minibatch gradient is unbiased within 5 standard errors, 2e5 resamples", 30.0,
       [&] { return saflow::checks::stochastic_gradient_unbiased(200000, seed); }},
      {"second moment of the minibatch gradient respects its envelope, 10 points", 0.0,
       [&] { return saflow::checks::second_moment_bounded(10, 10000, seed); }},
      {"full-gradient descent with mu = 1/||A||^2 never increases the loss, 500 steps", 0.0,
       [&] { return saflow::checks::descent_monotone(500, seed); }},
      {"gradient differences obey the Lipschitz constant on 1e4 sampled pairs", 0.0,
       [&] { return saflow::checks::lipschitz_bound_sampled(10000, seed); }},
      {"curvature form stays inside its two-sided bound, 1e4 samples + 100 fd probes", 0.0,
       [&] { return saflow::checks::hessian_form_bounded(10000, 100, 1e-4, seed); }},
      {"row projection nulls the selected residual, 1e4 steps", 0.0,
       [&] { return saflow::checks::kaczmarz_residual_nulling(10000, seed); }},
      {"engine updates equal minibatch descent to 1e-12, d=16, R in {1,4,16}", 0.0,
       [&] { return saflow::checks::pie_matches_saf(200, 1e-12, seed); }},
      {"row-projection budget matches its closed form and hits the target, 64 trials", 0.0,
       [&] { return saflow::checks::kaczmarz_budget_claim(64, seed); }},
      {"decaying-step runs show the predicted trend, T=1e4, 32 trials", 300.0,
       [&] { return saflow::checks::decaying_rate_trend(10000, 32, seed); }},
      {"structural identities: block norms, zero gradient at origin, phase equivariance", 0.0,
       [&] {
         return all_of({saflow::checks::block_norm_identity(seed),
                        saflow::checks::gradient_zero_at_origin(seed),
                        saflow::checks::solver_phase_equivariance(100, 1e-10, seed)});
       }},
  };

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = criteria[i].run();
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("exception: ") + ex.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = r.pass;
    std::string note = r.detail;
    if (criteria[i].time_limit_s > 0.0 && elapsed > criteria[i].time_limit_s) {
      pass = false;
      note += " [exceeded " + std::to_string(criteria[i].time_limit_s) + " s limit]";
    }
    all_pass = all_pass && pass;
    std::printf("[%s] %2zu %s (%.2f s) %s\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].label.c_str(), elapsed, note.c_str());
    std::fflush(stdout);
  }
  std::printf("%s\n", all_pass ? "acceptance: all criteria pass" : "acceptance: FAILURES above");
  return all_pass ? 0 : 1;
}
