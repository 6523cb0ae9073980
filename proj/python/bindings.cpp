#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "saflow/checks.hpp"
#include "saflow/harness.hpp"
#include "saflow/loss.hpp"
#include "saflow/measurement.hpp"
#include "saflow/solvers.hpp"
#include "saflow/stochastic.hpp"
#include "saflow/version.hpp"

namespace py = pybind11;
using namespace saflow;

namespace {

LossSpec spec_of(double eps) {
  if (eps < 0.0) throw std::invalid_argument("eps must be >= 0");
  return LossSpec{eps};
}

NoiseSpec noise_of(const std::string& kind, double sigma, double scale, std::uint64_t seed) {
  NoiseSpec n;
  if (kind == "none")
    n.kind = NoiseSpec::Kind::none;
  else if (kind == "gaussian")
    n.kind = NoiseSpec::Kind::gaussian;
  else if (kind == "poisson")
    n.kind = NoiseSpec::Kind::poisson;
  else
    throw std::invalid_argument("noise kind must be none|gaussian|poisson");
  n.sigma = sigma;
  n.scale = scale;
  n.seed = seed;
  return n;
}

SamplingDistribution dist_of(const MeasurementEnsemble& e, const std::string& sampling) {
  if (sampling == "uniform") return SamplingDistribution::uniform(e.block_count());
  if (sampling == "variance_reducing") return variance_reducing_distribution(e);
  throw std::invalid_argument("sampling must be uniform|variance_reducing");
}

// one entry point for all four iterative methods; kaczmarz ignores the
// schedule (its step is intrinsic), the others require base > 0
RunTrace run_solver(const MeasurementEnsemble& e, const cvec& z0, const std::string& algo,
                    double eps, const std::string& schedule, double base, double theta,
                    std::size_t batch, const std::string& sampling, std::uint64_t iters,
                    double grad_tol, std::uint64_t seed, std::uint64_t stream,
                    std::uint64_t trace_every, bool record_iterates) {
  const Algo a = algo_from_name(algo);
  SolverConfig cfg;
  cfg.loss = spec_of(eps);
  if (a != Algo::kaczmarz) {
    if (!(base > 0.0)) throw std::invalid_argument("base must be > 0");
    if (schedule == "constant")
      cfg.schedule = StepSchedule::constant(base);
    else if (schedule == "polynomial")
      cfg.schedule = StepSchedule::polynomial(base, theta);
    else
      throw std::invalid_argument("schedule must be constant|polynomial");
  }
  cfg.batch = batch;
  if (!sampling.empty()) cfg.dist = dist_of(e, sampling);
  cfg.iters = iters;
  cfg.grad_tol = grad_tol;
  cfg.seed = seed;
  cfg.stream = stream;
  cfg.trace_every = trace_every;
  cfg.record_iterates = record_iterates;
  switch (a) {
    case Algo::af: return af_run(e, z0, cfg);
    case Algo::saf: return saf_run(e, z0, cfg);
    case Algo::kaczmarz: return kaczmarz_run(e, z0, cfg);
    case Algo::pie: return pie_run(e, z0, cfg);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "phase-retrieval measurement models, losses, and solvers";
  m.attr("__version__") = kVersion;

  m.def("dft", &dft, py::arg("v"), "unnormalized forward DFT");
  m.def("idft", &idft, py::arg("v"), "inverse DFT, idft(dft(v)) == v");

  py::class_<MeasurementEnsemble>(m, "Ensemble")
      .def_readonly("d", &MeasurementEnsemble::d)
      .def_property_readonly("blocks", &MeasurementEnsemble::block_count)
      .def_property_readonly("rows", &MeasurementEnsemble::rows)
      .def_property_readonly("is_stft", &MeasurementEnsemble::is_stft)
      .def_property_readonly("has_measurements", &MeasurementEnsemble::has_measurements)
      .def_property_readonly("y", [](const MeasurementEnsemble& e) { return e.y; })
      .def("apply_block", &MeasurementEnsemble::apply_block, py::arg("r"), py::arg("z"))
      .def("block_norm_sq", &MeasurementEnsemble::block_norm_sq, py::arg("r"))
      .def("__repr__", [](const MeasurementEnsemble& e) {
        return "Ensemble(d=" + std::to_string(e.d) + ", blocks=" + std::to_string(e.block_count()) +
               ", rows=" + std::to_string(e.rows()) + ")";
      });

  m.def("build_stft_ensemble", &build_stft_ensemble, py::arg("d"), py::arg("window"),
        py::arg("shifts"), "windowed-DFT blocks A_r = F diag(S_{s_r} w)");
  m.def(
      "build_row_partition",
      [](std::size_t rows, std::size_t cols, const cvec& entries) {
        return build_row_partition(DenseOperator(rows, cols, entries));
      },
      py::arg("rows"), py::arg("cols"), py::arg("entries"),
      "row-major dense matrix split into single-row blocks");
  m.def(
      "simulate",
      [](MeasurementEnsemble& e, const cvec& x, const std::string& noise, double sigma,
         double scale, std::uint64_t seed) { simulate(e, x, noise_of(noise, sigma, scale, seed)); },
      py::arg("ensemble"), py::arg("x"), py::arg("noise") = "none", py::arg("sigma") = 0.0,
      py::arg("scale") = 1.0, py::arg("seed") = 0, "fill y with |A_r x|^2 plus optional noise");

  m.def("ensemble_norm", &ensemble_norm, py::arg("ensemble"));
  m.def("ensemble_frobenius_norm", &ensemble_frobenius_norm, py::arg("ensemble"));
  m.def("ensemble_to_json", &ensemble_to_json, py::arg("ensemble"));
  m.def("ensemble_from_json", &ensemble_from_json, py::arg("text"));
  m.def("save_ensemble", &save_ensemble, py::arg("ensemble"), py::arg("path"));
  m.def("load_ensemble", &load_ensemble, py::arg("path"));

  py::class_<LossReport>(m, "LossReport")
      .def_readonly("value", &LossReport::value)
      .def_readonly("per_block", &LossReport::per_block);
  py::class_<GradientReport>(m, "GradientReport")
      .def_readonly("gradient", &GradientReport::gradient)
      .def_readonly("loss", &GradientReport::loss)
      .def_readonly("per_block_loss", &GradientReport::per_block_loss);

  m.def(
      "loss_value",
      [](const MeasurementEnsemble& e, const cvec& z, double eps) {
        return loss_value(e, z, spec_of(eps));
      },
      py::arg("ensemble"), py::arg("z"), py::arg("eps") = 0.0);
  m.def(
      "wirtinger_gradient",
      [](const MeasurementEnsemble& e, const cvec& z, double eps) {
        return wirtinger_gradient(e, z, spec_of(eps));
      },
      py::arg("ensemble"), py::arg("z"), py::arg("eps") = 0.0,
      "gradient with respect to conj(z); zero at z = 0");
  m.def(
      "block_gradient",
      [](const MeasurementEnsemble& e, std::size_t r, const cvec& z, double eps) {
        return block_gradient(e, r, z, spec_of(eps));
      },
      py::arg("ensemble"), py::arg("r"), py::arg("z"), py::arg("eps") = 0.0);
  m.def(
      "lipschitz_constant",
      [](const MeasurementEnsemble& e, double eps) {
        return lipschitz_constant(e, spec_of(eps), ensemble_norm(e));
      },
      py::arg("ensemble"), py::arg("eps"), "gradient Lipschitz constant, eps > 0 only");
  m.def(
      "hessian_quadratic_form",
      [](const MeasurementEnsemble& e, const cvec& z, const cvec& u, double eps) {
        return hessian_quadratic_form(e, z, u, spec_of(eps));
      },
      py::arg("ensemble"), py::arg("z"), py::arg("u"), py::arg("eps"));

  py::class_<AbcConstants>(m, "AbcConstants")
      .def_readonly("alpha", &AbcConstants::alpha)
      .def_readonly("beta", &AbcConstants::beta)
      .def_readonly("delta_upper", &AbcConstants::delta_upper)
      .def_readonly("block_norms_sq", &AbcConstants::block_norms_sq);
  m.def(
      "abc_constants",
      [](const MeasurementEnsemble& e, std::size_t k, const std::string& sampling) {
        return abc_constants(e, dist_of(e, sampling), k);
      },
      py::arg("ensemble"), py::arg("k") = 1, py::arg("sampling") = "uniform",
      "second-moment envelope E||g||^2 <= alpha L + beta ||grad||^2 + delta");

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("t", &TraceRecord::t)
      .def_readonly("loss", &TraceRecord::loss)
      .def_readonly("grad_norm", &TraceRecord::grad_norm)
      .def_readonly("mu", &TraceRecord::mu)
      .def_readonly("cum_mu", &TraceRecord::cum_mu)
      .def_readonly("cum_weighted_sq", &TraceRecord::cum_weighted_sq)
      .def_readonly("indices", &TraceRecord::indices);
  py::class_<RunTrace>(m, "RunTrace")
      .def_readonly("records", &RunTrace::records)
      .def_readonly("final_iterate", &RunTrace::final_iterate)
      .def_readonly("iterates", &RunTrace::iterates)
      .def_readonly("aborted", &RunTrace::aborted)
      .def_readonly("abort_reason", &RunTrace::abort_reason)
      .def_readonly("converged", &RunTrace::converged)
      .def_readonly("warnings", &RunTrace::warnings);

  m.def("run_solver", &run_solver, py::arg("ensemble"), py::arg("z0"), py::arg("algo"),
        py::kw_only(), py::arg("eps") = 0.0, py::arg("schedule") = "constant",
        py::arg("base") = 0.0, py::arg("theta") = 0.25, py::arg("batch") = 1,
        py::arg("sampling") = std::string(), py::arg("iters") = 100, py::arg("grad_tol") = 0.0,
        py::arg("seed") = 0, py::arg("stream") = 0, py::arg("trace_every") = 1,
        py::arg("record_iterates") = false, "af | saf | kaczmarz | pie from a given start");
  m.def("kaczmarz_step", &kaczmarz_step, py::arg("ensemble"), py::arg("z"), py::arg("r"),
        "one row projection; |(A z')_r| = sqrt(y_r) exactly unless (A z)_r = 0");

  m.def(
      "initial_iterate",
      [](std::size_t d, std::uint64_t base_seed, std::uint64_t config_id, std::uint64_t trial) {
        InstanceSpec spec;
        spec.d = d;
        return initial_iterate(spec, base_seed, config_id, trial);
      },
      py::arg("d"), py::arg("base_seed") = 0, py::arg("config_id") = 0, py::arg("trial") = 0,
      "deterministic random starting point");

  m.def("constant_step_budget",
        [](double gamma, double delta0, double alpha, double beta, double delta_upper,
           double norm_a) {
          AbcConstants abc;
          abc.alpha = alpha;
          abc.beta = beta;
          abc.delta_upper = delta_upper;
          const BudgetResult b = constant_step_budget(gamma, delta0, abc, norm_a);
          return py::make_tuple(b.iterations, b.mu ? py::cast(*b.mu) : py::none());
        },
        py::arg("gamma"), py::arg("delta0"), py::arg("alpha"), py::arg("beta"),
        py::arg("delta_upper"), py::arg("norm_a"),
        "(iterations, step) guaranteeing min E||grad|| <= gamma");
  m.def("decaying_step_budget", &decaying_step_budget, py::arg("c_sq"), py::arg("mu"),
        py::arg("gamma"), py::arg("theta"));

  m.def(
      "check_suite",
      [](bool tamper, std::uint64_t seed) {
        py::list out;
        for (const checks::Result& r : checks::default_suite(tamper, seed))
          out.append(py::make_tuple(r.name, r.pass, r.detail));
        return out;
      },
      py::arg("tamper") = false, py::arg("seed") = 0x5af0acc,
      "structural self-checks as (name, pass, detail) tuples");
}
