"""Phase-retrieval measurement models, losses, and solvers."""

from saflow._core import (
    AbcConstants,
    Ensemble,
    GradientReport,
    LossReport,
    RunTrace,
    TraceRecord,
    __version__,
    abc_constants,
    block_gradient,
    build_row_partition,
    build_stft_ensemble,
    check_suite,
    constant_step_budget,
    decaying_step_budget,
    dft,
    ensemble_frobenius_norm,
    ensemble_from_json,
    ensemble_norm,
    ensemble_to_json,
    hessian_quadratic_form,
    idft,
    initial_iterate,
    kaczmarz_step,
    lipschitz_constant,
    load_ensemble,
    loss_value,
    run_solver,
    save_ensemble,
    simulate,
    wirtinger_gradient,
)

__all__ = [
    "AbcConstants",
    "Ensemble",
    "GradientReport",
    "LossReport",
    "RunTrace",
    "TraceRecord",
    "__version__",
    "abc_constants",
    "block_gradient",
    "build_row_partition",
    "build_stft_ensemble",
    "check_suite",
    "constant_step_budget",
    "decaying_step_budget",
    "dft",
    "ensemble_frobenius_norm",
    "ensemble_from_json",
    "ensemble_norm",
    "ensemble_to_json",
    "hessian_quadratic_form",
    "idft",
    "initial_iterate",
    "kaczmarz_step",
    "lipschitz_constant",
    "load_ensemble",
    "loss_value",
    "run_solver",
    "save_ensemble",
    "simulate",
    "wirtinger_gradient",
]
