"""End-to-end checks of the python module against numpy references."""

import math

import numpy as np
import pytest

import saflow


def make_ensemble(d=8, blocks=4, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    e = saflow.build_stft_ensemble(d, list(w), list(range(0, d, d // blocks)))
    x = saflow.initial_iterate(d, base_seed=seed + 100)
    saflow.simulate(e, x)
    return e, x, w


def test_dft_matches_numpy():
    rng = np.random.default_rng(3)
    for d in (4, 8, 12, 16):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        got = np.array(saflow.dft(list(v)))
        assert np.max(np.abs(got - np.fft.fft(v))) < 1e-12 * (1 + np.max(np.abs(v)))
        back = np.array(saflow.idft(saflow.dft(list(v))))
        assert np.max(np.abs(back - v)) < 1e-12


def test_apply_block_is_windowed_dft():
    e, x, w = make_ensemble(d=8, blocks=4)
    z = np.array(saflow.initial_iterate(8, base_seed=5))
    for r, shift in enumerate(range(0, 8, 2)):
        want = np.fft.fft(np.roll(w, shift) * z)
        got = np.array(e.apply_block(r, list(z)))
        assert np.max(np.abs(got - want)) < 1e-10


def test_loss_zero_at_truth_without_noise():
    e, x, _ = make_ensemble()
    assert saflow.loss_value(e, x).value == 0.0
    assert saflow.loss_value(e, x, eps=0.0).value == 0.0


def test_loss_matches_direct_formula():
    e, x, _ = make_ensemble()
    z = saflow.initial_iterate(8, base_seed=7)
    eps = 0.01
    want = 0.0
    for r in range(e.blocks):
        az = np.abs(np.array(e.apply_block(r, z)))
        y = np.array(e.y[r])
        want += np.sum((np.sqrt(az**2 + eps) - np.sqrt(y + eps)) ** 2)
    got = saflow.loss_value(e, z, eps=eps).value
    assert got == pytest.approx(want, rel=1e-12)


def test_gradient_descends_the_loss():
    e, _, _ = make_ensemble()
    z = np.array(saflow.initial_iterate(8, base_seed=9))
    g = np.array(saflow.wirtinger_gradient(e, list(z), eps=0.001).gradient)
    before = saflow.loss_value(e, list(z), eps=0.001).value
    mu = 1.0 / saflow.ensemble_norm(e) ** 2
    after = saflow.loss_value(e, list(z - mu * g), eps=0.001).value
    assert after < before


def test_af_monotone_and_converges_on_noiseless_data():
    e, _, _ = make_ensemble()
    z0 = saflow.initial_iterate(8, base_seed=11, trial=2)
    mu = 1.0 / saflow.ensemble_norm(e) ** 2
    tr = saflow.run_solver(e, z0, "af", base=mu, iters=300)
    losses = [r.loss for r in tr.records]
    assert not tr.aborted
    assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-8 * losses[0]


def test_pie_equals_saf_on_unit_relaxation_scaling():
    # pie with relaxation a equals saf with mu = a / (d ||w||_inf^2) under
    # uniform sampling and the same sampling stream
    e, _, _ = make_ensemble(d=8, blocks=4, seed=2)
    z0 = saflow.initial_iterate(8, base_seed=13)
    d = 8
    # ||w||_inf^2 recovered from the exact block norm ||A_r||^2 = d ||w||_inf^2
    winf2 = e.block_norm_sq(0) / d
    alpha = 0.7
    a = saflow.run_solver(e, z0, "pie", base=alpha, iters=50, seed=17, sampling="uniform")
    b = saflow.run_solver(
        e, z0, "saf",
        base=alpha * (1.0 / e.blocks) / (d * winf2),
        iters=50, seed=17, batch=1, sampling="uniform",
    )
    za, zb = np.array(a.final_iterate), np.array(b.final_iterate)
    assert np.max(np.abs(za - zb)) < 1e-12 * (1 + np.max(np.abs(za)))


def test_kaczmarz_nulls_the_projected_row():
    rng = np.random.default_rng(21)
    d, m = 6, 24
    mat = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    e = saflow.build_row_partition(m, d, list(mat.reshape(-1)))
    x = saflow.initial_iterate(d, base_seed=22)
    saflow.simulate(e, x)
    z = np.array(saflow.initial_iterate(d, base_seed=23))
    for r in (0, 5, 17):
        z2 = saflow.kaczmarz_step(e, list(z), r)
        got = abs(np.array(e.apply_block(r, z2))[0])
        assert got == pytest.approx(math.sqrt(e.y[r][0]), abs=1e-10)


def test_json_round_trip_is_bit_exact():
    e, _, _ = make_ensemble(seed=4)
    text = saflow.ensemble_to_json(e)
    e2 = saflow.ensemble_from_json(text)
    assert e2.d == e.d and e2.blocks == e.blocks
    for r in range(e.blocks):
        assert list(e2.y[r]) == list(e.y[r])
    assert saflow.ensemble_to_json(e2) == text


def test_budget_formulas():
    # beta-only envelope: T = ceil(4 beta ||A||^2 delta0 / gamma^2)
    t, mu = saflow.constant_step_budget(
        gamma=0.5, delta0=10.0, alpha=0.0, beta=1.0, delta_upper=0.0, norm_a=2.0
    )
    assert t == math.ceil(4 * 1.0 * 4.0 * 10.0 / 0.25)
    assert mu == pytest.approx(1.0 / 4.0)
    # decaying: theta = 1/4, T = ceil(((c^2/(mu g^2)) (1/2 - theta) + 1)^4 - 1)
    t2 = saflow.decaying_step_budget(c_sq=8.0, mu=0.1, gamma=1.0, theta=0.25)
    assert t2 == math.ceil((8.0 / 0.1 * 0.25 + 1) ** 4 - 1)


def test_stochastic_envelope_constants():
    e, _, _ = make_ensemble()
    abc = saflow.abc_constants(e, k=2, sampling="uniform")
    # uniform sampling: alpha = (R/K) max_r ||A_r||^2, beta = 1 - 1/K
    norms = [e.block_norm_sq(r) for r in range(e.blocks)]
    assert abc.alpha == pytest.approx(e.blocks / 2 * max(norms), rel=1e-12)
    assert abc.beta == pytest.approx(0.5)
    assert abc.delta_upper == 0.0


def test_check_suite_passes_and_tamper_fails():
    results = saflow.check_suite()
    assert all(ok for _, ok, _ in results)
    tampered = saflow.check_suite(tamper=True)
    bad = [name for name, ok, _ in tampered if not ok]
    assert bad == ["gradient_matches_fd"]
