import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmee.criteria import gaussian_kernel, kernel_peak, qmee_gradient_linear
from qmee.datagen import Background, MixtureNoiseSpec, gen_linear_regression, make_rng
from qmee.quantizer import Codebook, quantize_stream
from qmee.solvers import (FixedPointConfig, LinearModel, SingularSystemError,
                          assemble_qmee_normal_system, rmse_weights, solve_fixed_point,
                          solve_fixed_point_mcc, solve_fixed_point_mee,
                          solve_fixed_point_qmee, solve_mse)

CLEAN = MixtureNoiseSpec(c=0.0, background=Background.NONE)


def test_rmse_examples():
    assert rmse_weights(LinearModel([2.0, 1.0]), LinearModel([2.0, 1.0])) == 0.0
    assert rmse_weights([3.0, 2.0], [2.0, 1.0]) == pytest.approx(1.0, rel=1e-15)
    # sqrt(0.125), closed form
    assert rmse_weights([2.3, 0.6], [2.0, 1.0]) == pytest.approx(0.3535533905932737622, rel=1e-12)
    with pytest.raises(ValueError):
        rmse_weights([1.0], [1.0, 2.0])


def test_mse_examples():
    assert solve_mse([[1.0, 2.0]], [2.0, 4.0]).omega == pytest.approx([2.0], rel=1e-15)
    ds = gen_linear_regression(50, CLEAN, seed=0)
    np.testing.assert_allclose(solve_mse(ds.inputs, ds.targets).omega, [2.0, 1.0], atol=1e-10)


def test_mse_singular_is_reported():
    x = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(SingularSystemError, match="rank"):
        solve_mse(x, [1.0, 2.0, 3.0])
    with pytest.raises(SingularSystemError):
        solve_mse(np.ones((3, 2)), [1.0, 2.0])


def test_linear_model_rejects_nonfinite():
    with pytest.raises(ValueError):
        LinearModel([1.0, np.nan])


def _assembly_loops(x, y, e, cb, sigma):
    d, n = x.shape
    r = np.zeros((d, d))
    p = np.zeros(d)
    for m in range(cb.size):
        for i in range(n):
            lam = cb.counts[m] * math.exp(-(e[i] - cb.words[m]) ** 2 / (2 * sigma**2)) / (
                math.sqrt(2 * math.pi) * sigma)
            r += lam * np.outer(x[:, i], x[:, i])
            p += lam * x[:, i] * (y[i] - cb.words[m])
    return r, p


def test_assembly_matches_double_loop():
    rng = make_rng(4)
    x = rng.normal(size=(2, 5))
    y = rng.normal(size=5)
    e = y - np.array([0.3, -0.2]) @ x
    cb = quantize_stream(e, 0.4).codebook
    r, p = assemble_qmee_normal_system(x, y, e, cb, 0.9)
    r_ref, p_ref = _assembly_loops(x, y, e, cb, 0.9)
    np.testing.assert_allclose(r, r_ref, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(p, p_ref, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(r, r.T)
    assert np.all(np.linalg.eigvalsh(r) >= -1e-12)


def test_assembly_wide_kernel_limit():
    rng = make_rng(5)
    x = rng.normal(size=(3, 20))
    y = rng.normal(size=20)
    cb = Codebook.pinned(0.0, 20)
    sigma = 1e6
    r, p = assemble_qmee_normal_system(x, y, y, cb, sigma)
    scale = 20 * kernel_peak(sigma)
    np.testing.assert_allclose(r / scale, x @ x.T, rtol=1e-9)
    np.testing.assert_allclose(p / scale, x @ y, rtol=1e-9)


def test_assembly_dimension_mismatch():
    cb = Codebook.pinned(0.0, 4)
    with pytest.raises(ValueError):
        assemble_qmee_normal_system(np.ones((2, 4)), np.ones(3), np.ones(3), cb, 1.0)
    with pytest.raises(ValueError):
        assemble_qmee_normal_system(np.ones((2, 4)), np.ones(4), np.ones(5), cb, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.floats(0, 1), st.floats(0.2, 5), st.integers(0, 2**31))
def test_lambda_entries_respect_kernel_bound(n, eps, sigma, seed):
    e = make_rng(seed).normal(scale=3, size=n)
    cb = quantize_stream(e, eps).codebook
    for c, m in zip(cb.words, cb.counts):
        lam = m * gaussian_kernel(e - c, sigma)
        assert np.all(lam <= m / (math.sqrt(2 * math.pi) * sigma) * (1 + 1e-15))


@pytest.mark.parametrize("solver,eps", [
    (solve_fixed_point_qmee, 0.3), (solve_fixed_point_mee, 0.0), (solve_fixed_point_mcc, 0.0)])
def test_noise_free_data_recovers_target(solver, eps):
    ds = gen_linear_regression(200, CLEAN, seed=1)
    model, trace = solver(ds.inputs, ds.targets, FixedPointConfig(sigma=1.5, epsilon=eps))
    assert trace.converged
    assert trace.iterations <= 12
    np.testing.assert_allclose(model.omega, ds.true_omega, atol=1e-8)


def test_noise_free_mcc_converges_in_three_iterations():
    ds = gen_linear_regression(200, CLEAN, seed=1)
    _, trace = solve_fixed_point_mcc(ds.inputs, ds.targets, FixedPointConfig(sigma=10.0))
    assert trace.converged and trace.iterations <= 3


def test_trace_bookkeeping():
    ds = gen_linear_regression(100, MixtureNoiseSpec.case(1), seed=2)
    _, trace = solve_fixed_point_qmee(ds.inputs, ds.targets,
                                      FixedPointConfig(sigma=1.5, epsilon=0.3, max_iter=5))
    assert trace.iterations <= 5
    assert len(trace.weights) == trace.iterations + 1
    assert len(trace.costs) == trace.iterations + 1
    np.testing.assert_array_equal(trace.weights[0], [0.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_fixed_point_consistency(seed):
    ds = gen_linear_regression(200, MixtureNoiseSpec.case(1), seed=seed)
    cfg = FixedPointConfig(sigma=1.5, epsilon=0.3)
    model, trace = solve_fixed_point_qmee(ds.inputs, ds.targets, cfg)
    assert trace.converged
    e = ds.targets - model.predict(ds.inputs)
    cb = quantize_stream(e, 0.3).codebook
    r, p = assemble_qmee_normal_system(ds.inputs, ds.targets, e, cb, 1.5)
    assert np.linalg.norm(p - r @ model.omega) <= 10 * cfg.tol * np.linalg.norm(p)
    grad = qmee_gradient_linear(e, ds.inputs, ds.targets, cb, 1.5)
    assert np.max(np.abs(grad)) < 1e-8


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_mee_is_qmee_at_zero_threshold(case):
    ds = gen_linear_regression(120, MixtureNoiseSpec.case(case), seed=case)
    a, ta = solve_fixed_point_mee(ds.inputs, ds.targets, FixedPointConfig(sigma=1.1, epsilon=0.7))
    b, tb = solve_fixed_point_qmee(ds.inputs, ds.targets, FixedPointConfig(sigma=1.1, epsilon=0.0))
    assert a.omega.tobytes() == b.omega.tobytes()
    assert np.array(ta.weights).tobytes() == np.array(tb.weights).tobytes()
    assert ta.costs == tb.costs


def test_mcc_is_pinned_codebook():
    ds = gen_linear_regression(150, MixtureNoiseSpec.case(1), seed=3)
    cfg = FixedPointConfig(sigma=10.0)
    a, ta = solve_fixed_point_mcc(ds.inputs, ds.targets, cfg)
    b, tb = solve_fixed_point(ds.inputs, ds.targets, cfg,
                              lambda e: Codebook(np.zeros(1), np.array([e.size])))
    assert a.omega.tobytes() == b.omega.tobytes()
    assert ta.costs == tb.costs
    assert set(ta.codebook_sizes) == {1}


def test_shift_with_bias_column():
    ds = gen_linear_regression(200, MixtureNoiseSpec.case(1), seed=8)
    x = np.vstack([ds.inputs, np.ones(ds.n_samples)])
    target = np.array([2.0, 1.0, 0.0])
    b = 3.5
    shift = np.array([0.0, 0.0, b])
    cfg = FixedPointConfig(sigma=1.5, epsilon=0.3, omega0=np.array([0.5, 0.5, 0.0]))
    m0, _ = solve_fixed_point_qmee(x, ds.targets, cfg)
    cfg_b = FixedPointConfig(sigma=1.5, epsilon=0.3, omega0=cfg.omega0 + shift)
    m1, _ = solve_fixed_point_qmee(x, ds.targets + b, cfg_b)
    assert rmse_weights(m1, target + shift) == pytest.approx(rmse_weights(m0, target), abs=1e-9)


def test_cost_trend_is_upward():
    # the iteration is not an ascent method; the online codebook changes
    # between iterates, so check the overall trend and size of setbacks
    good = 0
    trials = 50
    for seed in range(trials):
        ds = gen_linear_regression(200, MixtureNoiseSpec.case(1), seed=100 + seed)
        _, tr = solve_fixed_point_qmee(ds.inputs, ds.targets, FixedPointConfig(sigma=1.5, epsilon=0.3))
        c = np.asarray(tr.costs)
        gain = c[-1] - c[0]
        worst = max(0.0, float(-np.diff(c).min()))
        good += gain > 0 and worst <= 0.05 * gain
    assert good >= 0.9 * trials


def test_singular_iteration_reports_index():
    x = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(SingularSystemError) as err:
        solve_fixed_point_qmee(x, [1.0, 2.0, 3.0], FixedPointConfig(sigma=1.0))
    assert err.value.iteration == 1
    model, _ = solve_fixed_point_qmee(x, [1.0, 2.0, 3.0], FixedPointConfig(sigma=1.0, ridge=1e-6))
    assert np.all(np.isfinite(model.omega))


def test_config_validation():
    for bad in (dict(sigma=0.0), dict(sigma=1.0, max_iter=0), dict(sigma=1.0, tol=0.0),
                dict(sigma=1.0, epsilon=-1.0), dict(sigma=1.0, ridge=-1.0)):
        with pytest.raises(ValueError):
            FixedPointConfig(**bad)
