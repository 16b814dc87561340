import math

import numpy as np
import pytest

from qmee.criteria import kernel_weights
from qmee.datagen import make_rng, minmax_normalize
from qmee.elm import (ElmModel, ElmTrainConfig, debias_shift_invariant, elm_predict,
                      elm_qmee_objective, fit_elm, grid_search_cv, hidden_map,
                      init_hidden_layer, kfold_indices, relm_lambda_to_qmee, relm_objective,
                      solve_elm_pinv, solve_elm_qmee, solve_relm)
from qmee.quantizer import quantize_stream


def _sinc_problem(n, seed, shift=0.0):
    rng = make_rng(seed)
    x = rng.uniform(-5, 5, size=(n, 1))
    t = np.sinc(x[:, 0] / math.pi) + shift
    t = t + np.where(rng.random(n) < 0.1, rng.normal(0, 3, n), rng.normal(0, 0.05, n))
    return x, t


def _random_h(seed, n=60, lh=12):
    rng = make_rng(seed)
    w, b = init_hidden_layer(3, lh, rng)
    model = ElmModel(w, b)
    x = rng.uniform(0, 1, size=(n, 3))
    return hidden_map(model, x), rng.normal(size=n)


def test_init_is_seeded_and_uniform():
    a = init_hidden_layer(4, 7, 3)
    b = init_hidden_layer(4, 7, 3)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    w, bias = init_hidden_layer(1, 1, 0)
    assert w.shape == (1, 1) and bias.shape == (1,)
    assert -1 <= w[0, 0] <= 1 and -1 <= bias[0] <= 1
    big, _ = init_hidden_layer(1000, 100, 1)
    assert abs(big.mean()) < 0.01
    assert big.min() >= -1 and big.max() <= 1


def test_hidden_map_examples():
    zero = ElmModel(np.zeros((3, 2)), np.zeros(3))
    np.testing.assert_array_equal(hidden_map(zero, np.ones((4, 2))), 0.5)
    m = ElmModel(np.array([[0.5, -1.0], [2.0, 0.25]]), np.array([0.1, -0.3]))
    x = np.array([[0.7, 0.2]])
    h = hidden_map(m, x)
    for j in range(2):
        z = m.hidden_weights[j] @ x[0] + m.hidden_biases[j]
        assert h[0, j] == pytest.approx(1 / (1 + math.exp(-z)), rel=1e-15)
    with pytest.raises(ValueError):
        hidden_map(m, np.ones((2, 3)))


def test_hidden_entries_strictly_inside_unit_interval():
    w, b = init_hidden_layer(5, 40, 2)
    h = hidden_map(ElmModel(w, b), make_rng(3).normal(scale=5, size=(200, 5)))
    assert np.all(h > 0) and np.all(h < 1)
    # stable on extreme inputs
    h = hidden_map(ElmModel([[1.0]], [0.0]), np.array([[-800.0], [800.0]]))
    assert np.all(np.isfinite(h))


def test_model_validation():
    with pytest.raises(ValueError):
        ElmModel(np.zeros((2, 1)), np.zeros(3))
    with pytest.raises(ValueError):
        ElmTrainConfig(n_hidden=0)
    with pytest.raises(ValueError):
        ElmTrainConfig(lam=-1)


def test_relm_examples():
    h, t = _random_h(0)
    assert np.max(np.abs(solve_relm(h, t, 1e12))) < 1e-9
    hs = make_rng(1).uniform(size=(6, 6)) + 3 * np.eye(6)
    ts = make_rng(2).normal(size=6)
    np.testing.assert_allclose(solve_relm(hs, ts, 0.0), np.linalg.solve(hs, ts), rtol=1e-10)
    with pytest.raises(np.linalg.LinAlgError):
        solve_relm(np.ones((5, 3)), np.ones(5), 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_relm_gradient_vanishes(seed):
    h, t = _random_h(seed)
    lam = 1e-3
    beta = solve_relm(h, t, lam)
    grad = 2 * h.T @ (h @ beta - t) + 2 * lam * beta
    assert np.max(np.abs(grad)) <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_relm_single_component_perturbations(seed):
    h, t = _random_h(seed)
    beta = solve_relm(h, t, 0.1)
    base = relm_objective(beta, h, t, 0.1)
    for j in range(beta.size):
        for step in (1e-4, -1e-4):
            b2 = beta.copy()
            b2[j] += step
            assert relm_objective(b2, h, t, 0.1) >= base


def test_pinv_matches_lstsq():
    h, t = _random_h(4)
    np.testing.assert_allclose(solve_elm_pinv(h, t), np.linalg.lstsq(h, t, rcond=None)[0])


def test_lambda_conversion():
    assert relm_lambda_to_qmee(1e-3, 100, 0.5) == pytest.approx(2e-3 * 1e4 * 0.25)


@pytest.mark.parametrize("seed", range(3))
def test_qmee_at_zero_threshold_is_mee(seed):
    x, t = _sinc_problem(150, seed)
    cfg = ElmTrainConfig(n_hidden=20, lam=1e-3, sigma=0.5, epsilon=0.0, seed=seed)
    w, b = init_hidden_layer(1, 20, seed)
    h = hidden_map(ElmModel(w, b), x)
    b_q, tr_q = solve_elm_qmee(h, t, cfg)
    b_m, tr_m = solve_elm_qmee(h, t, cfg, codebook_for=lambda e: quantize_stream(e, 0.0).codebook)
    assert np.array(tr_q.weights).tobytes() == np.array(tr_m.weights).tobytes()
    mq, _ = fit_elm(x, t, ElmTrainConfig(n_hidden=20, lam=1e-3, sigma=0.5, epsilon=0.0, seed=seed), "qmee")
    mm, _ = fit_elm(x, t, ElmTrainConfig(n_hidden=20, lam=1e-3, sigma=0.5, epsilon=0.4, seed=seed), "mee")
    assert mq.beta.tobytes() == mm.beta.tobytes()


def test_zero_targets_stay_at_zero():
    h, _ = _random_h(5)
    beta, trace = solve_elm_qmee(h, np.zeros(h.shape[0]), ElmTrainConfig(lam=1e-3, sigma=1.0))
    np.testing.assert_array_equal(beta, 0.0)
    assert trace.iterations == 1 and trace.converged


@pytest.mark.parametrize("seed", range(6))
def test_fixed_point_residual_and_gradient(seed):
    # The mean-error direction is flat for entropy criteria and only lam'
    # makes it contract. The 10 tol |B| residual bound needs a quickly
    # contracting iteration, hence the large lam' and wide kernel.
    rng = make_rng(seed)
    x = rng.uniform(-1, 1, size=(100, 6))
    t = 20 * (np.sin(x @ rng.normal(size=6)) + np.where(
        rng.random(100) < 0.1, rng.normal(0, 3, 100), rng.normal(0, 0.05, 100)))
    lam_p = 5000.0
    cfg = ElmTrainConfig(n_hidden=8, lam=lam_p, sigma=5.0, epsilon=1.0, seed=seed, max_iter=200)
    w, b = init_hidden_layer(6, 8, seed)
    h = hidden_map(ElmModel(w, b), x)
    beta, trace = solve_elm_qmee(h, t, cfg)
    assert trace.converged
    e = t - h @ beta
    cb = quantize_stream(e, cfg.epsilon).codebook
    n, sigma = t.size, cfg.sigma
    kw, ks = kernel_weights(e, cb, sigma)
    a = (h.T * kw) @ h
    bb = h.T @ (kw * t - ks)
    assert np.linalg.norm(bb - (a + lam_p * np.eye(8)) @ beta) <= 10 * cfg.tol * np.linalg.norm(bb)
    # analytic gradient of the regularized objective, codebook frozen
    lam = lam_p / (2 * n * n * sigma * sigma)
    grad = -h.T @ (kw * e - ks) / (n * n * sigma * sigma) + 2 * lam * beta
    assert np.max(np.abs(grad)) <= 1e-6
    # and it is the derivative of elm_qmee_objective
    step = 1e-6
    fd = np.array([(elm_qmee_objective(beta + step * u, h, t, cb, sigma, lam_p)
                    - elm_qmee_objective(beta - step * u, h, t, cb, sigma, lam_p)) / (2 * step)
                   for u in np.eye(8)])
    assert np.max(np.abs(fd - grad)) < 1e-7


def test_predict_examples():
    m = ElmModel(np.array([[0.3, -0.2]]), np.array([0.1]))
    x = make_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(elm_predict(m, x), 0.0)
    m.beta = np.array([1.7])
    direct = 1.7 / (1 + np.exp(-(x @ np.array([0.3, -0.2]) + 0.1)))
    np.testing.assert_allclose(elm_predict(m, x), direct, rtol=1e-14)
    np.testing.assert_array_equal(elm_predict(m, x), hidden_map(m, x) @ m.beta)


def test_debias_examples():
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(debias_shift_invariant([1.0, -1.0, 0.0], y), y)
    np.testing.assert_array_equal(debias_shift_invariant([0.25] * 4, y), y + 0.25)


def test_entropy_fit_debiases_training_errors():
    x, t = _sinc_problem(200, 7, shift=4.0)
    model, _ = fit_elm(x, t, ElmTrainConfig(n_hidden=20, lam=1e-2, sigma=0.5, epsilon=0.05), "qmee")
    resid = t - elm_predict(model, x)
    assert abs(resid.mean()) < 1e-12
    raw = t - hidden_map(model, x) @ model.beta
    adjusted = debias_shift_invariant(raw, hidden_map(model, x) @ model.beta)
    assert abs(np.mean(t - adjusted)) < 1e-12


def test_fit_elm_rejects_unknown_method():
    x, t = _sinc_problem(30, 0)
    with pytest.raises(ValueError):
        fit_elm(x, t, ElmTrainConfig(n_hidden=3), "svm")


def test_train_map_applies_to_test_data():
    rng = make_rng(9)
    tr = rng.uniform(3, 8, size=(40, 2))
    te = rng.uniform(3, 8, size=(10, 2))
    tr_s, te_s, scaler = minmax_normalize(tr, te)
    np.testing.assert_allclose(te_s, (te - tr.min(0)) / (tr.max(0) - tr.min(0)), rtol=1e-14)
    np.testing.assert_allclose(scaler.inverse(te_s), te, rtol=1e-14)


def test_kfold_and_grid_search():
    folds = kfold_indices(23, 5, 0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    with pytest.raises(ValueError):
        kfold_indices(3, 5, 0)
    x, t = _sinc_problem(80, 1)
    best, results = grid_search_cv(x, t, {"n_hidden": [5, 15], "lam": [1e-3, 1.0]}, method="relm",
                                   folds=3)
    assert len(results) == 4
    assert min(s for _, s in results) == dict(
        ((tuple(sorted(p.items())), s) for p, s in results))[
            tuple(sorted({"n_hidden": best.n_hidden, "lam": best.lam}.items()))]
