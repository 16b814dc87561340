"""Extreme learning machine with random hidden layer.

Output weights are trained either by regularized least squares (RELM) or by
the QMEE fixed-point iteration ``beta_k = [A(beta_{k-1}) + lam' I]^{-1} B(beta_{k-1})``.
Inputs here are row-major, shape (N, d), as in most ML code.

The QMEE regularizer ``lam'`` is taken as given. It relates to the penalty
``lam ||beta||^2`` on the negated quantized potential by
``lam' = 2 lam N^2 sigma^2``; see :func:`relm_lambda_to_qmee`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace

import numpy as np

from .criteria import as_errors, qmee_potential
from .datagen import make_rng
from .quantizer import Codebook, quantize_stream
from .solvers import FixedPointConfig, _solve_spd, solve_fixed_point

__all__ = [
    "Activation",
    "ElmModel",
    "ElmTrainConfig",
    "init_hidden_layer",
    "hidden_map",
    "solve_relm",
    "solve_elm_pinv",
    "solve_elm_qmee",
    "elm_predict",
    "debias_shift_invariant",
    "relm_objective",
    "elm_qmee_objective",
    "relm_lambda_to_qmee",
    "fit_elm",
    "grid_search_cv",
    "kfold_indices",
]


class Activation(str, enum.Enum):
    LOGISTIC = "logistic"


def _logistic(z):
    # numerically stable on both tails
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_ACTIVATIONS = {Activation.LOGISTIC: _logistic}


@dataclass
class ElmModel:
    hidden_weights: np.ndarray   # (L, d)
    hidden_biases: np.ndarray    # (L,)
    beta: np.ndarray | None = None
    activation: Activation = Activation.LOGISTIC
    output_bias: float = 0.0     # set by the shift-invariant debiasing step

    def __post_init__(self):
        self.hidden_weights = np.atleast_2d(np.asarray(self.hidden_weights, dtype=np.float64))
        self.hidden_biases = np.asarray(self.hidden_biases, dtype=np.float64).reshape(-1)
        self.activation = Activation(self.activation)
        if self.hidden_weights.shape[0] != self.hidden_biases.size or self.hidden_biases.size < 1:
            raise ValueError("need one bias per hidden node and at least one node")
        if self.beta is None:
            self.beta = np.zeros(self.n_hidden)

    @property
    def n_hidden(self) -> int:
        return self.hidden_biases.size

    @property
    def n_inputs(self) -> int:
        return self.hidden_weights.shape[1]


@dataclass
class ElmTrainConfig:
    """Training settings.

    ``lam`` is the ridge factor for RELM and ``lam'`` for ELM-QMEE.
    """

    n_hidden: int = 50
    lam: float = 0.0
    max_iter: int = 100
    sigma: float = 1.0
    epsilon: float = 0.0
    seed: int = 0
    tol: float = 1e-8

    def __post_init__(self):
        if self.n_hidden < 1:
            raise ValueError("n_hidden must be at least 1")
        if self.lam < 0:
            raise ValueError("regularization must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")


def init_hidden_layer(d: int, n_hidden: int, seed):
    """Hidden weights (L, d) and biases (L,), i.i.d. uniform on [-1, 1]."""
    if d < 1 or n_hidden < 1:
        raise ValueError("d and n_hidden must be positive")
    rng = make_rng(seed)
    w = rng.uniform(-1.0, 1.0, size=(n_hidden, d))
    b = rng.uniform(-1.0, 1.0, size=n_hidden)
    return w, b


def hidden_map(model: ElmModel, inputs) -> np.ndarray:
    """Hidden-layer output matrix H of shape (N, L)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, model.n_inputs)
    if x.shape[1] != model.n_inputs:
        raise ValueError(f"inputs have {x.shape[1]} features, model expects {model.n_inputs}")
    return _ACTIVATIONS[model.activation](x @ model.hidden_weights.T + model.hidden_biases)


def _check_ht(h, targets):
    h = np.asarray(h, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if h.ndim != 2 or h.shape[0] != t.size:
        raise ValueError(f"H of shape {h.shape} does not match {t.size} targets")
    return h, t


def solve_relm(h, targets, lam: float) -> np.ndarray:
    """Ridge output weights ``(H^T H + lam I)^{-1} H^T T``."""
    h, t = _check_ht(h, targets)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    a = h.T @ h + lam * np.eye(h.shape[1])
    return _solve_spd(a, h.T @ t)


def solve_elm_pinv(h, targets) -> np.ndarray:
    """Minimum-norm least-squares output weights (the unregularized ELM)."""
    h, t = _check_ht(h, targets)
    return np.linalg.lstsq(h, t, rcond=None)[0]


def relm_objective(beta, h, targets, lam: float) -> float:
    h, t = _check_ht(h, targets)
    r = h @ beta - t
    return float(r @ r + lam * beta @ beta)


def relm_lambda_to_qmee(lam: float, n: int, sigma: float) -> float:
    """``lam' = 2 lam N^2 sigma^2``."""
    return 2.0 * lam * n * n * sigma * sigma


def elm_qmee_objective(beta, h, targets, codebook: Codebook, sigma: float, lam_prime: float) -> float:
    """``-I_Q(e) + lam ||beta||^2`` with ``lam = lam' / (2 N^2 sigma^2)``.

    The codebook is taken as given (frozen).
    """
    h, t = _check_ht(h, targets)
    n = t.size
    lam = lam_prime / (2.0 * n * n * sigma * sigma)
    e = t - h @ beta
    return -qmee_potential(e, codebook, sigma) + lam * float(beta @ beta)


def solve_elm_qmee(h, targets, config: ElmTrainConfig, codebook_for=None):
    """ELM-QMEE fixed-point training of the output weights from ``beta_0 = 0``.

    ``codebook_for`` overrides how the codebook is built from the errors
    (default: online quantization with ``config.epsilon``).

    Returns
    -------
    beta : ndarray of shape (L,)
    trace : TrainTrace
    """
    h, t = _check_ht(h, targets)
    if codebook_for is None:
        eps = config.epsilon
        codebook_for = lambda e: quantize_stream(e, eps).codebook  # noqa: E731
    fp = FixedPointConfig(sigma=config.sigma, epsilon=config.epsilon, max_iter=config.max_iter,
                          tol=config.tol, ridge=config.lam)
    model, trace = solve_fixed_point(h.T, t, fp, codebook_for)
    return model.omega, trace


def elm_predict(model: ElmModel, inputs) -> np.ndarray:
    """``H beta`` plus the model's debiasing offset."""
    return hidden_map(model, inputs) @ model.beta + model.output_bias


def debias_shift_invariant(train_errors, test_outputs) -> np.ndarray:
    """Shift predictions by the mean training error.

    Entropy criteria cannot see the error mean, so after training the
    predictions are offset until the training errors average to zero.
    """
    e = as_errors(train_errors)
    return np.asarray(test_outputs, dtype=np.float64) + e.mean()


_METHODS = ("elm", "relm", "mee", "qmee")


def fit_elm(inputs, targets, config: ElmTrainConfig, method: str = "qmee"):
    """Build and train an ELM on (N, d) inputs.

    ``method`` is one of ``elm`` (pseudo-inverse), ``relm`` (ridge with
    ``config.lam``), ``mee`` or ``qmee`` (fixed point with ``config.lam`` as
    ``lam'``). Entropy-trained models get their output offset set so the
    training errors have zero mean.

    Returns
    -------
    model : ElmModel
    trace : TrainTrace or None
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    w, b = init_hidden_layer(x.shape[1], config.n_hidden, config.seed)
    model = ElmModel(w, b)
    h = hidden_map(model, x)
    trace = None
    if method == "elm":
        model.beta = solve_elm_pinv(h, targets)
    elif method == "relm":
        model.beta = solve_relm(h, targets, config.lam)
    elif method in ("mee", "qmee"):
        cfg = config if method == "qmee" else replace(config, epsilon=0.0)
        model.beta, trace = solve_elm_qmee(h, targets, cfg)
        model.output_bias = float(np.mean(np.asarray(targets, dtype=np.float64) - h @ model.beta))
    else:
        raise ValueError(f"unknown ELM method {method!r}; expected one of {_METHODS}")
    return model, trace


def kfold_indices(n: int, folds: int, seed) -> list[np.ndarray]:
    """Shuffled, nearly equal index folds."""
    if not 2 <= folds <= n:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = make_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def grid_search_cv(inputs, targets, grid: dict, method: str = "qmee", folds: int = 5,
                   base: ElmTrainConfig | None = None, seed: int = 0):
    """Exhaustive k-fold search over ``ElmTrainConfig`` fields.

    ``grid`` maps field names (e.g. ``n_hidden``, ``lam``, ``sigma``,
    ``epsilon``) to candidate lists. Scores are mean validation RMSE.

    Returns
    -------
    best : ElmTrainConfig
    results : list of (dict, float)
        Every grid point with its score, in grid order.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    base = base or ElmTrainConfig()
    parts = kfold_indices(t.size, folds, seed)
    keys = list(grid)
    results = []
    best, best_score = None, np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        cfg = replace(base, **params)
        scores = []
        for i, val in enumerate(parts):
            tr = np.concatenate([p for j, p in enumerate(parts) if j != i])
            model, _ = fit_elm(x[tr], t[tr], cfg, method)
            resid = t[val] - elm_predict(model, x[val])
            scores.append(np.sqrt(np.mean(resid**2)))
        score = float(np.mean(scores))
        results.append((params, score))
        if score < best_score:
            best, best_score = cfg, score
    return best, results
