"""Linear regression under MSE, MCC, MEE and QMEE.

MSE has a closed form. The entropy criteria are solved by the fixed-point
iteration ``w_k = R(w_{k-1})^{-1} P(w_{k-1})``: at every step the errors are
recomputed, a fresh codebook is built from them, and the weighted normal
equations are re-assembled. MEE is the special case ``epsilon = 0`` and MCC
the special case of a codebook pinned to ``{0}``.

Inputs follow the column convention ``X = [x_1, ..., x_N]`` of shape (d, N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .criteria import as_errors, kernel_weights
from .quantizer import Codebook, quantize_stream

__all__ = [
    "LinearModel",
    "FixedPointConfig",
    "TrainTrace",
    "SingularSystemError",
    "solve_mse",
    "assemble_qmee_normal_system",
    "solve_fixed_point_qmee",
    "solve_fixed_point_mee",
    "solve_fixed_point_mcc",
    "solve_fixed_point",
    "rmse_weights",
]


class SingularSystemError(np.linalg.LinAlgError):
    """A normal-equation matrix could not be solved.

    ``iteration`` is the fixed-point step at which it happened (0 for the
    closed-form solvers).
    """

    def __init__(self, message, iteration: int = 0, rank: int | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.rank = rank


@dataclass
class LinearModel:
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.omega)):
            raise ValueError("model weights must be finite")

    @property
    def dim(self) -> int:
        return self.omega.size

    def predict(self, inputs) -> np.ndarray:
        return self.omega @ np.asarray(inputs, dtype=np.float64)


@dataclass
class FixedPointConfig:
    """Settings for the fixed-point solvers.

    ``ridge`` adds ``ridge * I`` to R before each solve (0 reproduces the
    plain iteration). ``max_iter`` is the iteration budget K.
    """

    sigma: float
    epsilon: float = 0.0
    max_iter: int = 100
    tol: float = 1e-8
    omega0: np.ndarray | None = None
    ridge: float = 0.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("convergence tolerance must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass
class TrainTrace:
    """Iteration history of an iterative trainer.

    ``weights[k]`` and ``costs[k]`` describe the k-th iterate, starting with
    the initial point, so both hold ``iterations + 1`` entries. ``costs[k]``
    is the criterion value at ``weights[k]`` with the codebook built from
    that iterate's errors.
    """

    weights: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    codebook_sizes: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    diverged: bool = False

    @property
    def final(self):
        return self.weights[-1]


def _as_xy(inputs, targets):
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != y.size:
        raise ValueError(f"inputs of shape {x.shape} do not match {y.size} targets")
    return x, y


def _solve_spd(a: np.ndarray, b: np.ndarray, iteration: int = 0) -> np.ndarray:
    try:
        return scipy.linalg.solve(a, b, assume_a="pos", check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        pass
    # semidefinite but numerically singular, or not quite symmetric
    rank = int(np.linalg.matrix_rank(a))
    if rank < a.shape[0]:
        raise SingularSystemError(
            f"normal equations are rank deficient (rank {rank} < {a.shape[0]}) "
            f"at iteration {iteration}", iteration=iteration, rank=rank)
    return np.linalg.solve(a, b)


def solve_mse(inputs, targets) -> LinearModel:
    """Least-squares weights ``(X X^T)^{-1} X y``."""
    x, y = _as_xy(inputs, targets)
    d, n = x.shape
    if n < d:
        raise SingularSystemError(f"{n} samples cannot determine {d} weights", rank=n)
    return LinearModel(_solve_spd(x @ x.T, x @ y))


def assemble_qmee_normal_system(inputs, targets, errors, codebook: Codebook, sigma: float):
    """Weighted normal equations at the current errors.

    ``R = sum_m X Lambda_m X^T`` and ``P = sum_m X Lambda_m (y - c_m)`` with
    ``Lambda_m = diag(M_m G(e_i - c_m))``.

    Returns
    -------
    R : ndarray of shape (d, d)
    P : ndarray of shape (d,)
    """
    x, y = _as_xy(inputs, targets)
    e = as_errors(errors)
    if e.size != y.size:
        raise ValueError(f"{e.size} errors for {y.size} targets")
    w, s = kernel_weights(e, codebook, sigma)
    r = (x * w) @ x.T
    p = x @ (w * y - s)
    return 0.5 * (r + r.T), p


def solve_fixed_point(inputs, targets, config: FixedPointConfig,
                      codebook_for: Callable[[np.ndarray], Codebook]):
    """Generic fixed-point loop; ``codebook_for`` maps errors to a codebook."""
    x, y = _as_xy(inputs, targets)
    d, n = x.shape
    if n < d and config.ridge == 0:
        raise SingularSystemError(f"{n} samples cannot determine {d} weights", rank=n)
    omega = np.zeros(d) if config.omega0 is None else np.array(config.omega0, dtype=np.float64)
    if omega.shape != (d,):
        raise ValueError(f"initial weights have shape {omega.shape}, expected ({d},)")
    jitter = config.ridge * np.eye(d)
    norm = 1.0 / (n * n)
    trace = TrainTrace(weights=[omega.copy()])

    def linearize(omega):
        e = y - omega @ x
        cb = codebook_for(e)
        w, s = kernel_weights(e, cb, config.sigma)
        trace.costs.append(norm * w.sum())
        trace.codebook_sizes.append(cb.size)
        r = (x * w) @ x.T
        return 0.5 * (r + r.T), x @ (w * y - s)

    r, p = linearize(omega)
    for k in range(1, config.max_iter + 1):
        new = _solve_spd(r + jitter, p, iteration=k)
        trace.iterations = k
        if not np.all(np.isfinite(new)):
            trace.diverged = True
            break
        step = float(np.linalg.norm(new - omega))
        omega = new
        trace.weights.append(omega.copy())
        r, p = linearize(omega)
        if step < config.tol:
            trace.converged = True
            break
    return LinearModel(omega), trace


def solve_fixed_point_qmee(inputs, targets, config: FixedPointConfig):
    """QMEE fixed-point solver; returns ``(LinearModel, TrainTrace)``."""
    eps = config.epsilon
    return solve_fixed_point(inputs, targets, config,
                             lambda e: quantize_stream(e, eps).codebook)


def solve_fixed_point_mee(inputs, targets, config: FixedPointConfig):
    """MEE fixed-point solver: the QMEE solver with ``epsilon = 0``.

    ``config.epsilon`` is ignored.
    """
    return solve_fixed_point(inputs, targets, config,
                             lambda e: quantize_stream(e, 0.0).codebook)


def solve_fixed_point_mcc(inputs, targets, config: FixedPointConfig):
    """MCC fixed-point solver: the QMEE system with the codebook pinned to {0}."""
    return solve_fixed_point(inputs, targets, config,
                             lambda e: Codebook.pinned(0.0, e.size))


def rmse_weights(estimated, target) -> float:
    """``sqrt(||w - w*||^2 / d)``; for d = 2 this is the usual weight RMSE."""
    a = estimated.omega if isinstance(estimated, LinearModel) else np.asarray(estimated, float)
    b = target.omega if isinstance(target, LinearModel) else np.asarray(target, float)
    a, b = a.reshape(-1), b.reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))
