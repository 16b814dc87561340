"""Echo state network with a fixed sparse reservoir and a linear readout.

The reservoir follows ``x(k+1) = tanh(W_x x(k) + W_in u(k+1))`` (no output
feedback) and the readout is ``y(k) = W_out phi(k)`` with
``phi(k) = [u(k); x(k)]``. The readout is trained by least squares (optionally
ridge) or by RMSProp ascent on the quantized information potential.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .criteria import _kernel_sums, gaussian_kernel, kernel_weights
from .datagen import make_rng
from .quantizer import Codebook, _online_vq, quantize_stream
from .solvers import SingularSystemError, TrainTrace, _solve_spd

__all__ = [
    "EsnModel",
    "StateCollection",
    "RmsPropConfig",
    "RmsProp",
    "DivergenceError",
    "build_reservoir",
    "reservoir_diagnostics",
    "run_reservoir",
    "solve_esn_ls",
    "esn_predict",
    "qmee_esn_objective",
    "qmee_esn_gradient",
    "train_esn_qmee",
    "nrmse",
    "write_trace_csv",
]


@dataclass
class EsnModel:
    """Reservoir matrices plus (once trained) the readout.

    ``w_out`` has shape (Q, P + L); columns multiply ``[u; x]``.
    """

    w_in: np.ndarray
    w_x: np.ndarray
    w_out: np.ndarray | None = None
    spectral_radius: float = 0.95
    sparsity: float = 0.01
    washout: int = 50

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_units(self) -> int:
        return self.w_x.shape[0]

    @classmethod
    def create(cls, n_inputs: int, n_units: int, spectral_radius: float = 0.95,
               sparsity: float = 0.01, seed=0, washout: int = 50) -> "EsnModel":
        w_in, w_x = build_reservoir(n_inputs, n_units, spectral_radius, sparsity, seed)
        return cls(w_in, w_x, None, spectral_radius, sparsity, washout)


@dataclass
class StateCollection:
    """Extended states, one column per time step.

    ``phi`` has shape (P + L, T). Columns before ``washout`` are kept for
    inspection but excluded from training.
    """

    phi: np.ndarray
    washout: int = 0

    @property
    def usable(self) -> np.ndarray:
        return self.phi[:, self.washout:]

    @property
    def n_steps(self) -> int:
        return self.phi.shape[1]


def build_reservoir(n_inputs: int, n_units: int, spectral_radius: float = 0.95,
                    sparsity: float = 0.01, seed=0, max_attempts: int = 10):
    """Random input matrix and sparse reservoir matrix.

    ``W_in`` is dense uniform on [-1, 1]. ``W_x`` has exactly
    ``round(sparsity * L^2)`` (at least one) nonzero entries at uniformly chosen
    positions, uniform on [-1, 1], rescaled to the requested spectral radius.
    A draw whose spectral radius is zero (nilpotent) is redrawn.

    Returns
    -------
    w_in : ndarray of shape (L, P)
    w_x : ndarray of shape (L, L)
    """
    if n_units < 1 or n_inputs < 1:
        raise ValueError("n_inputs and n_units must be positive")
    if not 0.0 < sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    if not spectral_radius > 0:
        raise ValueError("spectral radius must be positive")
    rng = make_rng(seed)
    w_in = rng.uniform(-1.0, 1.0, size=(n_units, n_inputs))
    nnz = max(1, int(round(sparsity * n_units * n_units)))
    for _ in range(max_attempts):
        w_x = np.zeros(n_units * n_units)
        pos = rng.choice(n_units * n_units, size=nnz, replace=False)
        w_x[pos] = rng.uniform(-1.0, 1.0, size=nnz)
        w_x = w_x.reshape(n_units, n_units)
        radius = float(np.max(np.abs(np.linalg.eigvals(w_x))))
        if radius > 1e-12:
            return w_in, w_x * (spectral_radius / radius)
    raise RuntimeError(
        f"reservoir draw had zero spectral radius {max_attempts} times; "
        "increase sparsity or the number of units")


def reservoir_diagnostics(w_x) -> dict:
    """Spectral radius and largest singular value of the reservoir matrix.

    The echo state property is guaranteed by ``sigma_max < 1``, which is
    stricter than a spectral radius below one; both are reported.
    """
    w_x = np.asarray(w_x, dtype=np.float64)
    return {
        "spectral_radius": float(np.max(np.abs(np.linalg.eigvals(w_x)))),
        "sigma_max": float(np.linalg.norm(w_x, 2)),
    }


def run_reservoir(model: EsnModel, inputs, x0=None, washout: int | None = None) -> StateCollection:
    """Drive the reservoir with ``inputs`` of shape (T, P) from state ``x0``."""
    u = np.asarray(inputs, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] != model.n_inputs:
        raise ValueError(f"inputs have dimension {u.shape[1]}, reservoir expects {model.n_inputs}")
    n_units = model.n_units
    x = np.zeros(n_units) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    drive = u @ model.w_in.T
    states = np.empty((u.shape[0], n_units))
    for k in range(u.shape[0]):
        x = np.tanh(model.w_x @ x + drive[k])
        states[k] = x
    washout = model.washout if washout is None else washout
    return StateCollection(np.vstack([u.T, states.T]), int(washout))


def _usable_targets(states: StateCollection, targets) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    elif t.shape[0] == states.n_steps and t.shape[1] != states.n_steps:
        t = t.T
    if t.shape[1] != states.n_steps:
        raise ValueError(f"{t.shape[1]} targets for {states.n_steps} reservoir steps")
    return t[:, states.washout:]


def solve_esn_ls(states: StateCollection, targets, ridge: float = 0.0,
                 pinv: bool = False) -> np.ndarray:
    """Least-squares readout over the post-washout steps.

    ``targets`` has one entry per reservoir step (shape (T,) or (Q, T));
    returns ``w_out`` of shape (Q, P + L). With ``pinv=True`` the
    minimum-norm least-squares solution is returned instead of failing when
    the state Gram matrix is singular (reservoir states driven by a smooth
    signal are often numerically rank deficient).
    """
    phi = states.usable
    t = _usable_targets(states, targets)
    dim, n = phi.shape
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if pinv and ridge == 0:
        return np.linalg.lstsq(phi.T, t.T, rcond=None)[0].T
    if ridge == 0 and n < dim:
        raise SingularSystemError(f"{n} training steps cannot determine {dim} readout weights")
    gram = phi @ phi.T + ridge * np.eye(dim)
    return _solve_spd(0.5 * (gram + gram.T), phi @ t.T).T


def esn_predict(w_out, states: StateCollection, all_steps: bool = False) -> np.ndarray:
    phi = states.phi if all_steps else states.usable
    return np.atleast_2d(w_out) @ phi


def _phi_t(phi, targets_row):
    phi = np.asarray(phi, dtype=np.float64)
    t = np.asarray(targets_row, dtype=np.float64).reshape(-1)
    if phi.ndim != 2 or phi.shape[1] != t.size:
        raise ValueError(f"states of shape {phi.shape} do not match {t.size} targets")
    return phi, t


def qmee_esn_objective(w_row, phi, targets_row, codebook: Codebook, sigma: float) -> float:
    """Quantized information potential of the readout errors (codebook frozen)."""
    phi, t = _phi_t(phi, targets_row)
    e = t - np.asarray(w_row, dtype=np.float64) @ phi
    w, _ = kernel_weights(e, codebook, sigma)
    return float(w.sum()) / (t.size * t.size)


def qmee_esn_gradient(w_row, phi, targets_row, codebook: Codebook, sigma: float) -> np.ndarray:
    """Gradient of the quantized potential w.r.t. one readout row.

    ``(1/(N^2 sigma^2)) sum_k sum_m M_m G(e_k - c_m) (e_k - c_m) phi(k)``.
    This is the ascent direction of the potential; RMSProp descends on its
    negative.

    Parameters
    ----------
    w_row : ndarray of shape (D,)
    phi : ndarray of shape (D, N)
        Extended states of the training steps (washout already removed).
    targets_row : ndarray of shape (N,)
    """
    phi, t = _phi_t(phi, targets_row)
    w_row = np.asarray(w_row, dtype=np.float64).reshape(-1)
    if w_row.size != phi.shape[0]:
        raise ValueError(f"readout row has {w_row.size} weights, states have {phi.shape[0]} rows")
    e = t - w_row @ phi
    w, s = kernel_weights(e, codebook, sigma)
    n = t.size
    return phi @ (w * e - s) / (n * n * sigma * sigma)


@dataclass
class RmsPropConfig:
    """RMSProp settings for QMEE readout training.

    ``batch`` is ``"full"`` (one update per epoch from the whole training
    segment) or ``"step"`` (one update per time step, visiting steps in a
    seeded random order; the codebook is still rebuilt once per epoch).
    """

    eta: float = 0.01
    rho: float = 0.9
    r: float = 1e-6
    epochs: int = 200
    sigma: float = 1.0
    epsilon: float = 0.0
    seed: int = 0
    batch: str = "full"

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("forgetting factor must lie in [0, 1)")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.batch not in ("full", "step"):
            raise ValueError(f"batch must be 'full' or 'step', got {self.batch!r}")


class RmsProp:
    """Elementwise RMSProp on a parameter array."""

    def __init__(self, shape, eta: float, rho: float = 0.9, r: float = 1e-6):
        self.eta = eta
        self.rho = rho
        self.r = r
        self.v = np.zeros(shape)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return ``params`` moved against ``grad`` (descent)."""
        self.v = self.rho * self.v + (1.0 - self.rho) * grad * grad
        return params - self.eta * grad / np.sqrt(self.v + self.r)


class DivergenceError(FloatingPointError):
    def __init__(self, message, trace: TrainTrace):
        super().__init__(message)
        self.trace = trace


def train_esn_qmee(states: StateCollection, targets, config: RmsPropConfig, w0=None):
    """Train the readout by RMSProp on ``J = -I_Q`` for every output row.

    Each epoch recomputes the errors, rebuilds the codebook with
    ``config.epsilon`` and takes one RMSProp step (``batch="full"``).
    ``epsilon = 0`` gives the unquantized MEE trainer.

    Returns
    -------
    w_out : ndarray of shape (Q, P + L)
    trace : TrainTrace
        ``costs`` holds the potential at the start of every epoch and once
        after the last update; ``weights`` holds the initial and final readout.

    Raises
    ------
    DivergenceError
        If the weights or the objective become non-finite.
    """
    phi = states.usable
    t = _usable_targets(states, targets)
    n_out, n = t.shape
    dim = phi.shape[0]
    w = np.zeros((n_out, dim)) if w0 is None else np.array(w0, dtype=np.float64).reshape(n_out, dim)
    opt = RmsProp(w.shape, config.eta, config.rho, config.r)
    sigma, eps = config.sigma, config.epsilon
    scale = 1.0 / (n * n * sigma * sigma)
    rng = make_rng(config.seed)
    trace = TrainTrace(weights=[w.copy()])

    def epoch_state(w):
        e = t - w @ phi
        cbs = [quantize_stream(e[q], eps).codebook for q in range(n_out)]
        return e, cbs

    full = config.batch == "full"
    for epoch in range(config.epochs):
        e = t - w @ phi
        grad = np.empty_like(w)
        cost = 0.0
        sizes = 0
        words, counts = [], []
        for q in range(n_out):
            # w stays finite between epochs, so e needs no revalidation here
            c, m, _ = _online_vq(np.ascontiguousarray(e[q]), eps)
            mf = m.astype(np.float64)
            words.append(c)
            counts.append(mf)
            sizes += c.size
            kw, ks = _kernel_sums(e[q], c, mf, sigma)
            cost += kw.sum() / (n * n)
            if full:
                kw *= e[q]
                kw -= ks
                grad[q] = phi @ kw
                grad[q] *= -scale
        trace.costs.append(cost)
        trace.codebook_sizes.append(sizes)
        if not np.isfinite(cost):
            trace.diverged = True
            raise DivergenceError(f"objective became non-finite at epoch {epoch}", trace)
        if full:
            w = opt.step(w, grad)
        else:
            for k in rng.permutation(n):
                ek = t[:, k] - w @ phi[:, k]
                g = np.empty(n_out)
                for q in range(n_out):
                    d = ek[q] - words[q]
                    g[q] = counts[q] @ (gaussian_kernel(d, sigma) * d)
                # single-step estimate of the full-batch gradient
                w = opt.step(w, -np.outer(g, phi[:, k]) / (n * sigma * sigma))
        trace.iterations = epoch + 1
        if not np.all(np.isfinite(w)):
            trace.diverged = True
            raise DivergenceError(f"readout weights became non-finite at epoch {epoch}", trace)
    e, cbs = epoch_state(w)
    trace.costs.append(sum(kernel_weights(e[q], cbs[q], sigma)[0].sum() / (n * n)
                           for q in range(n_out)))
    trace.weights.append(w.copy())
    return w, trace


def nrmse(targets, outputs) -> float:
    """``sqrt(mean((t - y)^2) / var(t))`` with the population variance."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    y = np.asarray(outputs, dtype=np.float64).reshape(-1)
    if t.shape != y.shape:
        raise ValueError(f"length mismatch: {t.size} targets vs {y.size} outputs")
    var = float(np.var(t))
    if var == 0.0:
        raise ValueError("targets have zero variance; NRMSE is undefined")
    return float(np.sqrt(np.mean((t - y) ** 2) / var))


def write_trace_csv(trace: TrainTrace, path) -> None:
    """Per-epoch objective and total codebook size as CSV.

    Row ``k`` is the state at the start of epoch ``k``; the last row is the
    final readout, whose codebook size column is empty.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "potential", "codebook_size"])
        for k, cost in enumerate(trace.costs):
            size = trace.codebook_sizes[k] if k < len(trace.codebook_sizes) else ""
            w.writerow([k, repr(float(cost)), size])
