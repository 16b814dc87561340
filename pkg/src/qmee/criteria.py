"""Error-entropy family cost functions and their quantized forms.

All functions take a one-dimensional array of prediction errors and a
Gaussian kernel width. Costs in the entropy family (correntropy, the
quadratic information potential and its quantized approximation) are
*maximized* during training; the MSE cost is minimized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .quantizer import Codebook, quantize_stream

__all__ = [
    "Criterion",
    "CriterionSpec",
    "as_errors",
    "gaussian_kernel",
    "parzen_density",
    "information_potential",
    "qmee_potential",
    "qmee_weighted_form",
    "qmee_large_sigma_approx",
    "qmee_gradient_linear",
    "kernel_weights",
    "mse_cost",
    "correntropy_cost",
    "kernel_peak",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)

# exponent arguments below this underflow to exactly zero
_EXP_FLOOR = -700.0

# upper bound on temporaries in the pairwise sums (elements, ~32 MB)
_BLOCK = 1 << 22


def as_errors(errors) -> np.ndarray:
    """Validate an error vector: 1-D, nonempty, finite, float64."""
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim == 0:
        e = e.reshape(1)
    if e.ndim != 1:
        raise ValueError(f"errors must be one-dimensional, got shape {e.shape}")
    if e.size == 0:
        raise ValueError("errors must contain at least one sample")
    if not np.all(np.isfinite(e)):
        raise ValueError("errors must be finite")
    return e


def _check_sigma(sigma) -> float:
    try:
        sigma = float(sigma)
    except (TypeError, ValueError):
        raise ValueError(f"kernel width must be a positive number, got {sigma!r}") from None
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"kernel width must be positive and finite, got {sigma}")
    return sigma


def _check_codebook(codebook: Codebook, n: int) -> None:
    if codebook.n_samples != n:
        raise ValueError(
            f"codebook counts sum to {codebook.n_samples} but there are {n} errors; "
            "the codebook was not built from these errors"
        )


def kernel_peak(sigma: float) -> float:
    """Maximum of the Gaussian kernel, ``1/(sqrt(2 pi) sigma)``."""
    return 1.0 / (SQRT_2PI * _check_sigma(sigma))


def _unnormalized_kernel(diff: np.ndarray, sigma: float) -> np.ndarray:
    """``exp(-diff^2 / 2 sigma^2)``, overwriting ``diff``."""
    diff *= diff
    diff *= -0.5 / (sigma * sigma)
    under = diff < _EXP_FLOOR
    np.exp(diff, out=diff)
    if under.any():
        diff[under] = 0.0
    return diff


def _kernel(x: np.ndarray, sigma: float) -> np.ndarray:
    out = _unnormalized_kernel(np.array(x, dtype=np.float64), sigma)
    out *= 1.0 / (SQRT_2PI * sigma)
    return out


def gaussian_kernel(x, sigma: float):
    """Normalized Gaussian kernel ``exp(-x^2 / 2 sigma^2) / (sqrt(2 pi) sigma)``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    sigma = _check_sigma(sigma)
    arr = np.asarray(x, dtype=np.float64)
    out = _kernel(np.atleast_1d(arr), sigma)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def parzen_density(x, errors, sigma: float):
    """Parzen window density estimate of the errors evaluated at ``x``."""
    e = as_errors(errors)
    sigma = _check_sigma(sigma)
    arr = np.asarray(x, dtype=np.float64)
    pts = np.atleast_1d(arr).reshape(-1)
    out = np.empty(pts.size)
    step = max(1, _BLOCK // e.size)
    for start in range(0, pts.size, step):
        block = pts[start:start + step]
        out[start:start + step] = _unnormalized_kernel(block[:, None] - e[None, :], sigma).mean(axis=1)
    out *= 1.0 / (SQRT_2PI * sigma)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def information_potential(errors, sigma: float) -> float:
    """Empirical quadratic information potential, O(N^2).

    ``(1/N^2) sum_i sum_j G(e_i - e_j)``. The pairwise sum is evaluated in
    row blocks so memory stays bounded for large N.
    """
    e = as_errors(errors)
    sigma = _check_sigma(sigma)
    n = e.size
    step = max(1, _BLOCK // n)
    total = 0.0
    for start in range(0, n, step):
        block = e[start:start + step]
        total += _unnormalized_kernel(block[:, None] - e[None, :], sigma).sum()
    return total / (n * n) / (SQRT_2PI * sigma)


def kernel_weights(errors, codebook: Codebook, sigma: float):
    """Per-sample kernel sums against the codebook.

    Returns
    -------
    w : ndarray of shape (N,)
        ``w_i = sum_m M_m G(e_i - c_m)``
    s : ndarray of shape (N,)
        ``s_i = sum_m M_m G(e_i - c_m) c_m``

    These are the diagonal of ``sum_m Lambda_m`` and its code-word moment;
    every QMEE quantity (cost, gradient, normal equations) is built from
    them.
    """
    e = as_errors(errors)
    sigma = _check_sigma(sigma)
    _check_codebook(codebook, e.size)
    return _kernel_sums(e, codebook.words, codebook.counts.astype(np.float64), sigma)


def _kernel_sums(e, c, mc, sigma):
    # unchecked core of kernel_weights, also used by training loops
    mcc = mc * c
    w = np.empty(e.size)
    s = np.empty(e.size)
    step = max(1, _BLOCK // c.size)
    for start in range(0, e.size, step):
        k = _unnormalized_kernel(e[start:start + step, None] - c[None, :], sigma)
        w[start:start + step] = k @ mc
        s[start:start + step] = k @ mcc
    scale = 1.0 / (SQRT_2PI * sigma)
    w *= scale
    s *= scale
    return w, s


def qmee_potential(errors, codebook: Codebook, sigma: float) -> float:
    """Quantized information potential, O(MN).

    ``(1/N^2) sum_i sum_m M_m G(e_i - c_m)``.
    """
    e = as_errors(errors)
    sigma = _check_sigma(sigma)
    _check_codebook(codebook, e.size)
    c = codebook.words
    mc = codebook.counts.astype(np.float64)
    n = e.size
    step = max(1, _BLOCK // c.size)
    total = 0.0
    for start in range(0, n, step):
        total += (_unnormalized_kernel(e[start:start + step, None] - c[None, :], sigma) @ mc).sum()
    return total / (n * n) / (SQRT_2PI * sigma)


def qmee_weighted_form(errors, codebook: Codebook, sigma: float) -> float:
    """Occupancy-weighted average of the Parzen density at the code words.

    Algebraically identical to :func:`qmee_potential`; kept as a separate
    evaluation path for cross-checking.
    """
    e = as_errors(errors)
    _check_codebook(codebook, e.size)
    dens = parzen_density(codebook.words, e, sigma)
    return float(np.dot(codebook.weights, dens))


def qmee_large_sigma_approx(errors, codebook: Codebook, sigma: float) -> float:
    """Second-order expansion of the quantized potential for large ``sigma``.

    Only accurate when ``sigma`` dominates the error spread.
    """
    e = as_errors(errors)
    sigma = _check_sigma(sigma)
    _check_codebook(codebook, e.size)
    # mu_m = mean_i (e_i - c_m)^2, expanded to avoid an N x M temporary
    mean = e.mean()
    second = np.mean(e * e)
    c = codebook.words
    mu = second - 2.0 * c * mean + c * c
    peak = 1.0 / (SQRT_2PI * sigma)
    return peak - float(np.dot(codebook.weights, mu)) / (2.0 * SQRT_2PI * sigma**3)


def qmee_gradient_linear(errors, inputs, targets, codebook: Codebook, sigma: float) -> np.ndarray:
    """Gradient of the quantized potential w.r.t. linear-model weights.

    For ``e_i = y_i - w.x_i`` with the codebook held fixed this is
    ``(P - R w) / (N^2 sigma^2)``, computed here as
    ``(1/(N^2 sigma^2)) sum_i sum_m M_m G(e_i - c_m) (e_i - c_m) x_i``.

    Parameters
    ----------
    errors : array_like of shape (N,)
    inputs : array_like of shape (d, N)
        Column ``i`` is the input ``x_i``.
    targets : array_like of shape (N,)
    codebook : Codebook
    sigma : float
    """
    e = as_errors(errors)
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[1] != e.size or y.size != e.size:
        raise ValueError(
            f"dimension mismatch: inputs {x.shape}, targets {y.shape}, errors {e.shape}"
        )
    sigma = _check_sigma(sigma)
    w, s = kernel_weights(e, codebook, sigma)
    n = e.size
    return x @ (w * e - s) / (n * n * sigma * sigma)


def mse_cost(errors) -> float:
    e = as_errors(errors)
    return float(np.mean(e * e))


def correntropy_cost(errors, sigma: float) -> float:
    """Empirical correntropy ``(1/N) sum_i G(e_i)``, i.e. the Parzen density at 0."""
    e = as_errors(errors)
    return float(_kernel(e, _check_sigma(sigma)).mean())


class Criterion(str, enum.Enum):
    MSE = "mse"
    MCC = "mcc"
    MEE = "mee"
    QMEE = "qmee"


@dataclass(frozen=True)
class CriterionSpec:
    """A learning criterion with its parameters.

    ``sigma`` is required for everything except MSE; ``epsilon`` is given
    for QMEE and only for QMEE.
    """

    kind: Criterion
    sigma: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        kind = Criterion(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is Criterion.MSE:
            if self.sigma is not None or self.epsilon is not None:
                raise ValueError("MSE takes neither sigma nor epsilon")
            return
        object.__setattr__(self, "sigma", _check_sigma(self.sigma))
        if kind is Criterion.QMEE:
            if self.epsilon is None or not float(self.epsilon) >= 0.0:
                raise ValueError("QMEE requires a nonnegative epsilon")
            object.__setattr__(self, "epsilon", float(self.epsilon))
        elif self.epsilon is not None:
            raise ValueError(f"epsilon applies to QMEE only, not {kind.value}")

    @property
    def maximize(self) -> bool:
        return self.kind is not Criterion.MSE

    def cost(self, errors) -> float:
        if self.kind is Criterion.MSE:
            return mse_cost(errors)
        if self.kind is Criterion.MCC:
            return correntropy_cost(errors, self.sigma)
        if self.kind is Criterion.MEE:
            return information_potential(errors, self.sigma)
        cb = quantize_stream(errors, self.epsilon).codebook
        return qmee_potential(errors, cb, self.sigma)
