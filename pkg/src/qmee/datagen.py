"""Synthetic datasets, normalization and CSV ingestion.

Random streams
--------------
Every generator draws from ``numpy.random.Generator(Philox(...))``, a
counter-based bit generator. A master seed is expanded with
``numpy.random.SeedSequence(seed)``; trial ``k`` of an experiment uses
``SeedSequence(seed).spawn(n_trials)[k]``. Equal seeds therefore give
byte-identical data regardless of trial scheduling.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Background",
    "MixtureNoiseSpec",
    "NOISE_CASES",
    "RegressionDataset",
    "TimeSeriesDataset",
    "MinMaxScaler",
    "make_rng",
    "spawn_seeds",
    "sample_mixture_noise",
    "gen_linear_regression",
    "gen_mackey_glass",
    "embed_and_split",
    "minmax_normalize",
    "load_csv_dataset",
    "write_csv_dataset",
    "DEFAULT_LAGS",
]

DEFAULT_LAGS = (24, 18, 12, 6)


def make_rng(seed) -> np.random.Generator:
    """Philox generator for an int seed or a spawned ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Independent per-trial substreams of a master seed."""
    return np.random.SeedSequence(seed).spawn(n)


class Background(str, enum.Enum):
    GAUSS_MIX_SYMMETRIC = "gauss_mix_symmetric"    # 0.5 N(3,1) + 0.5 N(-3,1)
    GAUSS_MIX_ASYMMETRIC = "gauss_mix_asymmetric"  # 2/3 N(-5,1) + 1/3 N(2,1)
    BINARY = "binary"                              # +-2 with p = 0.5
    GAUSSIAN = "gaussian"                          # N(0,1)
    GAUSS_MIX_ALPHA = "gauss_mix_alpha"            # 0.5 N(a,.01) + 0.5 N(-a,.01)
    NONE = "none"                                  # identically zero


@dataclass(frozen=True)
class MixtureNoiseSpec:
    """Impulsive noise ``v = (1 - a) A + a B`` with ``P(a = 1) = c``.

    ``A`` is the background process, ``B`` a Gaussian outlier process.
    ``alpha`` and ``alpha_var`` parameterize the ``gauss_mix_alpha``
    background only.
    """

    c: float = 0.1
    background: Background = Background.GAUSS_MIX_SYMMETRIC
    outlier_mean: float = 0.0
    outlier_var: float = 10000.0
    alpha: float = 0.0
    alpha_var: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "background", Background(self.background))
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"occurrence probability must lie in [0, 1], got {self.c}")
        if self.outlier_var < 0 or self.alpha_var < 0:
            raise ValueError("variances must be nonnegative")

    @classmethod
    def esn(cls, alpha: float, c: float = 0.2) -> "MixtureNoiseSpec":
        """Noise used on the Mackey-Glass training targets."""
        return cls(c=c, background=Background.GAUSS_MIX_ALPHA, outlier_var=0.01,
                   alpha=alpha, alpha_var=0.01)

    @classmethod
    def case(cls, number: int, c: float = 0.1, outlier_var: float = 10000.0) -> "MixtureNoiseSpec":
        """Background noise cases 1-4 of the linear regression benchmark."""
        try:
            bg = NOISE_CASES[int(number)]
        except KeyError:
            raise ValueError(f"unknown noise case {number!r}; expected 1-4") from None
        return cls(c=c, background=bg, outlier_var=outlier_var)


NOISE_CASES = {
    1: Background.GAUSS_MIX_SYMMETRIC,
    2: Background.GAUSS_MIX_ASYMMETRIC,
    3: Background.BINARY,
    4: Background.GAUSSIAN,
}


def _background(n: int, spec: MixtureNoiseSpec, rng: np.random.Generator) -> np.ndarray:
    bg = spec.background
    if bg is Background.NONE:
        return np.zeros(n)
    if bg is Background.GAUSSIAN:
        return rng.standard_normal(n)
    if bg is Background.BINARY:
        return np.where(rng.random(n) < 0.5, -2.0, 2.0)
    if bg is Background.GAUSS_MIX_SYMMETRIC:
        means = np.where(rng.random(n) < 0.5, 3.0, -3.0)
        return means + rng.standard_normal(n)
    if bg is Background.GAUSS_MIX_ASYMMETRIC:
        means = np.where(rng.random(n) < 2.0 / 3.0, -5.0, 2.0)
        return means + rng.standard_normal(n)
    if bg is Background.GAUSS_MIX_ALPHA:
        means = np.where(rng.random(n) < 0.5, spec.alpha, -spec.alpha)
        return means + math.sqrt(spec.alpha_var) * rng.standard_normal(n)
    raise AssertionError(bg)


def sample_mixture_noise(n: int, spec: MixtureNoiseSpec, rng, return_gate: bool = False):
    """Draw ``n`` samples of impulsive mixture noise.

    The gate, background and outlier draws are taken in that order from
    ``rng`` so sequences are reproducible from the seed alone.
    """
    rng = make_rng(rng)
    gate = rng.random(n) < spec.c
    a = _background(n, spec, rng)
    b = spec.outlier_mean + math.sqrt(spec.outlier_var) * rng.standard_normal(n)
    v = np.where(gate, b, a)
    if return_gate:
        return v, gate
    return v


@dataclass
class RegressionDataset:
    """Inputs stored column-wise: ``inputs[:, i]`` is sample ``i``."""

    inputs: np.ndarray
    targets: np.ndarray
    true_omega: np.ndarray | None = None
    seed: int | None = None
    feature_names: list[str] = field(default_factory=list)
    target_name: str = "y"

    @property
    def n_samples(self) -> int:
        return self.targets.size

    @property
    def n_features(self) -> int:
        return self.inputs.shape[0]


def gen_linear_regression(n: int, spec: MixtureNoiseSpec, seed, omega=(2.0, 1.0),
                          low: float = -2.0, high: float = 2.0) -> RegressionDataset:
    """``y_i = omega . x_i + v_i`` with inputs uniform on a hypercube."""
    if n < 1:
        raise ValueError("need at least one sample")
    omega = np.asarray(omega, dtype=np.float64)
    rng = make_rng(seed)
    x = rng.uniform(low, high, size=(omega.size, n))
    v = sample_mixture_noise(n, spec, rng)
    y = omega @ x + v
    return RegressionDataset(x, y, omega.copy(), seed if isinstance(seed, int) else None)


def gen_mackey_glass(length: int, tau: float = 17.0, a: float = -0.1, b: float = 0.2,
                     dt: float = 0.1, x0: float = 1.2, transient: float = 100.0,
                     sample_step: float = 1.0, power: int = 10) -> np.ndarray:
    """Sample the Mackey-Glass delay equation on a unit-spaced grid.

    Integrates ``dx/dt = a x(t) + b x(t - tau) / (1 + x(t - tau)^power)``
    with classical RK4 and constant history ``x0`` for ``t <= 0``. Delayed
    values at half steps come from cubic Hermite interpolation of the stored
    trajectory, which keeps the scheme fourth-order. The first ``transient``
    time units (1000 steps at ``dt = 0.1``) are discarded, then every
    ``sample_step`` time units one value is kept.

    ``tau``, ``transient`` and ``sample_step`` must be integer multiples of
    ``dt``.
    """

    def steps(t, name):
        k = t / dt
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
            raise ValueError(f"{name}={t} is not a multiple of dt={dt}")
        return int(round(k))

    lag = steps(tau, "tau")
    skip = steps(transient, "transient")
    stride = steps(sample_step, "sample_step")
    if length < 1 or lag < 1 or stride < 1:
        raise ValueError("length, tau and sample_step must be positive")
    total = skip + (length - 1) * stride

    def rhs(x, xd):
        return a * x + b * xd / (1.0 + xd**power)

    # index offset so that hist[lag + k] holds x(k dt); entries < lag are history
    xs = np.empty(lag + total + 1)
    xs[: lag + 1] = x0
    fs = np.empty(lag + total + 1)
    fs[: lag] = 0.0  # history is constant
    fs[lag] = rhs(x0, x0)
    for k in range(total):
        i = lag + k
        j = k  # index of x(t - tau)
        x_d0, x_d1 = xs[j], xs[j + 1]
        # intervals inside the constant history have zero slope at both ends
        f_d0 = fs[j] if j >= lag else 0.0
        f_d1 = fs[j + 1] if j >= lag else 0.0
        x_dm = 0.5 * (x_d0 + x_d1) + dt * (f_d0 - f_d1) / 8.0
        x = xs[i]
        k1 = rhs(x, x_d0)
        k2 = rhs(x + 0.5 * dt * k1, x_dm)
        k3 = rhs(x + 0.5 * dt * k2, x_dm)
        k4 = rhs(x + dt * k3, x_d1)
        xs[i + 1] = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        fs[i + 1] = rhs(xs[i + 1], xs[j + 1])
    return xs[lag + skip:: stride][:length].copy()


@dataclass
class TimeSeriesDataset:
    """Delay-embedded one-step prediction task.

    ``train_inputs``/``test_inputs`` have shape (n, len(lags)); row ``k``
    holds ``[x(t-24), x(t-18), x(t-12), x(t-6)]`` for target ``x(t)``.
    """

    raw: np.ndarray
    train_inputs: np.ndarray
    train_targets: np.ndarray
    train_clean_targets: np.ndarray
    test_inputs: np.ndarray
    test_targets: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray
    lags: tuple = DEFAULT_LAGS
    train_noise_gate: np.ndarray | None = None


def embed_and_split(raw, noise_spec: MixtureNoiseSpec | None = None, train: int = 900,
                    test: int = 400, seed=0, lags=DEFAULT_LAGS, start: int | None = None
                    ) -> TimeSeriesDataset:
    """Build delay vectors and split into consecutive train and test segments.

    Noise from ``noise_spec`` is added to the training targets only; test
    targets stay clean. ``start`` is the index of the first training target
    (defaults to the largest lag).
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    lags = tuple(int(l) for l in lags)
    max_lag = max(lags)
    start = max_lag if start is None else int(start)
    if start < max_lag:
        raise ValueError(f"start index {start} is smaller than the largest lag {max_lag}")
    need = start + train + test
    if raw.size < need:
        raise ValueError(f"series of length {raw.size} too short; need {need} samples")
    t = np.arange(start, start + train + test)
    inputs = np.stack([raw[t - l] for l in lags], axis=1)
    targets = raw[t].copy()
    tr, te = slice(0, train), slice(train, train + test)
    clean = targets[tr].copy()
    noisy = clean.copy()
    gate = None
    if noise_spec is not None:
        v, gate = sample_mixture_noise(train, noise_spec, make_rng(seed), return_gate=True)
        noisy = noisy + v
    return TimeSeriesDataset(
        raw=raw, train_inputs=inputs[tr], train_targets=noisy, train_clean_targets=clean,
        test_inputs=inputs[te], test_targets=targets[te], train_index=t[tr], test_index=t[te],
        lags=lags, train_noise_gate=gate,
    )


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature affine map ``(x - low) / (high - low)`` fit on training data."""

    low: np.ndarray
    high: np.ndarray

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.low) / (self.high - self.low)

    def inverse(self, z):
        return np.asarray(z, dtype=np.float64) * (self.high - self.low) + self.low


def minmax_normalize(train_features, test_features=None):
    """Scale training features to [0, 1] and apply the same map to test data.

    Features are columns (rows are samples). Test values outside the training
    range map outside [0, 1]; nothing is clipped.

    Returns
    -------
    train_scaled, test_scaled, scaler
        ``test_scaled`` is None when no test features are given.
    """
    tr = np.asarray(train_features, dtype=np.float64)
    if tr.ndim == 1:
        tr = tr[:, None]
    low = tr.min(axis=0)
    high = tr.max(axis=0)
    flat = np.flatnonzero(high == low)
    if flat.size:
        raise ValueError(f"feature {int(flat[0])} has zero range on the training data")
    scaler = MinMaxScaler(low, high)
    te = None if test_features is None else scaler.transform(
        np.asarray(test_features, dtype=np.float64).reshape(-1, tr.shape[1]))
    return scaler.transform(tr), te, scaler


class CsvFormatError(ValueError):
    pass


def load_csv_dataset(path, target_column) -> RegressionDataset:
    """Read a numeric CSV table with a header row.

    ``target_column`` is a header name or a zero-based column index; all other
    columns become features. Row numbers in error messages count the header
    as row 1.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such dataset file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            values = []
            for col, cell in enumerate(row):
                try:
                    val = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {col + 1} ({header[col]!r}): "
                        f"non-numeric cell {cell!r}") from None
                if not math.isfinite(val):
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {col + 1} ({header[col]!r}): "
                        f"non-finite value {cell!r}")
                values.append(val)
            rows.append(values)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in header:
            raise CsvFormatError(f"{path}: no column named {target_column!r}")
        tcol = header.index(target_column)
    else:
        tcol = int(target_column) % len(header)
    feats = [i for i in range(len(header)) if i != tcol]
    return RegressionDataset(
        inputs=table[:, feats].T.copy(), targets=table[:, tcol].copy(),
        feature_names=[header[i] for i in feats], target_name=header[tcol],
    )


def write_csv_dataset(dataset: RegressionDataset, path) -> None:
    """Write features then target as a CSV with a header row (full precision)."""
    names = dataset.feature_names or [f"x{i + 1}" for i in range(dataset.n_features)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*names, dataset.target_name])
        for i in range(dataset.n_samples):
            w.writerow([repr(float(v)) for v in dataset.inputs[:, i]] + [repr(float(dataset.targets[i]))])
