"""Online quantization of scalar error samples.

The quantizer walks the samples once. The first sample seeds the codebook;
every later sample is absorbed by its nearest code word when that word is
within ``epsilon``, otherwise it becomes a new code word. Occupancy counts
are tallied as samples are assigned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "Codebook",
    "QuantizationResult",
    "quantize_stream",
    "nearest_word",
]


@dataclass(frozen=True)
class Codebook:
    """Code words in insertion order with their occupancy counts.

    Attributes
    ----------
    words : ndarray of shape (M,)
        Distinct code words ``c_m``.
    counts : ndarray of shape (M,)
        Number of samples assigned to each word (``M_m`` >= 1).
    epsilon : float
        Threshold the codebook was built with. ``nan`` for codebooks that
        were pinned by hand rather than grown from a stream.
    """

    words: np.ndarray
    counts: np.ndarray
    epsilon: float = float("nan")

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.float64).reshape(-1)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64).reshape(-1)
        if words.size == 0:
            raise ValueError("codebook must contain at least one word")
        if words.shape != counts.shape:
            raise ValueError(
                f"words and counts differ in length ({words.size} vs {counts.size})"
            )
        if np.any(counts < 1):
            raise ValueError("every code word needs a positive count")
        if not np.all(np.isfinite(words)):
            raise ValueError("code words must be finite")
        words.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def _trusted(cls, words: np.ndarray, counts: np.ndarray, epsilon: float) -> "Codebook":
        # the quantizer's output already satisfies every invariant
        cb = object.__new__(cls)
        words.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(cb, "words", words)
        object.__setattr__(cb, "counts", counts)
        object.__setattr__(cb, "epsilon", epsilon)
        return cb

    @classmethod
    def pinned(cls, word: float, n_samples: int) -> "Codebook":
        """Single-word codebook holding all ``n_samples`` (e.g. ``{0}`` for MCC)."""
        return cls(np.array([word], dtype=np.float64), np.array([n_samples]))

    @property
    def size(self) -> int:
        return int(self.words.size)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def weights(self) -> np.ndarray:
        """Occupancy fractions ``M_m / N``; they sum to one."""
        return self.counts / self.counts.sum()

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class QuantizationResult:
    codebook: Codebook
    assignments: np.ndarray

    def quantized(self) -> np.ndarray:
        """The quantized samples ``Q[e_j]``."""
        return self.codebook.words[self.assignments]


@numba.njit(cache=True)
def _online_vq(errors, epsilon):
    n = errors.shape[0]
    words = np.empty(n, dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    assignments = np.empty(n, dtype=np.int64)
    words[0] = errors[0]
    counts[0] = 1
    assignments[0] = 0
    m = 1
    for i in range(1, n):
        e = errors[i]
        best = 0
        best_dist = abs(e - words[0])
        for j in range(1, m):
            dist = abs(e - words[j])
            # strict comparison keeps the earliest word on ties
            if dist < best_dist:
                best_dist = dist
                best = j
        if best_dist <= epsilon:
            counts[best] += 1
            assignments[i] = best
        else:
            words[m] = e
            counts[m] = 1
            assignments[i] = m
            m += 1
    return words[:m].copy(), counts[:m].copy(), assignments


def quantize_stream(errors, epsilon: float) -> QuantizationResult:
    """Quantize ``errors`` in order with threshold ``epsilon``.

    Runs in O(MN) time where M is the final codebook size. A distance equal
    to ``epsilon`` counts as within threshold; ``epsilon=inf`` collapses
    everything onto the first sample.

    Parameters
    ----------
    errors : array_like of shape (N,)
        Finite error samples, N >= 1.
    epsilon : float
        Nonnegative quantization threshold.

    Returns
    -------
    QuantizationResult
    """
    e = np.ascontiguousarray(errors, dtype=np.float64).reshape(-1)
    if e.size == 0:
        raise ValueError("cannot quantize an empty error vector")
    if not np.all(np.isfinite(e)):
        raise ValueError("error samples must be finite")
    epsilon = float(epsilon)
    if not epsilon >= 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    words, counts, assignments = _online_vq(e, epsilon)
    return QuantizationResult(Codebook._trusted(words, counts, epsilon), assignments)


def nearest_word(x: float, codebook: Codebook) -> tuple[int, float]:
    """Index of the word closest to ``x`` and the distance to it.

    Ties go to the lowest index.
    """
    dist = np.abs(codebook.words - float(x))
    j = int(np.argmin(dist))
    return j, float(dist[j])
