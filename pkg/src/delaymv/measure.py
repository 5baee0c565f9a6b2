"""Empirical measures over particle samples with uniform weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EmpiricalMeasure:
    """Uniformly weighted atoms, one row per sample."""

    samples: np.ndarray  # (N, d)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("samples must be a nonempty (N, d) array")
        self.samples = arr

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def mean(mu: EmpiricalMeasure) -> np.ndarray:
    return mu.samples.mean(axis=0)


def second_moment(mu: EmpiricalMeasure) -> float:
    """(1/N) sum |x_i|^2, which is exactly W2^2(mu, delta_0)."""
    return float(np.mean(np.sum(mu.samples ** 2, axis=1)))


def w2_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact Wasserstein-2 between equal-size 1-D empirical measures.

    The optimal coupling of two uniform empirical measures on the line
    matches order statistics, so the distance is the quadratic mean of the
    sorted differences.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("exact W2 is only supported in dimension 1")
    if mu.n != nu.n:
        raise ValueError("sample counts must match (%d vs %d)" % (mu.n, nu.n))
    a = np.sort(mu.samples[:, 0])
    b = np.sort(nu.samples[:, 0])
    return float(np.sqrt(np.mean((a - b) ** 2)))
