"""Covariance and state-covariance data.

Estimates that fail positivity or Toeplitz structure are representable on
purpose; positivity is something you ask about, not something enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .spectral_core import (
    SpectralSamples,
    StateSpacePair,
    TransferSamples,
    _check_same_grid,
    _frozen,
)

PD_EPS = 1e-10


@dataclass(frozen=True, eq=False)
class CovarianceWindow:
    """Covariance lags r_0..r_n."""

    lags: NDArray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.lags, dtype=float))
        if r.ndim != 1 or r.size == 0 or not np.all(np.isfinite(r)):
            raise ValueError("covariance window must be a finite 1-d vector")
        object.__setattr__(self, "lags", _frozen(r))

    @property
    def n(self) -> int:
        return self.lags.size - 1

    def is_in_R(self) -> bool:
        """Whether T(r) is (strictly) positive definite."""
        return is_positive_definite(toeplitz(self), strict=True)


@dataclass(frozen=True, eq=False)
class StateCovariance:
    """Symmetric m x m matrix; symmetrized on construction."""

    matrix: NDArray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.all(np.isfinite(S)):
            raise ValueError(f"state covariance must be a finite square matrix, got {S.shape}")
        object.__setattr__(self, "matrix", _frozen(0.5 * (S + S.T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, "fro"))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: NDArray = field(repr=False)
    mean: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=float).reshape(-1)
        if y.size < 2:
            raise ValueError("time series needs at least two samples")
        if not np.all(np.isfinite(y)):
            raise ValueError("time series contains non-finite values")
        object.__setattr__(self, "samples", _frozen(y))

    def __len__(self):
        return self.samples.size

    def centered(self) -> NDArray:
        return self.samples - self.mean


def sample_covariances(y: TimeSeries, n: int, mode: str = "biased") -> CovarianceWindow:
    """Lag-n sample covariances, normalized by T (biased) or T - k (unbiased)."""
    T = len(y)
    if not 0 <= n < T:
        raise ValueError(f"need 0 <= n < T, got n={n}, T={T}")
    if mode not in ("biased", "unbiased"):
        raise ValueError(f"unknown estimator mode {mode!r}")
    x = y.centered()
    sums = np.array([np.dot(x[k:], x[: T - k]) for k in range(n + 1)])
    denom = T if mode == "biased" else T - np.arange(n + 1)
    return CovarianceWindow(sums / denom)


def toeplitz(r: CovarianceWindow) -> StateCovariance:
    idx = np.arange(r.n + 1)
    return StateCovariance(r.lags[np.abs(idx[:, None] - idx[None, :])])


def is_positive_definite(sigma: StateCovariance, strict: bool = True) -> bool:
    """Eigenvalue test; ``strict`` requires min eig > 1e-10 * max(1, ||sigma||)."""
    lam_min = np.linalg.eigvalsh(sigma.matrix)[0]
    if strict:
        return bool(lam_min > PD_EPS * max(1.0, np.linalg.norm(sigma.matrix, 2)))
    return bool(lam_min >= -PD_EPS * max(1.0, np.linalg.norm(sigma.matrix, 2)))


def shift_pair(n: int) -> StateSpacePair:
    """Down-shift pair of order n; G(z) = (1, z, ..., z^n)^T and Sigma = T(r)."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    A = np.eye(n + 1, k=-1)
    B = np.zeros(n + 1)
    B[0] = 1.0
    return StateSpacePair(A, B)


def state_covariance_from_psd(G: TransferSamples, phi: SpectralSamples) -> StateCovariance:
    """Sigma = (1/N) sum_j phi_j Re(G_j G_j^*)."""
    _check_same_grid(G.grid, phi.grid)
    return StateCovariance(np.einsum("j,jab->ab", phi.values, G.outer_real()) / G.grid.size)


def state_covariance_from_data(
    system: StateSpacePair, y: TimeSeries, burn_in: int | None = None
) -> StateCovariance:
    """Filter y through x_{t+1} = A x_t + B y_t from x_0 = 0 and average x x^T.

    States with index t <= burn_in are discarded (default 10 m).
    """
    m = system.dim
    if burn_in is None:
        burn_in = 10 * m
    T = len(y)
    if T <= burn_in + 1:
        raise ValueError(f"series of length {T} too short for burn-in {burn_in}")
    u = y.centered()
    A, B = system.A, system.B
    X = np.zeros((T, m))
    for t in range(T - 1):
        X[t + 1] = A @ X[t] + B * u[t]
    kept = X[burn_in + 1 :]
    return StateCovariance(kept.T @ kept / kept.shape[0])
