"""Frequency-domain substrate: grids on the unit circle, sampled spectra,
pseudo-polynomials and input-to-state transfer samples.

All integrals over the circle are replaced by the midpoint rule on a
uniform grid, which is exact for trigonometric polynomials of degree
below the grid size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

MIN_GRID_SIZE = 16


class GridMismatchError(ValueError):
    """Raised when two sampled objects live on different grids."""


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform midpoint grid on (-pi, pi] with weight 1/N per node."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < MIN_GRID_SIZE or self.size % 2:
            raise ValueError(
                f"grid size must be an even integer >= {MIN_GRID_SIZE}, got {self.size}"
            )

    @cached_property
    def theta(self) -> NDArray:
        j = np.arange(self.size)
        return _frozen(-np.pi + 2.0 * np.pi * (j + 0.5) / self.size)

    @property
    def weight(self) -> float:
        return 1.0 / self.size

    @cached_property
    def z(self) -> NDArray:
        return _frozen(np.exp(1j * self.theta))

    def mirror(self) -> NDArray:
        """Index permutation mapping node j to the node at -theta_j."""
        return np.arange(self.size)[::-1]

    def integrate(self, values: NDArray) -> NDArray:
        """Grid version of (1/2pi) * integral over the circle, along axis 0."""
        return np.asarray(values).sum(axis=0) / self.size

    def cosine_matrix(self, n: int) -> NDArray:
        """Matrix C with C[j, k] = cos(k theta_j), k = 0..n."""
        return np.cos(np.outer(self.theta, np.arange(n + 1)))


@dataclass(frozen=True, eq=False)
class SpectralSamples:
    """A real function sampled on a FrequencyGrid (a spectrum, a prior, Q, ...)."""

    grid: FrequencyGrid
    values: NDArray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectral samples must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def constant(cls, grid: FrequencyGrid, c: float) -> "SpectralSamples":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_function(cls, grid: FrequencyGrid, fn) -> "SpectralSamples":
        return cls(grid, fn(grid.theta))

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0.0))

    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0.0))

    def __add__(self, other):
        if isinstance(other, SpectralSamples):
            _check_same_grid(self.grid, other.grid)
            return SpectralSamples(self.grid, self.values + other.values)
        return SpectralSamples(self.grid, self.values + float(other))

    __radd__ = __add__

    def __len__(self):
        return self.grid.size


@dataclass(frozen=True, eq=False)
class PseudoPolynomial:
    """Q(e^{i theta}) = q_0 + sum_k q_k cos(k theta)."""

    coeffs: NDArray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("pseudo-polynomial needs a 1-d, nonempty coefficient vector")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1


@dataclass(frozen=True)
class StateSpacePair:
    """Stable, reachable pair (A, B) defining G(z) = (I - zA)^{-1} B."""

    A: NDArray = field(repr=False)
    B: NDArray = field(repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1)
        m = A.shape[0]
        if A.shape != (m, m) or B.shape != (m,):
            raise ValueError(f"A must be square and B of matching length; got {A.shape}, {B.shape}")
        if m and np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
            raise ValueError("A must be a stability matrix (spectral radius < 1)")
        reach = np.column_stack([np.linalg.matrix_power(A, k) @ B for k in range(m)])
        if np.linalg.matrix_rank(reach) < m:
            raise ValueError("(A, B) must be a reachable pair")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class TransferSamples:
    """G evaluated at every grid node: values[j] is the m-vector G(e^{i theta_j})."""

    grid: FrequencyGrid
    values: NDArray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[0] != self.grid.size:
            raise ValueError(f"expected shape ({self.grid.size}, m), got {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def outer_real(self) -> NDArray:
        """Stack of Re(G_j G_j^*), shape (N, m, m)."""
        G = self.values
        return np.einsum("ja,jb->jab", G, G.conj()).real


def _check_same_grid(a: FrequencyGrid, b: FrequencyGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a.size} vs {b.size} nodes")


def make_grid(N: int) -> FrequencyGrid:
    return FrequencyGrid(N)


def inner_product(a: SpectralSamples, b: SpectralSamples) -> float:
    """<a, b> = (1/N) sum_j a_j b_j for real, symmetric samples."""
    _check_same_grid(a.grid, b.grid)
    return float(np.dot(a.values, b.values) / a.grid.size)


def eval_pseudopoly(q: PseudoPolynomial, grid: FrequencyGrid) -> SpectralSamples:
    return SpectralSamples(grid, grid.cosine_matrix(q.degree) @ q.coeffs)


def fourier_coeffs(phi: SpectralSamples, n: int):
    """Covariance lags r_k = <phi, cos k theta>, k = 0..n."""
    from .moments import CovarianceWindow

    N = phi.grid.size
    if n < 0 or 2 * n >= N:
        raise ValueError(f"lag count n={n} needs n < N/2 = {N // 2}")
    return CovarianceWindow(phi.grid.cosine_matrix(n).T @ phi.values / N)


def eval_transfer(system: StateSpacePair, grid: FrequencyGrid) -> TransferSamples:
    m = system.dim
    lhs = np.eye(m)[None, :, :] - grid.z[:, None, None] * system.A[None, :, :]
    rhs = np.broadcast_to(system.B.astype(complex), (grid.size, m))[..., None]
    try:
        G = np.linalg.solve(lhs, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:  # excluded by the stability check
        raise RuntimeError("I - zA singular on the unit circle") from exc
    return TransferSamples(grid, G)
