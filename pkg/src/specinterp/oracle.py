"""Brute-force primal solver used to check the dual solvers.

Minimizes the discretized primal objective directly over the samples
phi_j >= 0.  Only the divergence integrand d and its phi-derivative are
used, never the closed-form minimizer F or any dual quantity.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .divergences import Divergence
from .dual_solvers import RegularizationConfig, _cosine_scale
from .moments import CovarianceWindow, StateCovariance
from .spectral_core import FrequencyGrid, SpectralSamples, TransferSamples

MAX_GRID = 128
MAX_DIM = 4


class OracleConvergenceError(RuntimeError):
    def __init__(self, violation: float, message: str = ""):
        super().__init__(message or f"brute-force primal did not converge (violation {violation:.3e})")
        self.violation = violation


class _Moments:
    """Linear moment map phi -> A phi and the penalty on its deviation from b."""

    def __init__(self, data, transfer, grid: FrequencyGrid, reg: RegularizationConfig):
        N = grid.size
        self.reg = reg
        if isinstance(data, CovarianceWindow):
            self.toeplitz = True
            self.A = grid.cosine_matrix(data.n).T / N
            self.b = data.lags.copy()
            self.scale = _cosine_scale(data.n + 1)
        else:
            self.toeplitz = False
            m = data.dim
            self.m = m
            self.K = transfer.outer_real()
            a, b = np.triu_indices(m)
            self.A = self.K[:, a, b].T / N
            self.b = data.matrix[a, b].copy()
            self.sigma = data.matrix
            self.N = N

    def penalty(self, phi):
        """Value and phi-gradient of the deviation penalty (zero without weight)."""
        if self.reg.kind != "primal":
            return 0.0, np.zeros_like(phi)
        W = self.reg.weight
        if self.toeplitz:
            u = self.scale * (self.A @ phi - self.b)
            return float(u @ W @ u), self.A.T @ (self.scale * (2.0 * W @ u))
        delta = np.einsum("j,jab->ab", phi, self.K) / self.N - self.sigma
        D = W @ delta + delta @ W
        return float(np.trace(delta @ W @ delta)), np.einsum("ab,jba->j", D, self.K) / self.N


def primal_objective(div, psi, phi, data, transfer=None, reg=None) -> float:
    """D(phi||psi) plus the deviation penalty of the primal-regularized problem."""
    reg = reg or RegularizationConfig.none()
    phi_v = getattr(phi, "values", phi)
    mom = _Moments(data, transfer, psi.grid, reg)
    return div.distance(phi_v, psi.values) + mom.penalty(np.asarray(phi_v, dtype=float))[0]


def moment_violation(phi, data, transfer=None) -> float:
    phi_v = np.asarray(getattr(phi, "values", phi), dtype=float)
    grid = phi.grid if hasattr(phi, "grid") else transfer.grid
    mom = _Moments(data, transfer, grid, RegularizationConfig.none())
    return float(np.max(np.abs(mom.A @ phi_v - mom.b)))


def _spg(fg, x0, tol, max_iter, memory=10):
    """Nonmonotone spectral projected gradient on x >= 0."""
    x = np.maximum(x0, 0.0)
    f, g = fg(x)
    step = 1.0 / max(np.max(np.abs(g)), 1e-12)
    recent = deque([f], maxlen=memory)
    for _ in range(max_iter):
        d = np.maximum(x - step * g, 0.0) - x
        if np.max(np.abs(np.maximum(x - g, 0.0) - x)) <= tol:
            break
        gd = float(g @ d)
        ref = max(recent)
        t = 1.0
        for _ in range(40):
            xn = x + t * d
            fn, gn = fg(xn)
            if np.isfinite(fn) and fn <= ref + 1e-4 * t * gd:
                break
            t *= 0.5
        else:
            break
        s, y = xn - x, gn - g
        sy = float(s @ y)
        if sy > 0:
            step = float(np.clip(s @ s / sy, 1e-10, 1e10))
        x, f, g = xn, fn, gn
        recent.append(f)
    return x, f


def brute_force_primal(
    div: Divergence,
    psi: SpectralSamples,
    target: CovarianceWindow | StateCovariance,
    transfer: TransferSamples | None = None,
    reg: RegularizationConfig | None = None,
    grid: FrequencyGrid | None = None,
    tol: float = 1e-10,
    max_outer: int = 60,
    max_inner: int = 20000,
) -> SpectralSamples:
    """Discretized primal minimizer over phi >= 0.

    Without regularization the moment constraints are handled by an
    augmented Lagrangian; with a primal weight the problem is only
    bound constrained.
    """
    reg = reg or RegularizationConfig.none()
    grid = grid or psi.grid
    if grid.size > MAX_GRID:
        raise ValueError(f"oracle is for small grids (N <= {MAX_GRID})")
    if isinstance(target, StateCovariance) and target.dim > MAX_DIM:
        raise ValueError(f"oracle is for small state dimensions (m <= {MAX_DIM})")
    if reg.kind == "dual":
        raise ValueError("the barrier-regularized problem has no primal counterpart")
    N = grid.size
    psi_v = psi.values
    mom = _Moments(target, transfer, grid, reg)

    def objective(phi):
        with np.errstate(all="ignore"):
            val = np.sum(div.d(phi, psi_v))
            grad = div.d_grad(phi, psi_v)
        pen, pen_grad = mom.penalty(phi)
        # scaled by N so gradients are O(1) per node
        return val + N * pen, grad + N * pen_grad

    phi = psi_v.copy()
    if reg.kind == "primal":
        phi, _ = _spg(objective, phi, tol, max_inner * 5)
        return SpectralSamples(grid, phi)

    # equivalent, well-conditioned constraint rows (redundant rows dropped)
    U, sv, Vt = np.linalg.svd(mom.A, full_matrices=False)
    keep = sv > 1e-10 * sv[0]
    A_w = Vt[keep]
    b_w = (U[:, keep].T @ mom.b) / sv[keep]

    y = np.zeros_like(b_w)
    rho = 100.0
    viol_prev = np.inf
    viol = np.inf
    for _ in range(max_outer):
        def augmented(x, y=y, rho=rho):
            f, g = objective(x)
            c = A_w @ x - b_w
            return f + N * (y @ c + 0.5 * rho * c @ c), g + N * (A_w.T @ (y + rho * c))

        phi, _ = _spg(augmented, phi, tol, max_inner)
        viol = float(np.max(np.abs(mom.A @ phi - mom.b)))
        if viol <= 1e-11 * (1.0 + np.max(np.abs(mom.b))):
            break
        c = A_w @ phi - b_w
        y = y + rho * c
        if viol > 0.25 * viol_prev:
            rho = min(rho * 10.0, 1e8)
        viol_prev = viol
    if viol > 1e-6:
        raise OracleConvergenceError(viol)
    return SpectralSamples(grid, phi)
