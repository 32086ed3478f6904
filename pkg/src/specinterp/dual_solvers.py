"""Dual solvers for exact and regularized covariance interpolation.

Both parametrizations reduce to the same finite-dimensional concave
problem.  With coordinates x, the nodewise multiplier function is
Q = sign * H x and the dual objective is

    f(x) = -sign * s.x + mean_j phi(Q_j, psi_j) - x.M x / 2 + lam * mean_j b(Q_j)

where phi is the divergence's dual integrand, M encodes the quadratic
deviation penalty (zero without primal regularization) and b is the
barrier (absent without dual regularization).

* toeplitz mode (data is a CovarianceWindow): x = q, H[j, k] = cos(k theta_j),
  s = r.  A primal weight W acts on the lag deviation in the orthonormal
  cosine basis, so W = w I penalizes w times the squared L2 norm of the
  deviation's trigonometric polynomial.
* general mode (StateCovariance + TransferSamples): x holds the upper
  triangle of a symmetric Lambda, H[j, (a, b)] = Re(G_j^* E_ab G_j) and the
  penalty is tr{Lambda W^{-1} Lambda} / 4.

``sign`` selects the multiplier convention: +1 uses
D + tr{Lambda (int G phi G^* - Sigma)} (so the KL dual reads
-tr{Lambda Sigma} + int psi log Q), -1 uses D + tr{Lambda (Sigma - int G phi G^*)}.
Fitted spectra do not depend on the choice.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from .divergences import Divergence
from .moments import CovarianceWindow, StateCovariance, toeplitz
from .spectral_core import (
    FrequencyGrid,
    PseudoPolynomial,
    SpectralSamples,
    TransferSamples,
    _check_same_grid,
    fourier_coeffs,
)

log = logging.getLogger(__name__)

UNBOUNDED_CAP = 1e6
UNBOUNDED_WINDOW = 10
BOUNDARY_STREAK = 20
BOUNDARY_MARGIN = 1e-8
ARMIJO = 1e-4
MAX_BACKTRACKS = 60


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    BOUNDARY = "Boundary"
    UNBOUNDED = "Unbounded"
    MAXITER = "MaxIter"

    @property
    def exit_code(self) -> int:
        return {"Converged": 0, "Boundary": 2, "Unbounded": 3, "MaxIter": 4}[self.value]


class SolverInternalError(RuntimeError):
    """A state the theory rules out (e.g. an unbounded strictly concave dual)."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 200
    damping: float = 1e-10
    backtrack: float = 0.5
    fraction: float = 0.99
    sign: int = 1

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter > 0 and self.damping > 0):
            raise ValueError("tol, max_iter and damping must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.fraction < 1:
            raise ValueError("feasibility fraction must lie in (0, 1)")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


BARRIERS = ("b1", "b2", "blog")


@dataclass(frozen=True, eq=False)
class RegularizationConfig:
    kind: str = "none"
    weight: NDArray | None = None
    lam: float | None = None
    barrier: str | None = None

    def __post_init__(self):
        if self.kind not in ("none", "primal", "dual"):
            raise ValueError(f"unknown regularization kind {self.kind!r}")
        if self.kind == "primal":
            W = np.atleast_2d(np.asarray(self.weight, dtype=float))
            if W.shape[0] != W.shape[1] or not np.allclose(W, W.T, atol=1e-12 * np.abs(W).max()):
                raise ValueError("primal weight W must be a symmetric matrix")
            try:
                np.linalg.cholesky(W)
            except np.linalg.LinAlgError:
                raise ValueError("primal weight W must be positive definite") from None
            object.__setattr__(self, "weight", 0.5 * (W + W.T))
        if self.kind == "dual":
            if self.lam is None or not self.lam > 0:
                raise ValueError("barrier weight lambda must be positive")
            if self.barrier not in BARRIERS:
                raise ValueError(f"barrier must be one of {BARRIERS}")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def primal(cls, weight):
        return cls("primal", weight=weight)

    @classmethod
    def dual(cls, lam: float, barrier: str = "b1"):
        return cls("dual", lam=float(lam), barrier=barrier)


@dataclass(frozen=True, eq=False)
class DualVariable:
    """Optimal multiplier: a pseudo-polynomial (toeplitz) or a symmetric matrix."""

    mode: str
    coords: NDArray
    dim: int
    sign: int = 1

    @property
    def q(self) -> PseudoPolynomial:
        if self.mode == "toeplitz":
            return PseudoPolynomial(self.coords)
        return q_from_lambda(self.matrix)

    @property
    def matrix(self) -> NDArray:
        if self.mode == "general":
            return _sym_from_coords(self.coords, self.dim)
        return lambda_from_q(PseudoPolynomial(self.coords))


@dataclass(eq=False)
class DualSolution:
    variable: DualVariable
    phi: SpectralSamples
    Q: SpectralSamples
    residual: NDArray
    objective: float
    dual_value: float
    status: Status
    iterations: int
    deviation: NDArray | None = None
    trace: list[tuple[float, float]] = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual, "fro"))


def q_from_lambda(lam: NDArray) -> PseudoPolynomial:
    """Coefficients of G^* Lambda G for the shift pair."""
    lam = np.asarray(lam, dtype=float)
    m = lam.shape[0]
    q = [np.trace(lam)] + [2.0 * np.trace(lam, offset=k) for k in range(1, m)]
    return PseudoPolynomial(np.array(q))


def lambda_from_q(q: PseudoPolynomial) -> NDArray:
    """Minimum-Frobenius-norm symmetric Lambda with q_from_lambda(Lambda) = q."""
    m = q.degree + 1
    lam = np.eye(m) * q.coeffs[0] / m
    for k in range(1, m):
        band = q.coeffs[k] / (2.0 * (m - k))
        lam += band * (np.eye(m, k=k) + np.eye(m, k=-k))
    return lam


def _sym_from_coords(x: NDArray, m: int) -> NDArray:
    iu = np.triu_indices(m)
    lam = np.zeros((m, m))
    lam[iu] = x
    return lam + np.triu(lam, 1).T


def _sym_basis(m: int) -> list[NDArray]:
    basis = []
    for a, b in zip(*np.triu_indices(m)):
        E = np.zeros((m, m))
        E[a, b] = E[b, a] = 1.0
        basis.append(E)
    return basis


def _toeplitz_matrix(lags: NDArray) -> NDArray:
    return toeplitz(CovarianceWindow(lags)).matrix


def _cosine_scale(m: int) -> NDArray:
    """Diagonal of S: lag coordinates -> orthonormal cosine coordinates."""
    s = np.full(m, np.sqrt(2.0))
    s[0] = 1.0
    return s


def _barrier_terms(kind: str, Q: NDArray):
    """Value, first and second derivative of the nodewise barrier."""
    if kind == "b1":
        u = 1.0 + Q
        return np.log(u), 1.0 / u, -1.0 / u**2
    if kind == "b2":
        u = 1.0 + Q
        return -1.0 / u, 1.0 / u**2, -2.0 / u**3
    if kind == "blog":
        return np.log(Q), 1.0 / Q, -1.0 / Q**2
    raise ValueError(kind)


class DualProblem:
    """Assembled concave dual for one (divergence, prior, data, regime)."""

    def __init__(
        self,
        div: Divergence,
        psi: SpectralSamples,
        data: CovarianceWindow | StateCovariance,
        transfer: TransferSamples | None = None,
        reg: RegularizationConfig | None = None,
        sign: int = 1,
    ):
        reg = reg or RegularizationConfig.none()
        if not psi.is_positive():
            raise ValueError("prior must be strictly positive at every node")
        self.div, self.psi, self.data, self.reg, self.sign = div, psi, data, reg, sign
        self.grid: FrequencyGrid = psi.grid
        self.transfer = transfer

        if isinstance(data, CovarianceWindow):
            if transfer is not None:
                raise ValueError("covariance windows use the shift-pair parametrization; pass no transfer")
            self.mode = "toeplitz"
            n = data.n
            if 2 * n >= self.grid.size:
                raise ValueError(f"order {n} too large for a {self.grid.size}-node grid")
            self.m = n + 1
            self.H = self.grid.cosine_matrix(n)
            self.s = data.lags.copy()
            self.sigma_matrix = toeplitz(data).matrix
            self.direction = np.eye(self.m)[0]
        elif isinstance(data, StateCovariance):
            if transfer is None:
                raise ValueError("a state covariance needs the transfer samples G")
            _check_same_grid(transfer.grid, self.grid)
            if transfer.dim != data.dim:
                raise ValueError(f"Sigma is {data.dim}x{data.dim} but G has dimension {transfer.dim}")
            self.mode = "general"
            self.m = m = data.dim
            a, b = np.triu_indices(m)
            mult = np.where(a == b, 1.0, 2.0)
            self.H = transfer.outer_real()[:, a, b] * mult
            self.s = data.matrix[a, b] * mult
            self.sigma_matrix = data.matrix
            self.direction = np.where(a == b, 1.0 / m, 0.0)
        else:
            raise TypeError(f"unsupported data type {type(data).__name__}")

        self.p = self.H.shape[1]
        self.M = np.zeros((self.p, self.p))
        if reg.kind == "primal":
            W = reg.weight
            if W.shape != (self.m, self.m):
                raise ValueError(f"weight must be {self.m}x{self.m}, got {W.shape}")
            Winv = linalg.inv(W)
            if self.mode == "toeplitz":
                Sinv = 1.0 / _cosine_scale(self.m)
                self.M = 0.5 * Sinv[:, None] * Winv * Sinv[None, :]
            else:
                basis = _sym_basis(self.m)
                for i, Ei in enumerate(basis):
                    for k, Ek in enumerate(basis):
                        self.M[i, k] = 0.5 * np.trace(Ei @ Winv @ Ek)
            self.M = 0.5 * (self.M + self.M.T)
        self.sigma_norm = float(np.linalg.norm(self.sigma_matrix, "fro"))

    # -- nodewise pieces -------------------------------------------------

    def Q(self, x: NDArray) -> NDArray:
        return self.sign * (self.H @ x)

    def margins(self, Q: NDArray) -> NDArray:
        rows = [self.div.margin(Q, self.psi.values)]
        if self.reg.kind == "dual":
            rows.append(Q if self.reg.barrier == "blog" else 1.0 + Q)
        return np.vstack(rows)

    def margin_slopes(self, Q: NDArray) -> NDArray:
        rows = [self.div.margin_slope(Q, self.psi.values)]
        if self.reg.kind == "dual":
            rows.append(np.ones_like(Q))
        return np.vstack(rows)

    def feasible(self, x: NDArray) -> bool:
        with np.errstate(all="ignore"):
            return bool(np.all(self.margins(self.Q(x)) > 0.0))

    # -- objective -------------------------------------------------------

    def value(self, x: NDArray) -> float:
        Q = self.Q(x)
        f = -self.sign * self.s @ x + np.mean(self.div.dual_integrand(Q, self.psi.values))
        f -= 0.5 * x @ self.M @ x
        if self.reg.kind == "dual":
            f += self.reg.lam * np.mean(_barrier_terms(self.reg.barrier, Q)[0])
        return float(f)

    def constant(self, x: NDArray) -> float:
        """Terms dropped from ``value``; added back for absolute dual values."""
        c = float(np.mean(self.div.dual_constant(self.Q(x), self.psi.values)))
        if self.reg.kind == "dual" and self.reg.barrier == "b2":
            c += self.reg.lam
        return c

    def dual_value(self, x: NDArray) -> float:
        return self.value(x) + self.constant(x)

    def _nodal_first(self, Q: NDArray) -> NDArray:
        w = self.div.F(Q, self.psi.values)
        if self.reg.kind == "dual":
            w = w + self.reg.lam * _barrier_terms(self.reg.barrier, Q)[1]
        return w

    def gradient(self, x: NDArray) -> NDArray:
        Q = self.Q(x)
        N = self.grid.size
        return self.sign * (self.H.T @ self._nodal_first(Q) / N - self.s) - self.M @ x

    def hessian(self, x: NDArray) -> NDArray:
        Q = self.Q(x)
        w = self.div.F_prime(Q, self.psi.values)
        if self.reg.kind == "dual":
            w = w + self.reg.lam * _barrier_terms(self.reg.barrier, Q)[2]
        return (self.H.T * w) @ self.H / self.grid.size - self.M

    # -- matrix-valued views ---------------------------------------------

    def to_matrix(self, coord_vector: NDArray) -> NDArray:
        """Matrix whose pairing with the parametrization gives ``coord_vector``."""
        if self.mode == "toeplitz":
            return _toeplitz_matrix(coord_vector)
        m = self.m
        a, b = np.triu_indices(m)
        vals = np.where(a == b, coord_vector, 0.5 * coord_vector)
        return _sym_from_coords(vals, m)

    def residual_matrix(self, x: NDArray) -> NDArray:
        return -self.to_matrix(self.gradient(x))

    def deviation(self, x: NDArray) -> NDArray | None:
        """Optimal moment deviation for primal regularization, None otherwise."""
        if self.reg.kind != "primal":
            return None
        if self.mode == "toeplitz":
            return _toeplitz_matrix(self.sign * self.M @ x)
        lam = _sym_from_coords(x, self.m)
        return self.sign * 0.5 * linalg.solve(self.reg.weight, lam, assume_a="pos")

    def variable(self, x: NDArray) -> DualVariable:
        return DualVariable(self.mode, x.copy(), self.m, self.sign)

    # -- line-search helpers -----------------------------------------------

    def max_step(self, x: NDArray, d: NDArray, fraction: float) -> float:
        """Largest t keeping every margin >= (1 - fraction) * its current value."""
        Q = self.Q(x)
        dQ = self.Q(d)
        m = self.margins(Q)
        rate = self.margin_slopes(Q) * dQ[None, :]
        shrinking = rate < 0
        if not np.any(shrinking):
            return np.inf
        return float(np.min(fraction * m[shrinking] / -rate[shrinking]))

    def initial_point(self) -> NDArray:
        """Maximize the objective along the ray through the identity multiplier."""
        e = self.sign * self.direction
        Q1 = self.Q(e)
        m0 = self.margins(np.zeros_like(Q1))
        slope = self.margin_slopes(np.zeros_like(Q1)) * Q1[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = -m0 / slope
        lo = np.max(bound[slope > 0], initial=-np.inf)
        hi = np.min(bound[slope < 0], initial=np.inf)

        def deriv(c):
            return float(e @ self.gradient(c * e))

        def inside(c):
            return lo < c < hi and self.feasible(c * e)

        if np.isfinite(lo) and np.isfinite(hi):
            c = 0.5 * (lo + hi)
        elif np.isfinite(lo):
            c = lo + max(1.0, abs(lo))
        elif np.isfinite(hi):
            c = hi - max(1.0, abs(hi))
        else:
            c = 0.0

        def walk(start, toward, sign_wanted):
            point, scale = start, max(1.0, abs(start))
            for _ in range(200):
                if np.isfinite(toward):
                    nxt = toward - 0.5 * (toward - point)
                else:
                    nxt = point + np.sign(toward) * scale
                    scale *= 2.0
                if not inside(nxt):
                    return point, False
                point = nxt
                if np.sign(deriv(point)) == sign_wanted:
                    return point, True
            return point, False

        g = deriv(c)
        if g == 0:
            return c * e
        if g > 0:
            other, ok = walk(c, hi, -1.0)
            a, b = c, other
        else:
            other, ok = walk(c, lo, 1.0)
            a, b = other, c
        if not ok:
            return other * e
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            if deriv(mid) > 0:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b) * e


def solve(problem: DualProblem, options: SolverOptions | None = None) -> DualSolution:
    """Damped Newton ascent with fraction-to-boundary and Armijo backtracking."""
    opts = options or SolverOptions()
    if opts.sign != problem.sign:
        raise ValueError("options.sign and problem.sign disagree")
    x = problem.initial_point()
    if not problem.feasible(x):
        raise SolverInternalError("initial point is not dual feasible")
    f = problem.value(x)
    target = opts.tol * (1.0 + problem.sigma_norm)
    cap = UNBOUNDED_CAP * (1.0 + problem.sigma_norm)
    history = [f]
    trace = [(f, 0.0)]
    streak = 0
    steps = 0
    status = Status.MAXITER

    while True:
        g = problem.gradient(x)
        res = np.linalg.norm(problem.to_matrix(g), "fro")
        if res <= target:
            status = Status.CONVERGED
            break
        min_margin = float(np.min(problem.margins(problem.Q(x))))
        if streak >= BOUNDARY_STREAK and min_margin < BOUNDARY_MARGIN:
            status = Status.BOUNDARY
            break
        if (
            np.linalg.norm(x) > cap
            and len(history) > UNBOUNDED_WINDOW
            and np.all(np.diff(history[-UNBOUNDED_WINDOW - 1 :]) > 0)
        ):
            status = Status.UNBOUNDED
            break
        if steps >= opts.max_iter:
            break

        negH = -problem.hessian(x)
        negH = 0.5 * (negH + negH.T)
        shift = opts.damping * max(np.linalg.norm(negH, 2), 1e-300) * np.eye(problem.p)
        try:
            d = linalg.cho_solve(linalg.cho_factor(negH + shift), g)
        except linalg.LinAlgError:
            d = np.linalg.lstsq(negH + shift, g, rcond=None)[0]
        slope = float(g @ d)

        t_max = problem.max_step(x, d, opts.fraction)
        truncated = t_max < 1.0
        t = min(1.0, t_max)
        accepted = False
        if not truncated and slope <= 1e-12 * (1.0 + abs(f)):
            # predicted gain is below the roundoff in f; Armijo cannot judge this step
            xn = x + d
            if problem.feasible(xn):
                fn = problem.value(xn)
                accepted = np.linalg.norm(problem.to_matrix(problem.gradient(xn)), "fro") < res
        for _ in range(0 if accepted else MAX_BACKTRACKS):
            xn = x + t * d
            if problem.feasible(xn):
                fn = problem.value(xn)
                if np.isfinite(fn) and fn >= f + ARMIJO * t * slope:
                    accepted = True
                    break
            t *= opts.backtrack
        if not accepted and not truncated:
            # f is flat to roundoff near the optimum; judge the full step by its residual
            xn = x + d
            if problem.feasible(xn):
                fn = problem.value(xn)
                accepted = np.linalg.norm(problem.to_matrix(problem.gradient(xn)), "fro") < res
        if not accepted:
            # boundary iterates also end here once margins reach machine precision
            if truncated and min_margin < BOUNDARY_MARGIN:
                status = Status.BOUNDARY
            log.debug("line search stalled after %d steps (residual %.3e)", steps, res)
            break

        streak = streak + 1 if truncated else 0
        x, f = xn, fn
        steps += 1
        history.append(f)
        trace.append((f, t))
        if f > 1e300:
            status = Status.UNBOUNDED
            break

    if status == Status.UNBOUNDED and problem.reg.kind == "primal":
        raise SolverInternalError("primal-regularized dual is strictly concave but looked unbounded")

    Q = problem.Q(x)
    phi = problem.div.F(Q, problem.psi.values)
    return DualSolution(
        variable=problem.variable(x),
        phi=SpectralSamples(problem.grid, phi),
        Q=SpectralSamples(problem.grid, Q),
        residual=problem.residual_matrix(x),
        objective=f,
        dual_value=problem.dual_value(x),
        status=status,
        iterations=steps,
        deviation=problem.deviation(x),
        trace=trace,
    )


def solve_exact(div, psi, data, transfer=None, options=None) -> DualSolution:
    opts = options or SolverOptions()
    return solve(DualProblem(div, psi, data, transfer, None, opts.sign), opts)


def solve_primal_regularized(div, psi, data, transfer=None, weight=1.0, options=None) -> DualSolution:
    """``weight`` is a matrix W or a scalar w meaning w * I."""
    opts = options or SolverOptions()
    problem = DualProblem(div, psi, data, transfer, None, opts.sign)
    W = np.asarray(weight, dtype=float)
    if W.ndim == 0:
        W = float(W) * np.eye(problem.m)
    problem = DualProblem(div, psi, data, transfer, RegularizationConfig.primal(W), opts.sign)
    return solve(problem, opts)


def solve_dual_regularized(div, psi, data, transfer=None, lam=1.0, barrier="b1", options=None) -> DualSolution:
    opts = options or SolverOptions()
    reg = RegularizationConfig.dual(lam, barrier)
    return solve(DualProblem(div, psi, data, transfer, reg, opts.sign), opts)


def solve_regime(div, psi, data, transfer=None, reg=None, options=None) -> DualSolution:
    opts = options or SolverOptions()
    return solve(DualProblem(div, psi, data, transfer, reg, opts.sign), opts)


def stationarity_residual(
    sol: DualSolution,
    div: Divergence,
    psi: SpectralSamples,
    data: CovarianceWindow | StateCovariance,
    transfer: TransferSamples | None = None,
    reg: RegularizationConfig | None = None,
) -> NDArray:
    """Sigma - int G F G^* minus the regime's right-hand side, from first principles."""
    from .moments import state_covariance_from_psd

    reg = reg or RegularizationConfig.none()
    var = sol.variable
    sign = var.sign
    grid = psi.grid
    if var.mode == "toeplitz":
        Q = sign * (grid.cosine_matrix(var.dim - 1) @ var.coords)
    else:
        G = transfer.values
        Q = sign * np.einsum("ja,ab,jb->j", G.conj(), var.matrix, G).real
    phi = SpectralSamples(grid, div.F(Q, psi.values))

    if isinstance(data, CovarianceWindow):
        n = data.n
        lags = data.lags - fourier_coeffs(phi, n).lags
        if reg.kind == "primal":
            Sinv = 1.0 / _cosine_scale(n + 1)
            delta = 0.5 * Sinv * linalg.solve(reg.weight, Sinv * var.coords, assume_a="pos")
            lags = lags + sign * delta
        elif reg.kind == "dual":
            b1 = _barrier_terms(reg.barrier, Q)[1]
            lags = lags - reg.lam * fourier_coeffs(SpectralSamples(grid, b1), n).lags
        return _toeplitz_matrix(lags)

    R = data.matrix - state_covariance_from_psd(transfer, phi).matrix
    if reg.kind == "primal":
        lam = var.matrix
        Winv = linalg.inv(reg.weight)
        R = R + sign * 0.25 * (lam @ Winv + Winv @ lam)
    elif reg.kind == "dual":
        b1 = _barrier_terms(reg.barrier, Q)[1]
        R = R - reg.lam * state_covariance_from_psd(transfer, SpectralSamples(grid, b1)).matrix
    return R
