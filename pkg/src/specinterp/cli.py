"""Command-line interface: synthesize data, estimate spectra, sweep
regularization weights and rerun the worked examples.

Exit codes: 0 Converged, 1 usage error, 2 Boundary, 3 Unbounded, 4 MaxIter,
5 a reproduction check failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import io, reproduce
from .divergences import REGISTRY, get_divergence
from .dual_solvers import (
    BARRIERS,
    RegularizationConfig,
    SolverOptions,
    Status,
    solve_regime,
)
from .moments import (
    CovarianceWindow,
    StateCovariance,
    sample_covariances,
    shift_pair,
    state_covariance_from_data,
    state_covariance_from_psd,
)
from .spectral_core import (
    SpectralSamples,
    eval_transfer,
    fourier_coeffs,
    make_grid,
)

log = logging.getLogger("specinterp")

EXIT_USAGE = 1
EXIT_CHECK_FAILED = 5


class UsageError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _ar_polynomial(ar) -> np.ndarray:
    return np.r_[1.0, -np.asarray(ar, dtype=float)]


def _check_stable(ar) -> None:
    roots = np.roots(_ar_polynomial(ar)) if len(ar) else np.array([])
    if roots.size and np.max(np.abs(roots)) >= 1.0:
        raise UsageError(f"AR polynomial is not stable (max root modulus {np.max(np.abs(roots)):.4g})")


@dataclass(frozen=True)
class PriorSpec:
    """Prior density: a positive constant, sampled values from a file, or an ARMA model."""

    kind: str
    constant: float = 1.0
    path: str | None = None
    ar: tuple[float, ...] = ()
    ma: tuple[float, ...] = ()
    gain: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "PriorSpec":
        text = text.strip()
        if text.startswith("file:"):
            return cls("file", path=text[5:])
        if text.startswith("arma:"):
            fields = {}
            for part in text[5:].split(";"):
                if part.strip():
                    key, _, value = part.partition("=")
                    fields[key.strip()] = value
            unknown = set(fields) - {"ar", "ma", "gain"}
            if unknown:
                raise UsageError(f"unknown ARMA prior fields {sorted(unknown)}")
            spec = cls(
                "arma",
                ar=_floats(fields.get("ar", "")),
                ma=_floats(fields.get("ma", "")),
                gain=float(fields.get("gain", 1.0)),
            )
            _check_stable(spec.ar)
            return spec
        try:
            c = float(text)
        except ValueError:
            raise UsageError(f"cannot parse prior {text!r}") from None
        if not c > 0:
            raise UsageError("constant prior must be positive")
        return cls("constant", constant=c)

    def samples(self, grid) -> SpectralSamples:
        if self.kind == "constant":
            return SpectralSamples.constant(grid, self.constant)
        if self.kind == "file":
            values = io.read_series(self.path).samples
            if values.size != grid.size:
                raise UsageError(f"prior file has {values.size} samples, grid has {grid.size}")
        else:
            _, h = signal.freqz(np.r_[1.0, self.ma], _ar_polynomial(self.ar), worN=grid.theta)
            values = self.gain**2 * np.abs(h) ** 2
        psi = SpectralSamples(grid, values)
        if not psi.is_positive():
            raise UsageError("prior must be strictly positive at every node")
        return psi


@dataclass(frozen=True)
class RunConfig:
    divergence: str
    prior: PriorSpec
    order: int
    grid: int
    reg: str
    weight: float
    lam: float
    barrier: str
    options: SolverOptions
    seed: int
    input: str | None = None
    input_format: str = "series"
    estimator: str = "biased"
    sigma: str | None = None
    system: str | None = None
    output: str = "spectrum.csv"
    report: str = "report.txt"
    weights: tuple[float, ...] = field(default=())
    jobs: int = 1

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        if args.divergence not in REGISTRY:
            raise UsageError(f"unknown divergence {args.divergence!r}")
        if args.grid < 16 or args.grid % 2:
            raise UsageError("grid size must be even and at least 16")
        if args.order < 0 or 2 * args.order >= args.grid:
            raise UsageError("order must satisfy 0 <= n < N/2")
        if not args.weight > 0 or not args.lam > 0:
            raise UsageError("regularization weights must be positive")
        try:
            options = SolverOptions(tol=args.tol, max_iter=args.max_iter)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        weights = getattr(args, "weights", ())
        if any(not w > 0 for w in weights):
            raise UsageError("sweep weights must be positive")
        return cls(
            divergence=args.divergence,
            prior=PriorSpec.parse(args.prior),
            order=args.order,
            grid=args.grid,
            reg=args.reg,
            weight=args.weight,
            lam=args.lam,
            barrier=args.barrier,
            options=options,
            seed=args.seed,
            input=args.input,
            input_format=args.input_format,
            estimator=args.estimator,
            sigma=args.sigma,
            system=args.system,
            output=args.output,
            report=args.report,
            weights=tuple(weights),
            jobs=getattr(args, "jobs", 1),
        )


@dataclass(frozen=True)
class Problem:
    psi: SpectralSamples
    data: CovarianceWindow | StateCovariance
    transfer: object | None

    @property
    def dim(self) -> int:
        return self.data.n + 1 if isinstance(self.data, CovarianceWindow) else self.data.dim


def load_problem(cfg: RunConfig) -> Problem:
    """Covariance lists and bare series give toeplitz mode; Sigma or a system gives general mode."""
    grid = make_grid(cfg.grid)
    psi = cfg.prior.samples(grid)
    system = io.read_system(cfg.system) if cfg.system else None
    if cfg.sigma:
        if cfg.input:
            raise UsageError("give either --input or --sigma, not both")
        sigma = io.read_sigma(cfg.sigma)
        system = system or shift_pair(sigma.dim - 1)
        if system.dim != sigma.dim:
            raise UsageError(f"system has {system.dim} states but sigma is {sigma.dim} x {sigma.dim}")
        return Problem(psi, sigma, eval_transfer(system, grid))
    if not cfg.input:
        raise UsageError("one of --input or --sigma is required")
    if cfg.input_format == "covariances":
        r = io.read_covariances(cfg.input)
        if 2 * r.n >= cfg.grid:
            raise UsageError("covariance window too long for the grid")
        if system is not None:
            raise UsageError("a covariance list implies the shift pair; drop --system")
        return Problem(psi, r, None)
    y = io.read_series(cfg.input)
    if system is not None:
        return Problem(psi, state_covariance_from_data(system, y), eval_transfer(system, grid))
    return Problem(psi, sample_covariances(y, cfg.order, cfg.estimator), None)


def _fitted_moments(problem: Problem, phi: SpectralSamples) -> np.ndarray:
    if isinstance(problem.data, CovarianceWindow):
        return fourier_coeffs(phi, problem.data.n).lags
    return state_covariance_from_psd(problem.transfer, phi).matrix


def _targets(problem: Problem) -> np.ndarray:
    if isinstance(problem.data, CovarianceWindow):
        return problem.data.lags
    return problem.data.matrix


def _reg_config(cfg: RunConfig, problem: Problem, weight=None) -> RegularizationConfig:
    if cfg.reg == "primal":
        w = cfg.weight if weight is None else weight
        return RegularizationConfig.primal(w * np.eye(problem.dim))
    if cfg.reg == "dual":
        return RegularizationConfig.dual(cfg.lam if weight is None else weight, cfg.barrier)
    return RegularizationConfig.none()


def _solve(cfg: RunConfig, problem: Problem, weight=None):
    div = get_divergence(cfg.divergence)
    reg = _reg_config(cfg, problem, weight)
    sol = solve_regime(div, problem.psi, problem.data, problem.transfer, reg, cfg.options)
    log.info("%s/%s weight=%s: %s after %d iterations, residual %.3e",
             cfg.divergence, reg.kind, weight, sol.status.value, sol.iterations, sol.residual_norm)
    return sol


def cmd_synth(args) -> int:
    ar, ma = args.ar, args.ma
    _check_stable(ar)
    if args.length < 1:
        raise UsageError("length must be positive")
    poles = np.abs(np.roots(_ar_polynomial(ar))) if len(ar) else np.array([0.0])
    slowest = float(np.max(poles))
    # long enough for the start-up transient to decay below double precision
    burn = 100 + len(ma) + (int(math.ceil(-37.0 / math.log(slowest))) if slowest > 0 else 0)
    rng = np.random.default_rng(args.seed)
    e = rng.standard_normal(args.length + burn)
    y = signal.lfilter(args.gain * np.r_[1.0, ma], _ar_polynomial(ar), e)[burn:]
    io.write_series(args.output, y)
    log.info("synthesized %d samples after %d burn-in steps", args.length, burn)
    return 0


def cmd_estimate(args) -> int:
    cfg = RunConfig.from_args(args)
    problem = load_problem(cfg)
    div = get_divergence(cfg.divergence)
    sol = _solve(cfg, problem)
    grid = problem.psi.grid
    io.write_spectrum(cfg.output, grid.theta, sol.phi.values, problem.psi.values, sol.Q.values)
    fitted = _fitted_moments(problem, sol.phi)
    target = _targets(problem)
    entries = {
        "status": sol.status.value,
        "divergence": cfg.divergence,
        "regularization": cfg.reg,
        "mode": "toeplitz" if isinstance(problem.data, CovarianceWindow) else "general",
        "objective": sol.dual_value,
        "iterations": sol.iterations,
        "residual_norm": sol.residual_norm,
        "moment_defect_norm": float(np.linalg.norm(fitted - target)),
        "matched_moments": fitted,
        "target_moments": target,
        "distance": div.distance(sol.phi, problem.psi),
        "multiplier": sol.variable.coords,
    }
    if sol.deviation is not None:
        entries["deviation"] = sol.deviation
        entries["deviation_norm"] = float(np.linalg.norm(sol.deviation))
    io.write_report(cfg.report, entries)
    if sol.status != Status.CONVERGED:
        print(sol.status.value, file=sys.stderr)
    return sol.status.exit_code


def cmd_sweep(args) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.reg == "none":
        raise UsageError("a sweep needs --reg primal or --reg dual")
    if not cfg.weights:
        raise UsageError("--weights is empty")
    problem = load_problem(cfg)
    div = get_divergence(cfg.divergence)
    target = _targets(problem)
    exact = None
    if cfg.reg == "dual":
        exact = solve_regime(div, problem.psi, problem.data, problem.transfer, None, cfg.options)
        if exact.status != Status.CONVERGED:
            exact = None

    def row(weight):
        sol = _solve(cfg, problem, weight)
        defect = _fitted_moments(problem, sol.phi) - target
        dev = float(np.linalg.norm(sol.deviation)) if sol.deviation is not None else float("nan")
        sup = float(np.max(np.abs(sol.phi.values - exact.phi.values))) if exact else float("nan")
        return (weight, sol.status.value, dev, float(np.linalg.norm(defect)),
                div.distance(sol.phi, problem.psi), float(np.max(np.abs(defect))), sup)

    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        rows = list(pool.map(row, cfg.weights))

    order = np.argsort([r[0] for r in rows], kind="stable")
    ordered = [rows[i] for i in order]
    dev = np.array([r[2] for r in ordered])
    defect = np.array([r[3] for r in ordered])
    sup = np.array([r[6] for r in ordered])
    if cfg.reg == "primal":
        diagnostics = {"deviation_nonincreasing_in_weight": bool(np.all(np.diff(dev) <= 1e-12 * (1 + dev[:-1])))}
    else:
        diagnostics = {
            "defect_nondecreasing_in_lambda": bool(np.all(np.diff(defect) >= -1e-12 * (1 + defect[:-1]))),
            "sup_to_exact_nondecreasing_in_lambda": bool(exact is not None and np.all(np.diff(sup) >= 0)),
        }
    diagnostics["all_converged"] = all(r[1] == Status.CONVERGED.value for r in rows)
    diagnostics["statuses"] = sorted({r[1] for r in rows})

    lines = ["weight,status,deviation_norm,defect_norm,distance,moment_defect,sup_to_exact"]
    lines += [f"{w:.17g},{s},{a:.17g},{b:.17g},{c:.17g},{d:.17g},{e:.17g}" for w, s, a, b, c, d, e in rows]
    lines += [f"# {k} = {v}" for k, v in diagnostics.items()]
    text = "\n".join(lines) + "\n"
    if cfg.output == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    return 0


def _run_checks(checks, report) -> int:
    text = "".join(c.line() + "\n" for c in checks)
    if report == "-":
        sys.stdout.write(text)
    else:
        with open(report, "w") as fh:
            fh.write(text)
    return 0 if all(c.passed is not False for c in checks) else EXIT_CHECK_FAILED


def cmd_example1(args) -> int:
    return _run_checks(reproduce.example1(args.seed, args.grid), args.report)


def cmd_example2(args) -> int:
    return _run_checks(reproduce.example2(args.seed, args.grid), args.report)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--divergence", default="kl", help=f"one of {', '.join(REGISTRY)}")
    p.add_argument("--prior", default="1", help="constant, file:PATH or arma:ar=..;ma=..;gain=..")
    p.add_argument("--order", type=int, default=2, help="covariance lags n for series input")
    p.add_argument("--grid", type=int, default=512, help="number of frequency nodes N")
    p.add_argument("--reg", choices=("none", "primal", "dual"), default="none")
    p.add_argument("--weight", type=float, default=1.0, help="primal weight w (W = w I)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="barrier weight")
    p.add_argument("--barrier", choices=BARRIERS, default="b1")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help="time series or covariance list")
    p.add_argument("--input-format", choices=("series", "covariances"), default="series")
    p.add_argument("--estimator", choices=("biased", "unbiased"), default="biased")
    p.add_argument("--sigma", help="state covariance matrix file")
    p.add_argument("--system", help="file holding the A block then the B block")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specinterp", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file; keys are flag names")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="simulate an ARMA process")
    p.add_argument("--ar", type=_floats, default=(), help="a_1..a_p in y_t = sum a_k y_{t-k} + ...")
    p.add_argument("--ma", type=_floats, default=(), help="b_1..b_q")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", default="series.txt")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="fit a spectrum to covariance data")
    _solver_flags(p)
    p.add_argument("--output", default="spectrum.csv")
    p.add_argument("--report", default="report.txt")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="solve for a list of regularization weights")
    _solver_flags(p)
    p.add_argument("--weights", type=_floats, default=(1.0, 10.0, 100.0))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", default="sweep.csv")
    p.add_argument("--report", default="-", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_sweep)

    for name, func in (("example1", cmd_example1), ("example2", cmd_example2)):
        p = sub.add_parser(name, help="rerun the checks of worked example " + name[-1])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid", type=int, default=1024)
        p.add_argument("--report", default="-")
        p.set_defaults(func=func)
    return parser


def _with_config(argv: list[str]) -> list[str]:
    """Insert config-file entries as flags right after the subcommand so the command line wins."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        entries = io.read_config(known.config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    rest = list(rest)
    pos = next((i for i, tok in enumerate(rest) if not tok.startswith("-")), None)
    if pos is None:
        return rest
    flags = [tok for k, v in entries.items() for tok in (f"--{k}", v)]
    return rest[: pos + 1] + flags + rest[pos + 1 :]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _with_config(argv)
    except UsageError as exc:
        print(f"specinterp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"specinterp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
