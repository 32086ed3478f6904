"""Plain-text file formats used by the command line."""

from __future__ import annotations

import configparser
import json
from pathlib import Path

import numpy as np

from .moments import CovarianceWindow, StateCovariance, TimeSeries
from .spectral_core import StateSpacePair


def _read_numbers(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    text = " ".join(line.partition("#")[0] for line in lines)
    try:
        return np.array([float(tok) for tok in text.split()])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def read_series(path) -> TimeSeries:
    return TimeSeries(_read_numbers(path))


def write_series(path, y: np.ndarray) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in np.asarray(y, dtype=float)))


def read_covariances(path) -> CovarianceWindow:
    return CovarianceWindow(_read_numbers(path))


def read_matrices(path, count: int | None = None) -> list[np.ndarray]:
    """Consecutive blocks, each a "rows cols" header followed by row-major entries."""
    vals = _read_numbers(path)
    out, pos = [], 0
    while pos < vals.size:
        if pos + 2 > vals.size:
            raise ValueError(f"{path}: truncated matrix header")
        rows, cols = vals[pos], vals[pos + 1]
        if rows != int(rows) or cols != int(cols) or rows < 1 or cols < 1:
            raise ValueError(f"{path}: bad matrix header {rows:g} {cols:g}")
        rows, cols = int(rows), int(cols)
        body = vals[pos + 2 : pos + 2 + rows * cols]
        if body.size != rows * cols:
            raise ValueError(f"{path}: expected {rows * cols} entries, found {body.size}")
        out.append(body.reshape(rows, cols))
        pos += 2 + rows * cols
    if count is not None and len(out) != count:
        raise ValueError(f"{path}: expected {count} matrices, found {len(out)}")
    return out


def write_matrix(path, M: np.ndarray, append: bool = False) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in M]
    with open(path, "a" if append else "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sigma(path) -> StateCovariance:
    return StateCovariance(read_matrices(path, 1)[0])


def read_system(path) -> StateSpacePair:
    """An A block followed by a B block (m x 1 or 1 x m)."""
    A, B = read_matrices(path, 2)
    return StateSpacePair(A, B.reshape(-1))


def write_spectrum(path, theta, phi, psi, q) -> None:
    table = np.column_stack([theta, phi, psi, q])
    np.savetxt(path, table, delimiter=",", header="theta,phi,psi,q", comments="", fmt="%.17g")


def read_spectrum(path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name]) for name in data.dtype.names}


def _encode(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_report(path, entries: dict) -> None:
    """``key = value`` lines with JSON-encoded values."""
    text = "".join(f"{k} = {json.dumps(_encode(v))}\n" for k, v in entries.items())
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = json.loads(value)
    return out


def read_config(path) -> dict[str, str]:
    """Flag-named ``key = value`` pairs; an optional [run] section header is accepted."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser.read_string(text)
    out = {}
    for section in parser.sections():
        out.update(parser[section])
    return {k.replace("_", "-"): v for k, v in out.items()}
