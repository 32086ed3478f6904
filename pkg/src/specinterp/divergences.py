"""Quasi-distances between spectra, as pointwise function bundles.

Convention: the Lagrangian is D(phi||psi) + tr{Lambda (int G phi G^* - Sigma)},
so each node solves min_phi d(phi, psi) + q phi.  ``F`` is that minimizer,
``dual_integrand`` its optimal value with ``dual_constant`` removed, and the
envelope identity d/dq dual_integrand = F holds for every entry.

All margins are affine in q; ``margin_slope`` is d(margin)/dq.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Pointwise = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Divergence:
    name: str
    d: Pointwise
    d_grad: Pointwise
    F: Pointwise
    F_prime: Pointwise
    dual_integrand: Pointwise
    dual_constant: Pointwise
    margin: Pointwise
    margin_slope: Pointwise

    def domain(self, q, psi):
        return self.margin(q, psi) > 0.0

    def distance(self, phi, psi) -> float:
        """D(phi||psi) on a grid: mean of the integrand over the nodes."""
        phi = getattr(phi, "values", phi)
        psi = getattr(psi, "values", psi)
        return float(np.mean(self.d(np.asarray(phi), np.asarray(psi))))


def _a(x):
    return np.asarray(x, dtype=float)


def kullback_leibler() -> Divergence:
    return Divergence(
        name="kl",
        d=lambda phi, psi: _a(psi) * np.log(_a(psi) / _a(phi)),
        d_grad=lambda phi, psi: -_a(psi) / _a(phi),
        F=lambda q, psi: _a(psi) / _a(q),
        F_prime=lambda q, psi: -_a(psi) / _a(q) ** 2,
        dual_integrand=lambda q, psi: _a(psi) * np.log(_a(q)),
        dual_constant=lambda q, psi: _a(psi) + 0.0 * _a(q),
        margin=lambda q, psi: _a(q) + 0.0 * _a(psi),
        margin_slope=lambda q, psi: np.ones(np.broadcast(_a(q), _a(psi)).shape),
    )


def quadratic() -> Divergence:
    return Divergence(
        name="quadratic",
        d=lambda phi, psi: 0.5 * (_a(phi) - _a(psi)) ** 2 / _a(psi),
        d_grad=lambda phi, psi: (_a(phi) - _a(psi)) / _a(psi),
        F=lambda q, psi: _a(psi) * (1.0 - _a(q)),
        F_prime=lambda q, psi: -_a(psi) + 0.0 * _a(q),
        dual_integrand=lambda q, psi: -0.5 * _a(psi) * (_a(q) ** 2 - 2.0 * _a(q)),
        dual_constant=lambda q, psi: 0.0 * _a(q) * _a(psi),
        margin=lambda q, psi: 1.0 - _a(q) + 0.0 * _a(psi),
        margin_slope=lambda q, psi: -np.ones(np.broadcast(_a(q), _a(psi)).shape),
    )


def itakura_saito() -> Divergence:
    return Divergence(
        name="itakura-saito",
        d=lambda phi, psi: _a(phi) / _a(psi) - np.log(_a(phi) / _a(psi)) - 1.0,
        d_grad=lambda phi, psi: 1.0 / _a(psi) - 1.0 / _a(phi),
        F=lambda q, psi: _a(psi) / (1.0 + _a(psi) * _a(q)),
        F_prime=lambda q, psi: -_a(psi) ** 2 / (1.0 + _a(psi) * _a(q)) ** 2,
        dual_integrand=lambda q, psi: np.log1p(_a(psi) * _a(q)),
        dual_constant=lambda q, psi: 0.0 * _a(q) * _a(psi),
        margin=lambda q, psi: 1.0 + _a(psi) * _a(q),
        margin_slope=lambda q, psi: _a(psi) + 0.0 * _a(q),
    )


def hellinger() -> Divergence:
    return Divergence(
        name="hellinger",
        d=lambda phi, psi: (np.sqrt(_a(phi)) - np.sqrt(_a(psi))) ** 2,
        d_grad=lambda phi, psi: 1.0 - np.sqrt(_a(psi) / _a(phi)),
        F=lambda q, psi: _a(psi) / (1.0 + _a(q)) ** 2,
        F_prime=lambda q, psi: -2.0 * _a(psi) / (1.0 + _a(q)) ** 3,
        dual_integrand=lambda q, psi: _a(psi) * _a(q) / (1.0 + _a(q)),
        dual_constant=lambda q, psi: 0.0 * _a(q) * _a(psi),
        margin=lambda q, psi: 1.0 + _a(q) + 0.0 * _a(psi),
        margin_slope=lambda q, psi: np.ones(np.broadcast(_a(q), _a(psi)).shape),
    )


REGISTRY: dict[str, Callable[[], Divergence]] = {
    "kl": kullback_leibler,
    "quadratic": quadratic,
    "itakura-saito": itakura_saito,
    "hellinger": hellinger,
}


def get_divergence(name: str) -> Divergence:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown divergence {name!r}; choose from {sorted(REGISTRY)}") from None
