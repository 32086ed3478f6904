"""Spectral estimation by (regularized) covariance interpolation."""

from .divergences import (
    Divergence,
    get_divergence,
    hellinger,
    itakura_saito,
    kullback_leibler,
    quadratic,
)
from .dual_solvers import (
    DualSolution,
    RegularizationConfig,
    SolverInternalError,
    SolverOptions,
    Status,
    solve_dual_regularized,
    solve_exact,
    solve_primal_regularized,
    solve_regime,
    stationarity_residual,
)
from .moments import (
    CovarianceWindow,
    StateCovariance,
    TimeSeries,
    sample_covariances,
    shift_pair,
    state_covariance_from_data,
    state_covariance_from_psd,
    toeplitz,
)
from .spectral_core import (
    FrequencyGrid,
    PseudoPolynomial,
    SpectralSamples,
    StateSpacePair,
    TransferSamples,
    eval_pseudopoly,
    eval_transfer,
    fourier_coeffs,
    inner_product,
    make_grid,
)

__all__ = [
    "CovarianceWindow",
    "Divergence",
    "DualSolution",
    "FrequencyGrid",
    "PseudoPolynomial",
    "RegularizationConfig",
    "SolverInternalError",
    "SolverOptions",
    "SpectralSamples",
    "StateCovariance",
    "StateSpacePair",
    "Status",
    "TimeSeries",
    "TransferSamples",
    "eval_pseudopoly",
    "eval_transfer",
    "fourier_coeffs",
    "get_divergence",
    "hellinger",
    "inner_product",
    "itakura_saito",
    "kullback_leibler",
    "make_grid",
    "quadratic",
    "sample_covariances",
    "shift_pair",
    "solve_dual_regularized",
    "solve_exact",
    "solve_primal_regularized",
    "solve_regime",
    "state_covariance_from_data",
    "state_covariance_from_psd",
    "stationarity_residual",
    "toeplitz",
]
