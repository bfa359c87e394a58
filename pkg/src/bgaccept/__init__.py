"""Bilateral gamma acceptance sets: distribution core, dominance, distortions,
boundary regression, spectra, a Lucas-tree equilibrium and conic conditions."""

from .bg_core import (
    BGParams,
    GainLossMoments,
    MartingaleDrift,
    cdf,
    char_function,
    expected_exp,
    levy_density,
    martingale_drift,
    moments_from_params,
    params_from_moments,
    reward_rate,
    sample,
)
from .errors import (
    ConvergenceError,
    DivergenceError,
    HypothesisError,
    NumericalError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "BGParams",
    "GainLossMoments",
    "MartingaleDrift",
    "cdf",
    "char_function",
    "expected_exp",
    "levy_density",
    "martingale_drift",
    "moments_from_params",
    "params_from_moments",
    "reward_rate",
    "sample",
    "ConvergenceError",
    "DivergenceError",
    "HypothesisError",
    "NumericalError",
    "ValidationError",
]
