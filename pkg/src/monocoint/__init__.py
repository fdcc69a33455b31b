"""Localized monotone least-squares estimation for nonlinear cointegration.

Model: ``Z_t = f0(X_t) + W_t`` with ``f0`` non-increasing and ``X`` a Harris
recurrent Markov chain (positive or beta-null recurrent).
"""

from .chains import (AR1, BetaNull, ChainSpec, GaussianRandomWalk, LazySRW,
                     PositiveRecurrent, Window, simulate, u_of_n)
from .estimator import (LocalizedFit, TimeSeriesSample, estimate_at,
                        estimate_inverse, fit_localized)
from .isotonic import fit_monotone_lse, pava_dec
from .stepfn import InverseResult, MonotoneStepFn, make_step_fn

__version__ = "0.1.0"

__all__ = [
    "AR1",
    "BetaNull",
    "ChainSpec",
    "GaussianRandomWalk",
    "InverseResult",
    "LazySRW",
    "LocalizedFit",
    "MonotoneStepFn",
    "PositiveRecurrent",
    "TimeSeriesSample",
    "Window",
    "estimate_at",
    "estimate_inverse",
    "fit_localized",
    "fit_monotone_lse",
    "make_step_fn",
    "pava_dec",
    "simulate",
    "u_of_n",
]
