"""Exact power-series toolkit for one-parameter extensions of Ising correlations."""

from ._backend import BACKEND, Q, fmt_q, to_q
from .series import ParamPoly, PrefactoredSeries, Series, sigma_transform

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Q",
    "ParamPoly",
    "PrefactoredSeries",
    "Series",
    "fmt_q",
    "sigma_transform",
    "to_q",
]
