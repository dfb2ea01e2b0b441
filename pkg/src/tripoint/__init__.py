"""Spectral toolkit for a third-order operator with three-point Dirichlet conditions."""

from .coefficients import CoefficientPair, PeriodicCoefficient, pair_p1

__all__ = ["CoefficientPair", "PeriodicCoefficient", "pair_p1"]
__version__ = "0.1.0"
