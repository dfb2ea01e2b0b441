"""Large-index eigenvalue asymptotics and measured decay of their errors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import linregress

from .coefficients import SQRT3, CoefficientPair
from .errors import DegenerateFit
from .propagator import NU

ORDERS = ("O0", "O1", "O2", "O3")
CLAIMED_EXPONENT = {"O0": 1.0, "O1": 0.5, "O2": -0.5, "O3": -1.5}


@dataclass(frozen=True)
class AsymptoticPrediction:
    n: int
    order: str
    value: float
    claimed_error_exponent: float


def _positive_value(pair: CoefficientPair, n: int, order: str) -> float:
    p, q = pair.p, pair.q
    vn = NU * n
    value = vn ** 3
    if order == "O0":
        return value
    value += -2.0 * vn * p.mean + vn * p.tilde_coeff(n)
    if order == "O1":
        return value
    value += q.mean - q.tilde_coeff(n)
    if order == "O2":
        return value
    # kept as stated; the exact constant-p spectrum carries no n^{-1} term (see the tests)
    return value + 4.0 * p.mean ** 2 / (3.0 * vn)


def predict(pair: CoefficientPair, n: int, order: str = "O3") -> AsymptoticPrediction:
    """Asymptotic value of ``mu_n`` at the requested order.

    Negative indices go through the reflection ``mu_{-n}(p, q) = -mu_n(p(-x), -q(-x))``.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    n = int(n)
    if n == 0:
        raise ValueError("eigenvalue indices are nonzero")
    if n > 0:
        value = _positive_value(pair, n, order)
    else:
        value = -_positive_value(pair.reflected(), -n, order)
    return AsymptoticPrediction(n, order, float(value), CLAIMED_EXPONENT[order])


def predict_o2_hat(pair: CoefficientPair, n: int) -> float:
    """Second-order formula written with hat coefficients of ``p'`` and ``q`` (``n >= 1``)."""
    if n < 1:
        raise ValueError("hat form is stated for n >= 1")
    dp = pair.p.derivative(1).hat_coeff(n)
    qh = pair.q.hat_coeff(n)
    vn = NU * n
    return float(vn ** 3 - 2.0 * vn * pair.p.mean + pair.q.mean
                 + (dp / 3.0 - qh).real + (qh + dp).imag / SQRT3)


def residual_series(pair: CoefficientPair, order: str, n_range: Iterable[int],
                    computed: dict | None = None) -> list[tuple[int, float]]:
    """``mu_n - predict(n)`` over ``n_range``.

    ``computed`` may map indices to already located eigenvalues; missing ones
    are found with the batched disk Newton solver.
    """
    from .spectrum import locate_many

    ns = [int(n) for n in n_range]
    have = dict(computed or {})
    missing = [n for n in ns if n not in have]
    if missing:
        for rec in locate_many(pair, missing):
            have[rec.index] = rec.value
    out = []
    for n in ns:
        mu = complex(have[n])
        out.append((n, float(mu.real - predict(pair, n, order).value)))
    return out


@dataclass(frozen=True)
class DecayFit:
    slope: float
    stderr: float
    intercept: float
    points: int


def decay_fit(residuals: Sequence[tuple[int, float]], min_points: int = 6) -> DecayFit:
    """Least-squares slope of ``log|r|`` against ``log|n|``."""
    ns = np.array([abs(n) for n, _ in residuals], dtype=float)
    rs = np.abs(np.array([r for _, r in residuals], dtype=float))
    if ns.size < min_points:
        raise DegenerateFit(f"need at least {min_points} points, got {ns.size}")
    if np.any(rs < 1e-300) or not np.all(np.isfinite(rs)):
        raise DegenerateFit("residuals underflow: decay better than measurable")
    fit = linregress(np.log(ns), np.log(rs))
    return DecayFit(float(fit.slope), float(fit.stderr), float(fit.intercept), int(ns.size))
