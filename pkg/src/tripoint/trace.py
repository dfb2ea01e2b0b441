"""Trace identity for shifted coefficients and recovery of one coefficient.

Shifting both coefficients by ``t`` moves every eigenvalue, but the total
displacement ``sum_n (mu_n(t) - mu_n(0))`` equals ``V(0) - V(t)`` with
``V = q - p'/3``.  Low eigenvalues, which may be complex or collide, enter
only through a contour cluster sum; the rest are located one by one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .coefficients import CoefficientPair, PeriodicCoefficient
from .errors import InsufficientData, NoConvergence, NonIntegerWinding, PeriodicityViolation
from .spectrum import Contour, PairCharacteristic, cluster_sum, locate_many, winding_count

METHODS = ("hybrid", "contour", "per-index")
ONSET_PROBE = 12


def potential_V(pair: CoefficientPair, x):
    """``V = q - p'/3``."""
    return pair.potential()(x)


def simplicity_onset(pair: CoefficientPair, upto: int = ONSET_PROBE) -> int:
    """Largest ``k <= upto`` whose disk of index ``k`` or ``-k`` does not hold exactly one zero."""
    ch = PairCharacteristic(pair)
    for k in range(upto, 0, -1):
        if winding_count(ch, Contour.disk(k)) != 1 or winding_count(ch, Contour.disk(-k)) != 1:
            return k
    return 0


@dataclass
class ShiftSpectrum:
    """Spectral data of one shifted pair needed by the trace sums."""

    t: float
    N: int
    n0: int
    inner_sum: complex
    outer: dict            # index -> eigenvalue for n0 < |n| <= N
    residuals: dict        # index -> last Newton correction
    total_count: int

    @property
    def total(self) -> complex:
        """Sum of all zeros inside ``Gamma_N``."""
        return self.inner_sum + complex(sum(self.outer.values()))


def _shift_spectrum_at(shifted: CoefficientPair, t: float, N: int, n0: int) -> ShiftSpectrum:
    ch = PairCharacteristic(shifted)
    inner = cluster_sum(ch, Contour.big_circle(n0)) if n0 > 0 else 0j
    idx = [n for k in range(n0 + 1, N + 1) for n in (-k, k)]
    recs = locate_many(shifted, idx) if idx else []
    total = winding_count(ch, Contour.big_circle(N), reference=True)
    inner_count = winding_count(ch, Contour.big_circle(n0), reference=True) if n0 > 0 else 0
    # roots in disjoint disks plus a matching total count prove that each disk holds one simple zero
    if total != 2 * N or inner_count + len(recs) != total:
        raise NonIntegerWinding(f"t = {t}: Gamma_{N} holds {total} zeros, expected {2 * N} "
                                f"({inner_count} inner + {len(recs)} located)")
    return ShiftSpectrum(float(t), N, n0, inner, {r.index: r.value for r in recs},
                         {r.index: r.residual for r in recs}, total)


def shift_spectrum(pair: CoefficientPair, t: float, N: int, n0: int | None = None) -> ShiftSpectrum:
    """Zeros inside ``Gamma_N`` for the pair shifted by ``t``.

    Without ``n0`` every index is first tried by disk Newton; if that fails,
    the disks are probed for the simplicity onset and the zeros below it are
    taken as one contour cluster, widened until the zero counts agree.
    """
    shifted = pair.shift(t)
    if n0 is not None:
        return _shift_spectrum_at(shifted, t, N, min(n0, N))
    try:
        return _shift_spectrum_at(shifted, t, N, 0)
    except (NoConvergence, NonIntegerWinding):
        n0 = min(max(1, simplicity_onset(shifted)), N)
    # a zero may also sit between two disks; widen the cluster until the counts close
    while True:
        try:
            return _shift_spectrum_at(shifted, t, N, n0)
        except (NoConvergence, NonIntegerWinding):
            if n0 >= N:
                raise
            n0 += 1


@dataclass
class TraceCheck:
    t: float
    N: int
    lhs: float
    rhs: float
    tail_estimate: float
    lhs_imag: float = 0.0
    method: str = "hybrid"
    n0: int = 0
    solver_error: float = 0.0
    contour_lhs: float | None = None
    terms: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_row(self) -> dict:
        return {"t": self.t, "N": self.N, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
                "tail_estimate": self.tail_estimate}


def _tail(terms: dict, N: int) -> float:
    # per-index terms are modelled as c k^{-3/2}; the tail past N is then ~ 2 c N^{-1/2}
    lo = int(np.ceil(N / 10))
    ks = [k for k in range(lo, N + 1) if k in terms]
    if not ks:
        return 0.0
    c = float(np.median([terms[k] * k ** 1.5 for k in ks]))
    return float(2.0 * c / np.sqrt(N))


def contour_trace_sum(pair: CoefficientPair, t: float, N: int) -> complex:
    """``sum mu_n(t) - sum mu_n(0)`` over ``Gamma_N`` from two cluster sums."""
    big = Contour.big_circle(N)
    return cluster_sum(PairCharacteristic(pair.shift(t)), big) - cluster_sum(PairCharacteristic(pair), big)


def trace_partial_sum(pair: CoefficientPair, t: float, N: int, method: str = "hybrid",
                      n0: int | None = None, base: ShiftSpectrum | None = None,
                      cross_check_upto: int = 10) -> TraceCheck:
    """``sum_{|n| <= N} (mu_n(t) - mu_n(0))`` against ``V(0) - V(t)``.

    ``hybrid`` locates every index beyond the simplicity onset by disk Newton
    and takes the zeros inside ``Gamma_{n0}`` as one cluster; ``per-index``
    insists on ``n0 = 0``; ``contour`` uses the cluster sums over ``Gamma_N``
    alone.  ``base`` lets callers reuse the ``t = 0`` data.  For
    ``N <= cross_check_upto`` the contour form is computed alongside.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if N < 1:
        raise ValueError("N must be positive")
    t = float(t)
    rhs = float(potential_V(pair, 0.0) - potential_V(pair, t))
    if pair.p.degree == 0 and pair.q.degree == 0:
        return TraceCheck(t, N, 0.0, rhs, 0.0, method=method)

    contour_lhs = None
    if method == "contour" or N <= cross_check_upto:
        c = contour_trace_sum(pair, t, N)
        contour_lhs = float(c.real)
        if method == "contour":
            return TraceCheck(t, N, float(c.real), rhs, 0.0, float(c.imag), method, N, 0.0, contour_lhs)

    if method == "per-index":
        n0 = 0
    if base is None or base.N != N or (n0 is not None and base.n0 != n0):
        base = shift_spectrum(pair, 0.0, N, n0)
    cur = shift_spectrum(pair, t, N, n0)
    total = cur.total - base.total
    lo = max(cur.n0, base.n0)
    terms = {k: abs(cur.outer[k] - base.outer[k]) + abs(cur.outer[-k] - base.outer[-k])
             for k in range(lo + 1, N + 1)}
    err = sum(cur.residuals.values()) + sum(base.residuals.values())
    return TraceCheck(t, N, float(total.real), rhs, _tail(terms, N), float(total.imag), method,
                      max(cur.n0, base.n0), float(err), contour_lhs, terms)


def trace_scan(pair: CoefficientPair, ts: Sequence[float], N: int, threads: int = 1,
               n0: int | None = None, cross_check_upto: int = 0, **kw) -> list[TraceCheck]:
    """``trace_partial_sum`` over many shifts, sharing the ``t = 0`` spectrum."""
    ts = [float(t) for t in ts]
    base = shift_spectrum(pair, 0.0, N, n0)

    def one(t):
        return trace_partial_sum(pair, t, N, n0=n0, base=base, cross_check_upto=cross_check_upto, **kw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ts))
    return [one(t) for t in ts]


# ---------------------------------------------------------------------------
# recovery


@dataclass(frozen=True)
class SampledFunction:
    t: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.t, self.values)

    def max_error(self, reference: Callable) -> float:
        return float(np.max(np.abs(self.values - np.asarray(reference(self.t)))))

    def rows(self) -> list[dict]:
        return [{"t": float(a), "value": float(b)} for a, b in zip(self.t, self.values)]


def default_t_grid(points: int = 64) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _trace_values(flow_V, t_grid) -> np.ndarray:
    if callable(flow_V):
        vals = np.array([float(flow_V(t)) for t in t_grid])
    else:
        vals = np.asarray(flow_V, dtype=float)
        if vals.shape != t_grid.shape:
            raise ValueError("sampled trace data must match the t-grid")
    return vals


def _check_grid(t_grid, harmonics: int):
    if t_grid.ndim != 1 or t_grid.size < 2 * harmonics + 1 or t_grid.size < 3:
        raise InsufficientData(f"{t_grid.size} samples cannot carry {harmonics} harmonics")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t-grid must be increasing")


def recover_q(flow_V, p: PeriodicCoefficient, q0: float, t_grid=None,
              harmonics: int | None = None) -> SampledFunction:
    """``q(t)`` from the trace sums and a known ``p``.

    ``flow_V`` maps ``t`` to ``sum_n (mu_n(t) - mu_n(0))`` (a callable, or an
    array sampled on ``t_grid``).  Then ``V(t) = V(0) - flow_V(t)`` and
    ``q = V + p'/3``, anchored by ``V(0) = q(0) - p'(0)/3``.
    """
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    _check_grid(t_grid, max(p.degree, 1) if harmonics is None else harmonics)
    dp = p.derivative(1)
    v0 = q0 - dp(0.0) / 3.0
    V = v0 - _trace_values(flow_V, t_grid)
    return SampledFunction(t_grid, V + np.asarray(dp(t_grid)) / 3.0)


def recover_p(flow_V, q: PeriodicCoefficient, p0: float, p_prime0: float, t_grid=None,
              harmonics: int | None = None, periodicity_tol: float = 1e-4) -> SampledFunction:
    """``p(t)`` from the trace sums and a known ``q``.

    ``p'(0)`` only anchors ``V(0) = q(0) - p'(0)/3``; afterwards
    ``p' = 3 (q - V)`` is integrated from ``p(0)``.  The grid must span a full
    period so that ``p(1) = p(0)`` can be checked.
    """
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    _check_grid(t_grid, max(q.degree, 1) if harmonics is None else harmonics)
    v0 = q(0.0) - p_prime0 / 3.0
    V = v0 - _trace_values(flow_V, t_grid)
    dp = 3.0 * (np.asarray(q(t_grid)) - V)
    p = p0 + cumulative_simpson(dp, x=t_grid, initial=0.0)
    if abs(t_grid[0]) < 1e-14 and abs(t_grid[-1] - 1.0) < 1e-14:
        drift = abs(p[-1] - p[0])
        if drift > periodicity_tol:
            raise PeriodicityViolation(f"p(1) - p(0) = {drift:.3e} exceeds {periodicity_tol:.1e}")
    return SampledFunction(t_grid, p)
