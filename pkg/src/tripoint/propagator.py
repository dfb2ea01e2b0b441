"""Fundamental matrix, characteristic function and the unperturbed closed forms.

The quasi-derivative vector ``(y, y', y'' + p y)`` of a solution of
``(y'' + p y)' + p y' + q y = lambda y`` obeys ``Y' = P(x, lambda) Y`` with the
companion matrix returned by :func:`companion`.  Eigenvalues of the
three-point problem ``y(0) = y(1) = y(2) = 0`` are the zeros of
``D = phi2(1) phi3(2) - phi3(1) phi2(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .coefficients import CoefficientPair
from .errors import OverflowGuard, StepSizeUnderflow

TAU = np.exp(2j * np.pi / 3)
NU = 2.0 * np.pi / np.sqrt(3.0)
TAUS = np.array([1.0, TAU, TAU ** 2])
LOG_CEILING = 690.0
D_RTOL = 1e-13
_MAX_STEPS = 2_000_000


def sector_root(lam) -> complex:
    """Cube root with ``arg z`` in ``(-pi/3, pi/3]``."""
    lam = complex(lam)
    if lam == 0:
        return 0j
    return abs(lam) ** (1.0 / 3.0) * np.exp(1j * np.angle(lam) / 3.0)


def sector_roots(lams) -> np.ndarray:
    lams = np.asarray(lams, dtype=complex)
    return np.abs(lams) ** (1.0 / 3.0) * np.exp(1j * np.angle(lams) / 3.0)


def companion(pair, lam) -> Callable[[float], np.ndarray]:
    """Return ``x -> P(x, lambda)``."""
    lam = complex(lam)

    def P(x: float) -> np.ndarray:
        p = float(pair.p(x))
        q = float(pair.q(x))
        return np.array([[0, 1, 0], [-p, 0, 1], [lam - q, -p, 0]], dtype=complex)

    return P


# ---------------------------------------------------------------------------
# fundamental matrix


@dataclass(frozen=True)
class FundamentalSolution:
    """``M(x, lambda)`` at the requested nodes.

    ``dets`` holds ``det M`` assembled from the orthogonal-triangular factors
    the integrator carries (see :func:`fundamental_matrix`).  Forming the
    determinant from the entries instead is hopeless once ``|z|`` is large,
    because every column collapses onto the dominant exponential.
    """

    lam: complex
    xs: np.ndarray
    matrices: np.ndarray
    dets: np.ndarray

    def __len__(self) -> int:
        return len(self.xs)

    def __getitem__(self, i) -> np.ndarray:
        return self.matrices[i]

    def __iter__(self):
        return iter(self.matrices)

    def at(self, x: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.xs, x, rtol=0, atol=1e-14))
        if idx.size == 0:
            raise KeyError(f"x = {x} was not requested")
        return self.matrices[idx[0]]


def _growth_rate(lam) -> float:
    return float(sector_root(lam).real)


def check_overflow(lam, x_max: float) -> None:
    predicted = 1.5 * _growth_rate(lam) * x_max
    if predicted > LOG_CEILING:
        raise OverflowGuard(
            f"predicted log-magnitude {predicted:.1f} exceeds {LOG_CEILING}; use the scaled routes")


def fundamental_matrix(pair, lam, xs: Sequence[float], rtol: float = 1e-12,
                       atol: float = 1e-14) -> FundamentalSolution:
    """Integrate ``M' = P M``, ``M(0) = I`` and sample ``M`` at ``xs``.

    ``pair`` only needs callable ``p`` and ``q`` attributes.  An optional
    ``breakpoints`` attribute lists points where the coefficients are rough;
    the integrator restarts there.

    The interval is cut into chunks over which the solution grows by at most
    about ``e^2``.  Each chunk starts from the orthonormal factor of the
    previous one, so the triangular factors accumulate the growth and the
    determinant stays available to full precision.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or np.any(np.diff(xs) < 0):
        raise ValueError("xs must be a sorted one-dimensional sequence")
    if xs.size and (xs[0] < 0.0 or xs[-1] > 2.0):
        raise ValueError("xs must lie in [0, 2]")
    lam = complex(lam)
    x_max = float(xs[-1]) if xs.size else 0.0
    check_overflow(lam, x_max)

    r = abs(sector_root(lam))
    chunk = min(0.25, 2.0 / (1.5 * r + 1.0))
    n_uniform = int(np.ceil(x_max / chunk)) if x_max > 0 else 0
    nodes = set(np.linspace(0.0, x_max, n_uniform + 1).tolist()) if n_uniform else {0.0}
    nodes.update(xs.tolist())
    for b in getattr(pair, "breakpoints", ()):
        if 0.0 < b < x_max:
            nodes.add(float(b))
    nodes = np.array(sorted(nodes))

    P = companion(pair, lam)

    def rhs(x, y):
        return (P(x) @ y.reshape(3, 3)).ravel()

    Q = np.eye(3, dtype=complex)
    R = np.eye(3, dtype=complex)
    log_det_r = 0j
    wanted = {float(x): i for i, x in enumerate(xs)}
    out = np.empty((xs.size, 3, 3), dtype=complex)
    dets = np.empty(xs.size, dtype=complex)

    def record(x):
        for xv, i in wanted.items():
            if abs(xv - x) <= 1e-15:
                out[i] = Q @ R
                dets[i] = np.linalg.det(Q) * np.exp(log_det_r)

    record(0.0)
    for a, b in zip(nodes[:-1], nodes[1:]):
        if b <= a:
            continue
        sol = solve_ivp(rhs, (a, b), Q.ravel(), method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise StepSizeUnderflow(f"integration stalled on [{a}, {b}]: {sol.message}")
        Y = sol.y[:, -1].reshape(3, 3)
        Q, Rc = np.linalg.qr(Y)
        R = Rc @ R
        log_det_r += np.sum(np.log(np.diag(Rc)))
        record(float(b))
    return FundamentalSolution(lam, xs, out, dets)


def char_D_from_matrix(pair, lam) -> complex:
    """``D`` read off ``M(1)`` and ``M(2)``.  Used as an independent check."""
    sol = fundamental_matrix(pair, lam, [1.0, 2.0])
    m1, m2 = sol.matrices
    return complex(m1[0, 1] * m2[0, 2] - m1[0, 2] * m2[0, 1])


# ---------------------------------------------------------------------------
# characteristic function through the compiled kernel


@dataclass(frozen=True)
class CharacteristicValue:
    """``D(lambda)`` together with its log-scaled representation.

    ``D = mantissa * exp(log_scale)`` and ``D' = d_mantissa * exp(log_scale)``.
    ``log_scale_hint`` is the size ``1.5 Re z`` of the dominant exponential.
    """

    lam: complex
    z: complex
    mantissa: complex
    d_mantissa: complex
    log_scale: float
    log_scale_hint: float

    @property
    def d_value(self) -> complex:
        if self.log_scale > 700.0:
            raise OverflowGuard("D exceeds the double range; use mantissa and log_scale")
        return complex(self.mantissa * np.exp(self.log_scale))

    @property
    def derivative(self) -> complex:
        if self.log_scale > 700.0:
            raise OverflowGuard("D' exceeds the double range; use d_mantissa and log_scale")
        return complex(self.d_mantissa * np.exp(self.log_scale))

    @property
    def newton_step(self) -> complex:
        return complex(self.mantissa / self.d_mantissa)

    @property
    def log_D(self) -> complex:
        return complex(np.log(self.mantissa) + self.log_scale)


def _pair_arrays(pair: CoefficientPair):
    if not isinstance(pair, CoefficientPair):
        raise TypeError("the compiled route needs a CoefficientPair")
    return pair.kernel_arrays()


def char_batch(pair: CoefficientPair, lams, with_deriv: bool = True, rtol: float = D_RTOL):
    """Vectorised ``(mantissa, d_mantissa, log_scale)`` over an array of ``lambda``."""
    lams = np.ascontiguousarray(np.atleast_1d(np.asarray(lams, dtype=complex)))
    m, dm, ls, status = _kernels.char_batch(
        lams, *_pair_arrays(pair), bool(with_deriv), float(rtol), _kernels.RK_A, _kernels.RK_B,
        _kernels.RK_C, _kernels.RK_E3, _kernels.RK_E5, _MAX_STEPS)
    if np.any(status < 0):
        bad = lams[status < 0][0]
        raise StepSizeUnderflow(f"step control failed at lambda = {bad}")
    return m, dm, ls


def char_D(pair: CoefficientPair, lam, rtol: float = D_RTOL) -> CharacteristicValue:
    """Characteristic function at one point, derivative included."""
    lam = complex(lam)
    m, dm, ls = char_batch(pair, [lam], True, rtol)
    z = sector_root(lam)
    return CharacteristicValue(lam, z, complex(m[0]), complex(dm[0]), float(ls[0]), 1.5 * z.real)


def char_log(pair: CoefficientPair, lams, rtol: float = D_RTOL) -> np.ndarray:
    """Principal-branch-free ``log D`` (the imaginary part is not unwrapped)."""
    m, _, ls = char_batch(pair, lams, False, rtol)
    return np.log(m) + ls


# ---------------------------------------------------------------------------
# unperturbed closed forms


def _series_entry(i: int, j: int, x: float, lam: complex) -> complex:
    acc = 0j
    term_s = 1.0 + 0j
    for s in range(80):
        n = 3 * s + j - i
        if n >= 0:
            term = term_s * x ** n / _factorial(n)
            acc += term
            if s > 2 and abs(term) < 1e-18 * max(abs(acc), 1e-300):
                break
        term_s *= lam
    return acc


_FACT = [1.0]
for _k in range(1, 300):
    _FACT.append(_FACT[-1] * _k)


def _factorial(n: int) -> float:
    return _FACT[n]


def unperturbed_matrix(x: float, lam) -> np.ndarray:
    """Closed form of ``M(x, lambda)`` for ``p = q = 0``.

    ``M_ij = (1/3) sum_k (tau_k z)^(i-j) exp(tau_k z x)`` with 0-based indices.
    For small ``|z x|`` the exact power series is used instead.
    """
    lam = complex(lam)
    z = sector_root(lam)
    if abs(z) * x < 1.0:
        return np.array([[_series_entry(i, j, x, lam) for j in range(3)] for i in range(3)])
    w = TAUS * z
    e = np.exp(w * x)
    i = np.arange(3)[:, None]
    j = np.arange(3)[None, :]
    return (((w[None, None, :] ** (i - j)[..., None]) * e).sum(axis=-1)) / 3.0


def unperturbed_scale(x: float, lam) -> np.ndarray:
    """Entrywise sum of the moduli of the three exponential terms."""
    lam = complex(lam)
    z = sector_root(lam)
    if z == 0:
        return np.abs(unperturbed_matrix(x, lam)) + 1.0
    w = TAUS * z
    e = np.abs(np.exp(w * x))
    i = np.arange(3)[:, None]
    j = np.arange(3)[None, :]
    return ((np.abs(w)[None, None, :] ** (i - j)[..., None]) * e).sum(axis=-1) / 3.0


def phi_unperturbed(j: int, x: float, lam) -> complex:
    """``phi_j`` (``j = 1, 2, 3``) at ``p = q = 0``."""
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    lam = complex(lam)
    z = sector_root(lam)
    if abs(z) * abs(x) < 1.0:
        return _series_entry(0, j - 1, x, lam)
    w = TAUS * z
    return complex(np.sum(w ** (1 - j) * np.exp(w * x)) / 3.0)


_S3 = np.sqrt(3.0) / 2.0


def char_D0(lam) -> complex:
    """Closed form of ``D`` at ``p = q = 0``.

    ``D0 = 8 / (3 sqrt3 lambda) * prod_k sin(sqrt3 tau_k z / 2)``; the overall
    sign is the one that gives ``D0(0) = 1``.
    """
    lam = complex(lam)
    z = sector_root(lam)
    if abs(z) < 0.5:
        a1, a2 = _series_entry(0, 1, 1.0, lam), _series_entry(0, 2, 1.0, lam)
        b1, b2 = _series_entry(0, 1, 2.0, lam), _series_entry(0, 2, 2.0, lam)
        return complex(a1 * b2 - a2 * b1)
    s = np.sin(_S3 * z) * np.sin(_S3 * TAU * z) * np.sin(_S3 * TAU ** 2 * z)
    return complex(8.0 / (3.0 * np.sqrt(3.0) * lam) * s)


def log_char_D0(lam) -> complex:
    """``log D0`` evaluated without overflow (imaginary part not unwrapped)."""
    lam = complex(lam)
    z = sector_root(lam)
    if abs(z) < 20.0:
        return complex(np.log(char_D0(lam)))
    acc = np.log(8.0 / (3.0 * np.sqrt(3.0) * lam))
    for t in TAUS:
        u = _S3 * t * z
        # sin u = (e^{iu} - e^{-iu}) / 2i, factor out the larger exponential
        if u.imag <= 0:
            acc += 1j * u + np.log((1.0 - np.exp(-2j * u)) / 2j)
        else:
            acc += -1j * u + np.log((np.exp(2j * u) - 1.0) / 2j)
    return complex(acc)


def symmetry_residual(pair: CoefficientPair, lam) -> float:
    """``|D(lambda; p, q) - D(-lambda; p(-x), -q(-x))|``, in the overflow-free relative form.

    The value returned is scaled by ``1 + |D(lambda)|`` so it can be compared
    directly against a relative tolerance.
    """
    lam = complex(lam)
    a = char_D(pair, lam)
    b = char_D(pair.reflected(), -lam)
    shift = max(a.log_scale, b.log_scale)
    da = a.mantissa * np.exp(a.log_scale - shift)
    db = b.mantissa * np.exp(b.log_scale - shift)
    floor = np.exp(-shift) if shift < 700 else 0.0
    return float(abs(da - db) / (floor + abs(da)))
