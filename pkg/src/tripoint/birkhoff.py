"""Birkhoff-type factorisation of the fundamental matrix at large ``|z|``.

Write ``lambda = z^3`` with ``z`` in the sector ``0 <= arg z < pi/3``.  After
the conjugation ``Y = Omega^{-1} M Omega`` and an optional gauge ``U``, the
system takes the form ``Y' = (z Theta + z^{-m} Phi) Y`` with ``Theta``
diagonal.  Its solution is ``X e^{z int Theta}`` where ``X`` solves the
two-sided integral equation ``X = 1 + z^{-m} K X``.  Everything that grows
or decays exponentially is kept in the exponent, so ratios such as ``xi``
never materialise huge numbers.

Three setups are provided (``m = 1, 2, 3``).  By default ``Phi`` for
``m = 2, 3`` keeps only its leading terms; ``variant="exact"`` instead uses
the exact transformed generator, which makes the factorisation exact for
every ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from .coefficients import SQRT3, CoefficientPair
from .errors import NoConvergence, NotContractive, QuadratureStall
from .propagator import TAU, char_D, fundamental_matrix

SECTOR_ANGLE = np.pi / 3


class ModelMatrices:
    """Constant matrices of the conjugated system."""

    T = np.diag([TAU, TAU ** 2, 1.0 + 0j])
    T2 = T @ T
    # Omega^{-1} (P_p) Omega = -(1/3z) P and Omega^{-1} (P_q) Omega = -(1/3z^2) Q,
    # where P_p, P_q are the p- and q-parts of the companion matrix.
    P = np.array([[2 * TAU ** 2, -TAU, -1.0],
                  [-TAU ** 2, 2 * TAU, -1.0],
                  [-TAU ** 2, -TAU, 2.0]], dtype=complex)
    Q = np.array([[TAU, TAU, TAU],
                  [TAU ** 2, TAU ** 2, TAU ** 2],
                  [1.0, 1.0, 1.0]], dtype=complex)
    W1 = (1j / SQRT3) * np.array([[0.0, TAU, -TAU],
                                  [-TAU ** 2, 0.0, TAU ** 2],
                                  [1.0, -1.0, 0.0]], dtype=complex)
    kappa = 1j * (TAU - 1.0)
    # P W1 - 2 W1 T^2 enters the quadratic-in-p part of Phi
    PW = P @ W1 - 2.0 * W1 @ T2

    @staticmethod
    def Omega(z) -> np.ndarray:
        z = complex(z)
        t = TAU
        return np.array([[1.0, 1.0, 1.0],
                         [t * z, t * t * z, z],
                         [t * t * z * z, t * z * z, z * z]], dtype=complex)

    @staticmethod
    def Omega_inv(z) -> np.ndarray:
        # rows of the inverse follow from sum_k tau^k = 0
        z = complex(z)
        t = TAU
        return np.array([[1.0, t * t / z, t / (z * z)],
                         [1.0, t / z, t * t / (z * z)],
                         [1.0, 1.0 / z, 1.0 / (z * z)]], dtype=complex) / 3.0

    @staticmethod
    def h(pair: CoefficientPair, x, order: int = 0):
        """``h = tau (p' - i sqrt3 q)``; ``order`` differentiates further."""
        dp = pair.p.derivative(order + 1)
        dq = pair.q.derivative(order)
        return TAU * (np.asarray(dp(x)) - 1j * SQRT3 * np.asarray(dq(x)))

    @classmethod
    def W2(cls, pair: CoefficientPair, x, order: int = 0) -> np.ndarray:
        """``W2(x)`` (or its ``order``-th derivative), shape ``x.shape + (3, 3)``."""
        h = np.asarray(cls.h(pair, x, order), dtype=complex)
        hb = np.conj(h)
        zero = np.zeros_like(h)
        out = np.stack([np.stack([zero, h, hb], -1),
                        np.stack([hb, zero, h], -1),
                        np.stack([h, hb, zero], -1)], -2)
        return out / 3.0


MM = ModelMatrices


def check_sector(z) -> complex:
    z = complex(z)
    a = np.angle(z)
    if z == 0 or a < -1e-14 or a >= SECTOR_ANGLE:
        raise ValueError(f"z = {z} is outside the sector 0 <= arg z < pi/3")
    return z


# ---------------------------------------------------------------------------
# setups


@dataclass(frozen=True)
class BirkhoffSetup:
    """One instance ``(m, Theta, Phi, U)`` of the integral equation."""

    pair: CoefficientPair
    m: int
    variant: str = "explicit"

    def __post_init__(self):
        if self.m not in (1, 2, 3):
            raise ValueError("m must be 1, 2 or 3")
        if self.variant not in ("explicit", "exact"):
            raise ValueError("variant must be 'explicit' or 'exact'")

    @classmethod
    def first(cls, pair, variant="explicit"):
        return cls(pair, 1, variant)

    @classmethod
    def second(cls, pair, variant="explicit"):
        return cls(pair, 2, variant)

    @classmethod
    def third(cls, pair, variant="explicit"):
        return cls(pair, 3, variant)

    # diagonal part --------------------------------------------------------

    def theta(self, x, z) -> np.ndarray:
        """Diagonal of ``Theta(x, z)``, shape ``x.shape + (3,)``."""
        x = np.asarray(x, dtype=float)
        z = complex(z)
        d1, d2 = np.diag(MM.T), np.diag(MM.T2)
        out = d1 - np.multiply.outer(2.0 * np.asarray(self.pair.p(x)) / (3 * z * z), d2)
        if self.m >= 2:
            out = out - np.multiply.outer(np.asarray(self.pair.q(x)) / (3 * z ** 3), d1)
        return out

    def theta_integral(self, x, z) -> np.ndarray:
        """Closed-form ``int_0^x Theta``, shape ``x.shape + (3,)``."""
        x = np.asarray(x, dtype=float)
        z = complex(z)
        d1, d2 = np.diag(MM.T), np.diag(MM.T2)
        out = np.multiply.outer(x, d1) \
            - np.multiply.outer(2.0 * np.asarray(self.pair.p.antiderivative(x)) / (3 * z * z), d2)
        if self.m >= 2:
            out = out - np.multiply.outer(np.asarray(self.pair.q.antiderivative(x)) / (3 * z ** 3), d1)
        return out

    # gauge -----------------------------------------------------------------

    def U(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = complex(z)
        out = np.broadcast_to(np.eye(3, dtype=complex), x.shape + (3, 3)).copy()
        if self.m >= 2:
            out = out + np.multiply.outer(np.asarray(self.pair.p(x)) / (3 * z * z), MM.W1)
        if self.m >= 3:
            out = out + MM.W2(self.pair, x) / (3 * z ** 3)
        return out

    def U_prime(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = complex(z)
        out = np.zeros(x.shape + (3, 3), dtype=complex)
        if self.m >= 2:
            dp = np.asarray(self.pair.p.derivative(1)(x))
            out = out + np.multiply.outer(dp / (3 * z * z), MM.W1)
        if self.m >= 3:
            out = out + MM.W2(self.pair, x, 1) / (3 * z ** 3)
        return out

    # perturbation ----------------------------------------------------------

    def generator(self, x, z) -> np.ndarray:
        """``Omega^{-1} P Omega`` for the companion matrix ``P`` at ``lambda = z^3``."""
        x = np.asarray(x, dtype=float)
        z = complex(z)
        p = np.asarray(self.pair.p(x))
        q = np.asarray(self.pair.q(x))
        return z * MM.T - (np.multiply.outer(p, MM.P) + np.multiply.outer(q / z, MM.Q)) / (3 * z)

    def phi(self, x, z) -> np.ndarray:
        """``Phi(x, z)``, shape ``x.shape + (3, 3)``."""
        x = np.asarray(x, dtype=float)
        z = complex(z)
        if self.variant == "exact":
            return self._phi_exact(x, z)
        p = np.asarray(self.pair.p(x))
        q = np.asarray(self.pair.q(x))
        if self.m == 1:
            return -(np.multiply.outer(p, MM.P - 2.0 * MM.T2) + np.multiply.outer(q / z, MM.Q)) / 3.0
        quad = np.multiply.outer(p * p / 9.0, MM.PW)
        if self.m == 2:
            dp = np.asarray(self.pair.p.derivative(1)(x))
            p1 = -(np.multiply.outer(q, MM.Q) + np.multiply.outer(dp, MM.W1)) / 3.0
            return p1 - quad / z + np.multiply.outer(q / 3.0, MM.T)
        return -MM.W2(self.pair, x, 1) / 3.0 - quad

    def _phi_exact(self, x, z):
        u = self.U(x, z)
        rhs = self.generator(x, z) @ u - self.U_prime(x, z)
        core = np.linalg.solve(u, rhs)
        diag = np.zeros_like(core)
        th = self.theta(x, z)
        for k in range(3):
            diag[..., k, k] = th[..., k]
        return z ** self.m * (core - z * diag)


def setup(pair: CoefficientPair, m: int, variant: str = "explicit") -> BirkhoffSetup:
    return BirkhoffSetup(pair, m, variant)


# ---------------------------------------------------------------------------
# kernel and integral equation


def kernel_K(st: BirkhoffSetup, l: int, j: int, x: float, s: float, z) -> complex:
    """Kernel entry ``K_{lj}(x, s)`` (indices 1-based)."""
    if l not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("indices run over 1..3")
    z = complex(z)
    ti = st.theta_integral(np.array([x, s]), z)
    expo = z * ((ti[0, l - 1] - ti[1, l - 1]) - (ti[0, j - 1] - ti[1, j - 1]))
    if l < j:
        return complex(np.exp(expo)) if x >= s else 0j
    return complex(-np.exp(expo)) if s >= x else 0j


def _moments(c: complex, L: float, kmax: int = 2) -> np.ndarray:
    """``int_0^L e^{c (L - u)} u^k du`` for ``k = 0..kmax``."""
    cl = c * L
    out = np.empty(kmax + 1, dtype=complex)
    if abs(cl) < 1.0:
        for k in range(kmax + 1):
            # sum_m c^m L^{m+k+1} k! / (m+k+1)!
            term = L ** (k + 1) / (k + 1)
            acc = term
            for mm in range(1, 40):
                term = term * cl / (mm + k + 1)
                acc += term
                if abs(term) < 1e-18 * abs(acc):
                    break
            out[k] = acc
    else:
        out[0] = (np.exp(cl) - 1.0) / c
        for k in range(1, kmax + 1):
            out[k] = (-L ** k + k * out[k - 1]) / c
    return out


def _panel_weights(c: complex, h: float):
    """Exponentially weighted Simpson weights on nodes ``0, h, 2h``.

    Returns (full, half): weights for ``int_0^{2h} e^{c(2h-u)} g`` and
    ``int_0^{h} e^{c(h-u)} g`` with ``g`` replaced by its quadratic interpolant.
    """
    # Lagrange basis coefficients in powers of u
    basis = np.array([[1.0, -1.5 / h, 0.5 / h ** 2],
                      [0.0, 2.0 / h, -1.0 / h ** 2],
                      [0.0, -0.5 / h, 0.5 / h ** 2]])
    full = basis @ _moments(c, 2 * h)
    half = basis @ _moments(c, h)
    return full, half


def _one_sided(c: complex, g: np.ndarray, h: float) -> np.ndarray:
    """``J(x_i) = int_0^{x_i} e^{c (x_i - s)} g(s) ds`` on a uniform odd-length grid."""
    n = g.size
    full, half = _panel_weights(c, h)
    g0, g1, g2 = g[0:n - 2:2], g[1:n - 1:2], g[2:n:2]
    b = full[0] * g0 + full[1] * g1 + full[2] * g2
    a = np.exp(2 * c * h)
    even = np.empty((n + 1) // 2, dtype=complex)
    even[0] = 0.0
    even[1:] = lfilter([1.0], [1.0, -a], b)
    out = np.empty(n, dtype=complex)
    out[0::2] = even
    out[1::2] = np.exp(c * h) * even[:-1] + half[0] * g0 + half[1] * g1 + half[2] * g2
    return out


@dataclass
class XSolution:
    z: complex
    grid: np.ndarray
    values: np.ndarray
    iterations: int
    contraction_estimate: float
    kernel_norm: float = 0.0
    measured_ratio: float = 0.0
    refinements: int = 0
    history: list = field(default_factory=list)

    def at(self, x) -> np.ndarray:
        """``X(x)`` by cubic interpolation (exact at grid nodes)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.grid, x)
        hit = (idx < self.grid.size) & np.isclose(self.grid[np.minimum(idx, self.grid.size - 1)], x,
                                                  rtol=0, atol=1e-14)
        if np.all(hit):
            return self.values[idx]
        spline = CubicSpline(self.grid, self.values, axis=0)
        return spline(x)


class _Operator:
    """Discretised ``z^{-m} K`` on a fixed uniform grid."""

    def __init__(self, st: BirkhoffSetup, z: complex, grid: np.ndarray):
        self.st, self.z, self.grid = st, z, grid
        self.h = float(grid[1] - grid[0])
        self.phi = st.phi(grid, z)
        ti = z * st.theta_integral(grid, z)
        lead = z * np.diag(MM.T)
        self.c = np.subtract.outer(lead, lead)           # c[l, j]
        # smooth remainder of the exponent, R[l, j](x)
        self.R = (ti[:, :, None] - ti[:, None, :]) - grid[:, None, None] * self.c[None]
        self.scale = z ** (-st.m)
        self.kernel_norm = self._kernel_norm()

    def _kernel_norm(self) -> float:
        w = np.full(self.grid.size, self.h)
        w[0] = w[-1] = 0.5 * self.h
        amp = np.exp(2.0 * np.max(np.abs(self.R.real)))
        row = (np.abs(self.phi) * w[:, None, None]).sum(axis=0).sum(axis=1)
        return float(amp * row.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        F = self.phi @ X
        out = np.empty_like(F)
        h = self.h
        for l in range(3):
            for j in range(3):
                r = self.R[:, l, j]
                g = np.exp(-r) * F[:, l, j]
                c = self.c[l, j]
                if l < j:
                    out[:, l, j] = np.exp(r) * _one_sided(c, g, h)
                else:
                    back = _one_sided(-c, g[::-1], h)[::-1]
                    out[:, l, j] = -np.exp(r) * back
        return self.scale * out


def uniform_grid(nodes: int = 513) -> np.ndarray:
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("the grid needs an odd number of nodes, at least 3")
    return np.linspace(0.0, 2.0, nodes)


def _picard(op: _Operator, tol: float, max_iter: int):
    eye = np.broadcast_to(np.eye(3, dtype=complex), (op.grid.size, 3, 3))
    X = eye.copy()
    history = []
    for it in range(1, max_iter + 1):
        Xn = eye + op.apply(X)
        diff = float(np.max(np.abs(Xn - X)))
        history.append(diff)
        X = Xn
        if diff <= tol:
            return X, it, history
    raise NoConvergence(f"Picard iteration did not settle after {max_iter} steps "
                        f"(last change {history[-1]:.2e})")


def _measured_ratio(history) -> float:
    h = [d for d in history if d > 0]
    if len(h) < 3:
        return 0.0
    r = [b / a for a, b in zip(h[:-1], h[1:]) if a > 1e-14]
    return float(max(r)) if r else 0.0


def solve_X(st: BirkhoffSetup, z, grid=None, tol: float = 1e-12, refine_tol: float = 1e-10,
            max_nodes: int = 2 ** 17 + 1, max_iter: int = 400) -> XSolution:
    """Fixed point of ``X = 1 + z^{-m} K X``.

    With ``grid=None`` the uniform grid starts at 513 nodes (more if needed to
    put eight nodes on the fastest oscillation) and doubles until the solution
    at common nodes moves by less than ``refine_tol``.
    """
    z = check_sector(z)
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.size < 3 or grid.size % 2 == 0 or not np.allclose(np.diff(grid), grid[1] - grid[0]):
            raise ValueError("grid must be uniform with an odd number of nodes")
        return _solve_on(st, z, grid, tol, max_iter)
    nodes = 513
    fastest = 2.0 * SQRT3 * abs(z)
    while 2.0 / (nodes - 1) * fastest > 2 * np.pi / 8:
        nodes = 2 * nodes - 1
    prev = _solve_on(st, z, uniform_grid(nodes), tol, max_iter)
    refinements = 0
    while True:
        nodes = 2 * nodes - 1
        if nodes > max_nodes:
            raise QuadratureStall(f"no grid convergence up to {max_nodes} nodes at z = {z}")
        cur = _solve_on(st, z, uniform_grid(nodes), tol, max_iter)
        refinements += 1
        shift = float(np.max(np.abs(cur.values[::2] - prev.values)))
        if shift < refine_tol:
            cur.refinements = refinements
            return cur
        prev = cur


def _solve_on(st, z, grid, tol, max_iter) -> XSolution:
    op = _Operator(st, z, grid)
    est = op.kernel_norm / abs(z) ** st.m
    if est >= 0.9:
        raise NotContractive(f"|K| / |z|^m = {est:.3f} >= 0.9 at z = {z}")
    X, it, hist = _picard(op, tol, max_iter)
    return XSolution(z, grid, X, it, est, op.kernel_norm, _measured_ratio(hist), 0, hist)


def B_term(st: BirkhoffSetup, z, grid=None) -> np.ndarray:
    """First correction ``B = K 1`` on the grid (unscaled by ``z^{-m}``)."""
    z = check_sector(z)
    grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
    op = _Operator(st, z, grid)
    eye = np.broadcast_to(np.eye(3, dtype=complex), (grid.size, 3, 3)).copy()
    return op.apply(eye) / op.scale


# ---------------------------------------------------------------------------
# factorised solution


@dataclass
class ScaledA:
    """``A = prefactor * diag(exp(exponent))`` sampled on ``grid``."""

    z: complex
    grid: np.ndarray
    prefactor: np.ndarray     # Omega U X, shape (n, 3, 3)
    exponent: np.ndarray      # z int_0^x Theta, shape (n, 3)
    X: XSolution | None = None

    def matrix(self, k: int) -> np.ndarray:
        return self.prefactor[k] * np.exp(self.exponent[k])[None, :]

    def matrices(self) -> np.ndarray:
        return self.prefactor * np.exp(self.exponent)[:, None, :]

    def index(self, x: float) -> int:
        k = int(np.argmin(np.abs(self.grid - x)))
        if abs(self.grid[k] - x) > 1e-12:
            raise ValueError(f"x = {x} is not a grid node")
        return k


def build_A(st: BirkhoffSetup, z, grid=None, leading: bool = False, **solve_kw) -> ScaledA:
    """Factorised solution ``A = Omega U X e^{z int Theta}``.

    ``leading=True`` replaces ``X`` by the identity, giving the leading-order
    approximation whose error the decay checks measure.
    """
    z = check_sector(z)
    if leading:
        grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
        X = np.broadcast_to(np.eye(3, dtype=complex), (grid.size, 3, 3))
        sol = None
    else:
        sol = solve_X(st, z, grid, **solve_kw)
        grid, X = sol.grid, sol.values
    pre = MM.Omega(z) @ st.U(grid, z) @ X
    expo = z * st.theta_integral(grid, z)
    return ScaledA(z, grid, pre, expo, sol)


def jost_phi(st: BirkhoffSetup, j: int, x: float, z, A: ScaledA | None = None) -> complex:
    """``phi_j(x, z) = A_{1j}(x, z)``."""
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    A = build_A(st, z) if A is None else A
    k = A.index(x)
    return complex(A.prefactor[k, 0, j - 1] * np.exp(A.exponent[k, j - 1]))


def _phi_rows(A: ScaledA):
    ks = [A.index(0.0), A.index(1.0), A.index(2.0)]
    b = np.array([A.prefactor[k, 0, :] for k in ks])
    e = np.array([A.exponent[k, :] for k in ks])
    return b, e


def xi(st: BirkhoffSetup, z, A: ScaledA | None = None) -> complex:
    """``det phi(z) / phi_3(2, z)`` with ``phi`` the values of ``phi_j`` at ``x = 0, 1, 2``."""
    A = build_A(st, z) if A is None else A
    b, e = _phi_rows(A)
    ref = e[2, 2]
    total = 0j
    for perm, sign in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                       ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
        coef = sign * b[0, perm[0]] * b[1, perm[1]] * b[2, perm[2]]
        total += coef * np.exp(e[0, perm[0]] + e[1, perm[1]] + e[2, perm[2]] - ref)
    return complex(total / b[2, 2])


def xi_two_by_two(st: BirkhoffSetup, z, A: ScaledA | None = None) -> complex:
    """``phi_1(0) phi_2(1) - phi_2(0) phi_1(1)``, the dominant cofactor of ``xi``."""
    A = build_A(st, z) if A is None else A
    b, e = _phi_rows(A)
    return complex(b[0, 0] * b[1, 1] * np.exp(e[1, 1]) - b[0, 1] * b[1, 0] * np.exp(e[1, 0]))


def det_A0(st: BirkhoffSetup, z, A: ScaledA | None = None) -> complex:
    A = build_A(st, z) if A is None else A
    return complex(np.linalg.det(A.prefactor[A.index(0.0)]))


def char_D_via_birkhoff(st: BirkhoffSetup, z, A: ScaledA | None = None) -> complex:
    """``D(z^3) = det phi / det A(0)``; only meaningful while the entries fit in doubles."""
    A = build_A(st, z) if A is None else A
    b, e = _phi_rows(A)
    phi = b * np.exp(e)
    return complex(np.linalg.det(phi) / np.linalg.det(A.prefactor[A.index(0.0)]))


def factorization_deviation(st: BirkhoffSetup, z, xs=(0.5, 1.0, 1.5, 2.0), leading: bool = False,
                            **solve_kw) -> float:
    """``max_x |M(x) - A(x) A(0)^{-1}| / |M(x)|`` (Frobenius norms).

    ``M`` comes from direct integration at ``lambda = z^3``.
    """
    z = check_sector(z)
    A = build_A(st, z, leading=leading, **solve_kw)
    M = fundamental_matrix(st.pair, z ** 3, list(xs))
    A0inv = np.linalg.inv(A.matrix(A.index(0.0)))
    worst = 0.0
    for x, Mx in zip(xs, M.matrices):
        approx = A.matrix(A.index(x)) @ A0inv
        worst = max(worst, float(np.linalg.norm(Mx - approx) / np.linalg.norm(Mx)))
    return worst


def ode_residual(st: BirkhoffSetup, z, A: ScaledA | None = None) -> float:
    """Relative residual of ``A' = P A`` with a fourth-order central difference.

    Columns are rescaled by their exponentials before differencing, so the
    check stays well conditioned: with ``A = C e^{E}``, ``C' + C E' = P C``.
    """
    A = build_A(st, z) if A is None else A
    z = A.z
    g = A.grid
    h = g[1] - g[0]
    C = A.prefactor
    dC = (C[:-4] - 8 * C[1:-3] + 8 * C[3:-1] - C[4:]) / (12 * h)
    inner = g[2:-2]
    Ep = z * st.theta(inner, z)
    p = np.asarray(st.pair.p(inner))
    q = np.asarray(st.pair.q(inner))
    lam = z ** 3
    comp = np.zeros((inner.size, 3, 3), dtype=complex)
    comp[:, 0, 1] = 1.0
    comp[:, 1, 0] = -p
    comp[:, 1, 2] = 1.0
    comp[:, 2, 0] = lam - q
    comp[:, 2, 1] = -p
    res = dC + C[2:-2] * Ep[:, None, :] - comp @ C[2:-2]
    return float(np.max(np.linalg.norm(res, axis=(1, 2)) / np.linalg.norm(comp @ C[2:-2], axis=(1, 2))))
