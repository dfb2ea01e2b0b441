"""Exact characteristic function for a periodic comb of point interactions.

With ``p = 0`` and a kick of strength ``gamma`` at ``x = t`` (and ``t + 1``),
the third quasi-derivative jumps by ``-gamma y(t)``.  The fundamental
solutions are then explicit combinations of the unperturbed ones, so
``D(lambda, t)`` is available in closed form.  Nothing here touches the
generic propagator; that one appears only as an oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import CollisionNotBracketed
from .propagator import NU, TAUS, sector_roots
from .spectrum import Contour, _label_order, contour_moments, newton_batch, winding_count

_FACT = np.cumprod(np.concatenate([[1.0], np.arange(1, 160, dtype=float)]))


@dataclass(frozen=True)
class DeltaConfig:
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.gamma) or not np.isfinite(self.t):
            raise ValueError("gamma and t must be finite")


def _phi0_series(j: int, x, lam, deriv: bool):
    # phi_j = sum_s lam^s x^(3s+j-1) / (3s+j-1)!
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    val = np.zeros(np.broadcast(x, lam).shape, dtype=complex)
    dval = np.zeros_like(val)
    for s in range(40):
        k = 3 * s + j - 1
        term = x ** k / _FACT[k]
        val = val + lam ** s * term
        if deriv and s > 0:
            dval = dval + s * lam ** (s - 1) * term
    return val, dval


def _phi0_closed(j: int, x, lam, deriv: bool):
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    z = sector_roots(lam)
    val = np.zeros(np.broadcast(x, lam).shape, dtype=complex)
    dval = np.zeros_like(val)
    for tk in TAUS:
        w = tk * z
        e = np.exp(w * x)
        val = val + w ** (1 - j) * e / 3.0
        if deriv:
            # d/dlambda = (1 / 3z^2) d/dz
            dz = tk * ((1 - j) * w ** (-j) + x * w ** (1 - j)) * e
            dval = dval + dz / (9.0 * z * z)
    return val, dval


def phi_unperturbed_vec(j: int, x, lam, deriv: bool = False):
    """``phi_j^o(x, lambda)`` and optionally its lambda-derivative, vectorised."""
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    x_b, lam_b = np.broadcast_arrays(x, lam)
    small = np.abs(sector_roots(lam_b)) * np.abs(x_b) < 1.0
    val = np.empty(x_b.shape, dtype=complex)
    dval = np.empty(x_b.shape, dtype=complex)
    if np.any(small):
        v, d = _phi0_series(j, x_b[small], lam_b[small], deriv)
        val[small], dval[small] = v, d
    if np.any(~small):
        v, d = _phi0_closed(j, x_b[~small], lam_b[~small], deriv)
        val[~small], dval[~small] = v, d
    return val, dval


def phi_unperturbed(j: int, x: float, lam) -> complex:
    return complex(phi_unperturbed_vec(j, x, lam)[0])


def _delta_phis(lam, cfg: DeltaConfig, deriv: bool):
    g, t = cfg.gamma, cfg.t
    f = {}
    for j in (2, 3):
        for x in (1.0, 2.0, t, t + 1.0):
            f[(j, x)] = phi_unperturbed_vec(j, x, lam, deriv)
    for x in (1.0 - t, 2.0 - t, 1.0):
        f[(3, ("r", x))] = phi_unperturbed_vec(3, x, lam, deriv)

    def val(key):
        return f[key]

    out = {}
    a3_1, d3_1 = val((3, ("r", 1.0 - t)))
    a3_2, d3_2 = val((3, ("r", 2.0 - t)))
    a3_one, d3_one = val((3, ("r", 1.0)))
    for j in (2, 3):
        a1, d1 = val((j, 1.0))
        a2, d2 = val((j, 2.0))
        at, dt = val((j, t))
        at1, dt1 = val((j, t + 1.0))
        v1 = a1 - g * at * a3_1
        inner = at1 - g * at * a3_one
        v2 = a2 - g * at * a3_2 - g * a3_1 * inner
        if deriv:
            dv1 = d1 - g * (dt * a3_1 + at * d3_1)
            dinner = dt1 - g * (dt * a3_one + at * d3_one)
            dv2 = d2 - g * (dt * a3_2 + at * d3_2) - g * (d3_1 * inner + a3_1 * dinner)
        else:
            dv1 = dv2 = None
        out[(j, 1)] = (v1, dv1)
        out[(j, 2)] = (v2, dv2)
    return out


def delta_phi(j: int, x: int, lam, cfg: DeltaConfig) -> complex:
    """``phi_j(x, lambda, t)`` for ``j`` in ``{2, 3}`` and ``x`` in ``{1, 2}``."""
    if j not in (2, 3) or x not in (1, 2):
        raise ValueError("j must be 2 or 3 and x must be 1 or 2")
    return complex(_delta_phis(lam, cfg, False)[(j, x)][0])


def delta_D_with_derivative(lams, cfg: DeltaConfig):
    ph = _delta_phis(lams, cfg, True)
    a2, da2 = ph[(2, 1)]
    a3, da3 = ph[(3, 1)]
    b2, db2 = ph[(2, 2)]
    b3, db3 = ph[(3, 2)]
    d = a2 * b3 - a3 * b2
    dd = da2 * b3 + a2 * db3 - da3 * b2 - a3 * db2
    return d, dd


def delta_D(lam, cfg: DeltaConfig) -> complex:
    """Characteristic determinant of the comb model."""
    d, _ = delta_D_with_derivative(np.asarray(lam, dtype=complex), cfg)
    return complex(d) if np.ndim(d) == 0 else d


class DeltaCharacteristic:
    """Adapter exposing the comb model to the spectrum routines."""

    def __init__(self, gamma: float, t: float = 0.0):
        self.cfg = DeltaConfig(gamma, float(t))

    def evaluate(self, lams, with_deriv: bool = True):
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        d, dd = delta_D_with_derivative(lams, self.cfg)
        return d, dd, np.zeros(lams.shape)

    def shifted(self, t: float) -> "DeltaCharacteristic":
        return DeltaCharacteristic(self.cfg.gamma, self.cfg.t + t)


# ---------------------------------------------------------------------------
# the pair mu_{-1}, mu_1


@dataclass
class DeltaFlowResult:
    t: np.ndarray
    mu_minus: np.ndarray
    mu_plus: np.ndarray
    discriminant: np.ndarray
    collisions: list
    collision_values: list
    collision_windings: list
    conjugate_error: float
    endpoint_error: float
    contour_radius: float

    def branch(self, n: int) -> np.ndarray:
        if n == 1:
            return self.mu_plus
        if n == -1:
            return self.mu_minus
        raise ValueError("only the indices -1 and 1 are tracked")


def _pair_contour(radius: float) -> Contour:
    return Contour.circle(0j, radius, 96)


def _pair_moments(gamma: float, t: float, radius: float):
    ch = DeltaCharacteristic(gamma, t)
    s = contour_moments(ch, _pair_contour(radius), 2, center=0j, rtol=1e-13)
    return s


def _discriminant(gamma: float, t: float, radius: float) -> float:
    s = _pair_moments(gamma, t, radius)
    return float((2.0 * s[2] - s[1] ** 2).real)


def _split_pair(gamma: float, t: float, radius: float):
    s = _pair_moments(gamma, t, radius)
    disc = (2.0 * s[2] - s[1] ** 2).real
    s1 = s[1].real
    root = np.sqrt(complex(disc))
    guesses = np.array([0.5 * (s1 - root), 0.5 * (s1 + root)])
    ch = DeltaCharacteristic(gamma, t)
    polished, _, ok = newton_batch(ch, guesses)
    use = np.where(ok & np.isfinite(polished) & (np.abs(polished - guesses) < 1e-2 * (1 + abs(root))),
                   polished, guesses)
    order = _label_order(use)
    return use[order[0]], use[order[1]], float(disc)


def delta_flow(gamma: float, t_grid=None, radius: float | None = None,
               bisect_tol: float = 1e-8) -> DeltaFlowResult:
    """Track ``mu_{-1}(t)`` and ``mu_1(t)`` and locate their collisions.

    A fixed circle that encloses exactly these two zeros carries the power
    sums ``s1``, ``s2``; the squared gap ``(mu_1 - mu_{-1})^2 = 2 s2 - s1^2``
    is real, and collisions are its sign changes, refined by Brent's method.
    Away from the collisions each root is polished by Newton separately, so
    the conjugate-symmetry check compares independent values.
    """
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 201)
    t_grid = np.asarray(t_grid, dtype=float)
    if radius is None:
        radius = (NU * 1.5) ** 3
    for t in (t_grid[0], 0.5 * (t_grid[0] + t_grid[-1]), t_grid[-1]):
        w = winding_count(DeltaCharacteristic(gamma, t), _pair_contour(radius))
        if w != 2:
            raise CollisionNotBracketed(f"pair circle holds {w} zeros at t = {t}")
    disc = np.array([_discriminant(gamma, t, radius) for t in t_grid])
    collisions = []
    for a, b, da, db in zip(t_grid[:-1], t_grid[1:], disc[:-1], disc[1:]):
        if da == 0.0:
            collisions.append(float(a))
        elif da * db < 0:
            collisions.append(float(brentq(lambda s: _discriminant(gamma, s, radius), a, b,
                                           xtol=bisect_tol, rtol=1e-15)))
    collisions = sorted(set(collisions))
    lo, hi = [], []
    for t in t_grid:
        a, b, _ = _split_pair(gamma, t, radius)
        lo.append(a)
        hi.append(b)
    lo, hi = np.array(lo), np.array(hi)

    values, windings = [], []
    for tc in collisions:
        s = _pair_moments(gamma, tc, radius)
        a = complex(0.5 * s[1].real)
        values.append(a)
        ch = DeltaCharacteristic(gamma, tc)
        rho = 1e-2 * (1.0 + abs(a))
        windings.append(winding_count(ch, Contour.circle(a, rho, 64)))

    conj_err = 0.0
    if len(collisions) >= 2:
        inside = (t_grid > collisions[0]) & (t_grid < collisions[1]) & (disc < 0)
        if np.any(inside):
            conj_err = float(np.max(np.abs(lo[inside] - np.conj(hi[inside])) / (1.0 + np.abs(hi[inside]))))
    target = NU ** 3
    ends = [lo[0] + target, hi[0] - target, lo[-1] + target, hi[-1] - target]
    end_err = float(max(abs(e) for e in ends))
    return DeltaFlowResult(t_grid, lo, hi, disc, collisions, values, windings, conj_err, end_err, radius)
