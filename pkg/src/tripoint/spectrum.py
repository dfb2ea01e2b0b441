"""Eigenvalues as zeros of the characteristic function.

Every routine here works with a *characteristic*: any object with a method
``evaluate(lams, with_deriv) -> (mantissa, d_mantissa, log_scale)``.  A
:class:`CoefficientPair` is wrapped automatically; the delta-comb model
supplies its own closed-form characteristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coefficients import CoefficientPair
from .errors import (LostTrack, NoConvergence, NonIntegerWinding, NotSimpleInDisk,
                     QuadratureStall, ZeroOnContour)
from .propagator import D_RTOL, NU, char_batch, log_char_D0, sector_root

MERGE_TOL = 1e-6
QUADTREE_DEPTH = 12
_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# characteristics


class PairCharacteristic:
    """Characteristic function of a smooth coefficient pair."""

    def __init__(self, pair: CoefficientPair, rtol: float = D_RTOL):
        self.pair = pair
        self.rtol = rtol

    def evaluate(self, lams, with_deriv: bool = True):
        return char_batch(self.pair, lams, with_deriv, self.rtol)

    def shifted(self, t: float) -> "PairCharacteristic":
        return PairCharacteristic(self.pair.shift(t), self.rtol)


def as_characteristic(obj):
    if isinstance(obj, CoefficientPair):
        return PairCharacteristic(obj)
    if hasattr(obj, "evaluate"):
        return obj
    raise TypeError(f"cannot build a characteristic from {type(obj).__name__}")


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class Contour:
    """Closed positively oriented curve in the lambda plane.

    ``kind`` is one of ``big-circle`` (``Gamma_N``), ``small-circle``
    (``ell_n``), ``disk`` (boundary of the counting disk of index ``n``),
    ``circle`` (plain lambda circle) and ``box`` (axis-aligned rectangle).
    """

    kind: str
    params: tuple
    nodes: int = 64

    # constructors ---------------------------------------------------------

    @classmethod
    def big_circle(cls, N: int, offset: float = 0.25, nodes: int = 256) -> "Contour":
        return cls("big-circle", (int(N), float(offset)), nodes)

    @classmethod
    def small_circle(cls, n: int, nodes: int = 64) -> "Contour":
        return cls("small-circle", (int(n),), nodes)

    @classmethod
    def disk(cls, n: int, nodes: int = 48) -> "Contour":
        if n == 0:
            raise ValueError("disk index must be nonzero")
        return cls("disk", (int(n),), nodes)

    @classmethod
    def circle(cls, center, radius: float, nodes: int = 64) -> "Contour":
        return cls("circle", (complex(center), float(radius)), nodes)

    @classmethod
    def box(cls, x0: float, x1: float, y0: float, y1: float, nodes: int = 64) -> "Contour":
        return cls("box", (float(x0), float(x1), float(y0), float(y1)), nodes)

    # geometry -------------------------------------------------------------

    @property
    def radius_lambda(self) -> float:
        if self.kind == "big-circle":
            N, off = self.params
            return (NU * (N + off)) ** 3
        if self.kind == "circle":
            return self.params[1]
        raise AttributeError("only circles carry a lambda radius")

    def _z_circle(self):
        n = self.params[0]
        rad = NU / 4.0 if self.kind == "disk" else np.pi / 4.0
        return NU * abs(n), rad, (1.0 if n > 0 else -1.0)

    def center(self) -> complex:
        if self.kind in ("big-circle",):
            return 0j
        if self.kind == "circle":
            return self.params[0]
        if self.kind == "box":
            x0, x1, y0, y1 = self.params
            return complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        c, _, sgn = self._z_circle()
        return sgn * c ** 3 + 0j

    def scale(self) -> float:
        """Typical distance from the centre to the curve."""
        if self.kind == "big-circle":
            return self.radius_lambda
        if self.kind == "circle":
            return self.params[1]
        if self.kind == "box":
            x0, x1, y0, y1 = self.params
            return 0.5 * max(x1 - x0, y1 - y0)
        c, r, _ = self._z_circle()
        return 3.0 * c * c * r

    def point(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """``lambda(theta)`` and ``d lambda / d theta`` for ``theta`` in ``[0, 2 pi)``."""
        th = np.asarray(theta, dtype=float)
        if self.kind in ("big-circle", "circle"):
            c = self.center()
            r = self.radius_lambda
            e = np.exp(1j * th)
            return c + r * e, 1j * r * e
        if self.kind in ("disk", "small-circle"):
            c, r, sgn = self._z_circle()
            w = c + r * np.exp(1j * th)
            dw = 1j * r * np.exp(1j * th)
            return sgn * w ** 3, sgn * 3.0 * w ** 2 * dw
        x0, x1, y0, y1 = self.params
        corners = np.array([complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)])
        s = np.mod(th, _TWO_PI) / (np.pi / 2.0)
        side = np.minimum(s.astype(int), 3)
        frac = s - side
        a = corners[side]
        b = corners[(side + 1) % 4]
        return a + frac * (b - a), (b - a) / (np.pi / 2.0)

    def contains(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        if self.kind in ("big-circle", "circle"):
            return np.abs(lam - self.center()) < self.radius_lambda
        if self.kind == "box":
            x0, x1, y0, y1 = self.params
            return (lam.real > x0) & (lam.real < x1) & (lam.imag > y0) & (lam.imag < y1)
        c, r, sgn = self._z_circle()
        # negative indices live on the image of the disk under lambda = -w^3
        z = np.array([sector_root(sgn * v) for v in np.atleast_1d(lam)])
        return np.abs(z - c) < r

    def quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with ``oint f dlambda ~ sum w f(nodes)``."""
        if self.kind == "box":
            m = max(2, n // 4)
            g, gw = np.polynomial.legendre.leggauss(m)
            x0, x1, y0, y1 = self.params
            corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
            pts, wts = [], []
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                pts.append(0.5 * (a + b) + 0.5 * (b - a) * g)
                wts.append(0.5 * (b - a) * gw)
            return np.concatenate(pts), np.concatenate(wts)
        th = np.arange(n) * (_TWO_PI / n)
        lam, dlam = self.point(th)
        return lam, dlam * (_TWO_PI / n)


# ---------------------------------------------------------------------------
# argument principle


@dataclass
class WindingResult:
    count: int
    nodes: int
    theta: np.ndarray = field(repr=False)
    mantissa: np.ndarray = field(repr=False)


def _zero_floor(lams) -> np.ndarray:
    r = np.abs(lams) ** (1.0 / 3.0)
    return 1e-13 / (1.0 + r * r)


def _log_D0(lams) -> np.ndarray:
    return np.array([log_char_D0(l) for l in np.atleast_1d(lams)], dtype=complex)


def _walk_values(ch, lam, reference: bool):
    m, _, ls = ch.evaluate(lam, False)
    floor_hit = np.abs(m) < _zero_floor(lam)
    if reference:
        # D / D0 is O(1) and slowly varying away from the zeros
        return m * np.exp(ls - _log_D0(lam)), np.zeros(lam.shape), floor_hit
    return m, ls, floor_hit


def _reference_count(contour: Contour) -> int:
    """Zeros ``+-(nu k)^3`` of the unperturbed determinant inside ``contour``."""
    lam, _ = contour.point(np.linspace(0.0, _TWO_PI, 129))
    reach = 1.1 * float(np.max(np.abs(lam)))
    kmax = int(np.ceil(reach ** (1.0 / 3.0) / NU)) + 1
    ks = np.arange(1, kmax + 1)
    cand = np.concatenate([(NU * ks) ** 3, -(NU * ks) ** 3]).astype(complex)
    return int(np.count_nonzero(contour.contains(cand)))


def _winding_walk(ch, contour: Contour, max_nodes: int, max_dphi: float,
                  reference: bool = False) -> WindingResult:
    theta = np.arange(contour.nodes) * (_TWO_PI / contour.nodes)
    lam, _ = contour.point(theta)
    m, ls, hit = _walk_values(ch, lam, reference)
    while True:
        if np.any(hit):
            k = int(np.argmax(hit))
            raise ZeroOnContour(f"|D| at the floor near lambda = {lam[k]}")
        nxt = np.roll(np.arange(theta.size), -1)
        ratio = m[nxt] / m
        dphi = np.angle(ratio)
        dlog = np.abs(np.log(np.abs(ratio)) + ls[nxt] - ls)
        bad = np.flatnonzero((np.abs(dphi) > max_dphi) | (dlog > 2.0))
        if bad.size == 0:
            total = dphi.sum() / _TWO_PI
            return WindingResult(int(round(total)), theta.size, theta, m)
        if theta.size + bad.size > max_nodes:
            raise NonIntegerWinding(f"phase not resolved with {max_nodes} nodes on {contour.kind}")
        th_next = np.append(theta[1:], _TWO_PI)[bad]
        mids = 0.5 * (theta[bad] + th_next)
        lm, _ = contour.point(mids)
        mm, lsm, hm = _walk_values(ch, lm, reference)
        order = np.argsort(np.concatenate([theta, mids]), kind="stable")
        theta = np.concatenate([theta, mids])[order]
        lam = np.concatenate([lam, lm])[order]
        m = np.concatenate([m, mm])[order]
        ls = np.concatenate([ls, lsm])[order]
        hit = np.concatenate([hit, hm])[order]


def winding_count(pair_or_ch, contour: Contour, max_nodes: int = 1 << 16,
                  max_dphi: float = 0.4, reference: bool = False) -> int:
    """Zeros of D inside ``contour``, counted with multiplicity.

    The phase of D is walked along the curve and segments with a large phase
    or modulus jump are bisected.  The result is accepted once a run with
    twice the node density reproduces the same integer.

    With ``reference=True`` the walk follows ``D / D0`` instead and adds the
    known zero count of ``D0``.  On large contours this needs far fewer nodes,
    because the ratio tends to one.
    """
    ch = as_characteristic(pair_or_ch)
    offset = _reference_count(contour) if reference else 0
    first = _winding_walk(ch, contour, max_nodes, max_dphi, reference)
    denser = Contour(contour.kind, contour.params, min(2 * first.nodes, max_nodes))
    second = _winding_walk(ch, denser, max_nodes, max_dphi / 2.0, reference)
    if first.count != second.count:
        raise NonIntegerWinding(f"winding unstable under refinement: {first.count} vs {second.count}")
    return second.count + offset


def contour_moments(pair_or_ch, contour: Contour, k_max: int, center=None,
                    rtol: float = 1e-12, max_nodes: int = 1 << 15) -> np.ndarray:
    """``s_k = (1/2 pi i) oint (lambda - c)^k D'/D dlambda`` for ``k = 0..k_max``.

    The node count doubles until successive rules agree; ``c`` defaults to the
    contour centre, which keeps the powers well scaled.
    """
    ch = as_characteristic(pair_or_ch)
    c = contour.center() if center is None else complex(center)
    sc = contour.scale()
    n = max(contour.nodes, 16)
    prev = None
    while True:
        lam, w = contour.quadrature(n)
        m, dm, _ = ch.evaluate(lam, True)
        if np.any(np.abs(m) < _zero_floor(lam)):
            raise ZeroOnContour("zero of D on the integration contour")
        g = dm / m * w / (2j * np.pi)
        u = (lam - c) / sc
        s_norm = np.array([np.sum(g * u ** k) for k in range(k_max + 1)])
        if prev is not None and np.all(np.abs(s_norm - prev) <= rtol * np.maximum(1.0, np.abs(s_norm))):
            return s_norm * sc ** np.arange(k_max + 1)
        if 2 * n > max_nodes:
            raise QuadratureStall(f"moments not converged with {n} nodes")
        prev = s_norm
        n *= 2


def cluster_sum(pair_or_ch, contour: Contour) -> complex:
    """Sum of the zeros of D inside ``contour`` (with multiplicity)."""
    s = contour_moments(pair_or_ch, contour, 1)
    c = contour.center()
    count = int(round(s[0].real))
    if count == 0:
        return 0j
    return complex(s[1] + count * c)


# ---------------------------------------------------------------------------
# Newton


def newton_batch(ch, seeds, max_iter: int = 60, tol: float = 2e-15):
    """Vectorised Newton on D from ``seeds``.

    Returns ``(roots, residuals, converged)`` where the residual is the last
    Newton correction ``|D/D'|``.
    """
    lam = np.array(np.atleast_1d(seeds), dtype=complex)
    res = np.full(lam.shape, np.inf)
    done = np.zeros(lam.shape, dtype=bool)
    prev_step = np.full(lam.shape, np.inf)
    for _ in range(max_iter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        m, dm, _ = ch.evaluate(lam[idx], True)
        step = m / dm
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        lam[idx] -= step
        a = np.abs(step)
        res[idx] = a
        scale = np.maximum(1.0, np.abs(lam[idx]))
        stalled = (a < 1e-9 * scale) & (a > 0.5 * prev_step[idx])
        fin = (a <= tol * scale) | stalled | bad
        done[idx[fin]] = True
        prev_step[idx] = a
    return lam, res, done


# ---------------------------------------------------------------------------
# eigenvalue records


METHODS = ("disk-newton", "contour-cluster", "continuation")


@dataclass(frozen=True)
class EigenvalueRecord:
    index: int
    value: complex
    multiplicity: int
    residual: float
    method: str
    t: float = 0.0

    def to_row(self) -> dict:
        return {"n": self.index, "t": self.t, "re": self.value.real, "im": self.value.imag,
                "multiplicity": self.multiplicity, "residual": self.residual, "method": self.method}


def _disk_seed(pair_or_ch, n: int) -> complex:
    if isinstance(pair_or_ch, CoefficientPair):
        from .asymptotics import predict
        return complex(predict(pair_or_ch, n, "O3").value)
    return complex(np.sign(n) * (NU * abs(n)) ** 3)


def locate_eigenvalue(pair_or_ch, n: int, seed=None, check_winding: bool = True,
                      verify: bool = False) -> EigenvalueRecord:
    """The simple zero in the counting disk of index ``n``."""
    if n == 0:
        raise ValueError("eigenvalue indices are nonzero")
    ch = as_characteristic(pair_or_ch)
    disk = Contour.disk(n)
    if check_winding:
        w = winding_count(ch, disk)
        if w != 1:
            raise NotSimpleInDisk(f"winding {w} on the disk of index {n}")
    s = _disk_seed(pair_or_ch, n) if seed is None else complex(seed)
    roots, res, ok = newton_batch(ch, [s])
    lam = roots[0]
    if not (ok[0] and np.isfinite(lam) and disk.contains(lam)[0]):
        raise NoConvergence(f"Newton for index {n} did not settle inside its disk")
    if verify:
        rad = 1e-3 * disk.scale()
        if winding_count(ch, Contour.circle(lam, rad, 32)) != 1:
            raise NotSimpleInDisk(f"root of index {n} failed the local winding check")
    return EigenvalueRecord(n, complex(lam), 1, float(res[0]), "disk-newton")


def locate_many(pair_or_ch, indices: Sequence[int], seeds=None) -> list[EigenvalueRecord]:
    """Batched Newton for many indices; each root must land in its own disk."""
    ch = as_characteristic(pair_or_ch)
    indices = [int(n) for n in indices]
    if seeds is None:
        seeds = [_disk_seed(pair_or_ch, n) for n in indices]
    roots, res, ok = newton_batch(ch, seeds)
    out = []
    for n, lam, r, good in zip(indices, roots, res, ok):
        if not (good and np.isfinite(lam) and Contour.disk(n).contains(lam)[0]):
            raise NoConvergence(f"Newton for index {n} did not settle inside its disk")
        out.append(EigenvalueRecord(n, complex(lam), 1, float(r), "disk-newton"))
    return out


# ---------------------------------------------------------------------------
# inner clusters


def _roots_from_moments(s: np.ndarray, center: complex) -> np.ndarray:
    """Zeros of the polynomial whose power sums are ``s[1..k]`` (``k = s[0]``)."""
    k = int(round(s[0].real))
    e = [1.0 + 0j]
    for j in range(1, k + 1):
        acc = 0j
        for i in range(1, j + 1):
            acc += (-1) ** (i - 1) * e[j - i] * s[i]
        e.append(acc / j)
    coeffs = [(-1) ** j * e[j] for j in range(k + 1)]
    return np.roots(coeffs) + center


def _quadtree(ch, box: Contour, count: int, depth: int, merge_tol: float, out: list,
              rng: np.random.Generator) -> None:
    if count <= 0:
        return
    s = contour_moments(ch, box, count)
    c = box.center()
    guesses = _roots_from_moments(s, c)
    roots, res, ok = newton_batch(ch, guesses)
    inside = box.contains(roots)
    if np.all(ok) and np.all(inside):
        order = np.argsort(roots.real)
        roots, res = roots[order], res[order]
        sep = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(sep, np.inf)
        if count == 1 or np.min(sep) > merge_tol * (1.0 + np.max(np.abs(roots))):
            for r, e in zip(roots, res):
                out.append((complex(r), 1, float(e), "contour-cluster"))
            return
    x0, x1, y0, y1 = box.params
    if depth >= QUADTREE_DEPTH:
        out.append((complex(s[1] / count + c), count, float(abs(s[1]) / count), "contour-cluster"))
        return
    for _ in range(8):
        jx, jy = rng.uniform(-0.05, 0.05, 2)
        xm = 0.5 * (x0 + x1) + jx * (x1 - x0)
        ym = 0.5 * (y0 + y1) + jy * (y1 - y0)
        kids = [Contour.box(x0, xm, y0, ym), Contour.box(xm, x1, y0, ym),
                Contour.box(xm, x1, ym, y1), Contour.box(x0, xm, ym, y1)]
        try:
            counts = [winding_count(ch, k) for k in kids]
        except ZeroOnContour:
            continue
        if sum(counts) == count:
            break
    else:
        raise NonIntegerWinding("quadtree split could not reproduce the parent count")
    for k, cnt in zip(kids, counts):
        _quadtree(ch, k, cnt, depth + 1, merge_tol, out, rng)


def inner_zeros(pair_or_ch, n0: int, merge_tol: float = MERGE_TOL, offset: float = 0.25):
    """All zeros inside ``Gamma_{n0}`` via quadtree subdivision of its bounding square."""
    ch = as_characteristic(pair_or_ch)
    circ = Contour.big_circle(n0, offset) if n0 > 0 else Contour.circle(0j, (NU * offset) ** 3)
    expected = winding_count(ch, circ)
    if expected == 0:
        return [], 0
    R = circ.radius_lambda
    half = R * (1.0 + 1e-3)
    square = Contour.box(-half, half, -half, half)
    total = winding_count(ch, square)
    found: list = []
    _quadtree(ch, square, total, 0, merge_tol, found, np.random.default_rng(12345))
    kept = [f for f in found if abs(f[0]) < R]
    if sum(f[1] for f in kept) != expected:
        raise NonIntegerWinding(f"inner search found {sum(f[1] for f in kept)} of {expected} zeros")
    return kept, expected


def _label_order(values, rel_tol: float = 1e-9) -> np.ndarray:
    """Indices sorting by real part, then imaginary part among near-equal reals."""
    values = np.asarray(values, dtype=complex)
    order = list(np.argsort(values.real, kind="stable"))
    out, i = [], 0
    while i < len(order):
        j = i + 1
        while j < len(order) and (values[order[j]].real - values[order[j - 1]].real
                                  <= rel_tol * (1.0 + abs(values[order[j]]))):
            j += 1
        group = sorted(order[i:j], key=lambda k: values[k].imag)
        out.extend(group)
        i = j
    return np.array(out, dtype=int)


def spectrum_range(pair_or_ch, N: int, verify_disks_upto: int | None = None,
                   merge_tol: float = MERGE_TOL) -> list[EigenvalueRecord]:
    """All zeros of D inside ``Gamma_N``, labelled by nondecreasing real part.

    Disk windings are audited for ``|n| <= verify_disks_upto`` (all disks by
    default).  The onset ``n0`` is the smallest index such that every audited
    disk beyond it holds exactly one zero.  Zeros inside ``Gamma_{n0}`` come
    from the quadtree, and the rest from per-disk Newton.  The total is checked
    against the winding number of ``Gamma_N``.
    """
    ch = as_characteristic(pair_or_ch)
    if N < 1:
        raise ValueError("N must be positive")
    limit = N if verify_disks_upto is None else min(N, verify_disks_upto)
    n0 = 0
    for k in range(limit, 0, -1):
        if winding_count(ch, Contour.disk(k)) != 1 or winding_count(ch, Contour.disk(-k)) != 1:
            n0 = k
            break
    total = winding_count(ch, Contour.big_circle(N), reference=True)
    while True:
        outer = [n for k in range(n0 + 1, N + 1) for n in (-k, k)]
        try:
            records = locate_many(pair_or_ch, outer) if outer else []
        except (NoConvergence, NotSimpleInDisk):
            records = None
        if records is not None:
            inner, count_inner = inner_zeros(ch, n0, merge_tol) if n0 > 0 else ([], 0)
            if total == len(records) + count_inner:
                break
        # a zero between the disks, or a disk root that would not settle: widen the inner cluster
        if n0 >= N:
            found = 0 if records is None else len(records) + count_inner
            raise NonIntegerWinding(f"Gamma_{N} holds {total} zeros but {found} were located")
        n0 += 1
    # expand clusters so that every index carries one record
    expanded = []
    for val, mult, res, method in inner:
        expanded.extend([(val, mult, res, method)] * mult)
    vals = np.array([e[0] for e in expanded], dtype=complex)
    order = _label_order(vals) if len(vals) else []
    k_neg = len(expanded) // 2
    labels = list(range(-k_neg, 0)) + list(range(1, len(expanded) - k_neg + 1))
    for lab, i in zip(labels, order):
        v, mult, res, method = expanded[i]
        records.append(EigenvalueRecord(lab, v, mult, res, method))
    records.sort(key=lambda r: r.index)
    return records


# ---------------------------------------------------------------------------
# continuation in the shift parameter


def _local_radius(n: int) -> float:
    return 0.05 * 3.0 * (NU * abs(n)) ** 2 * NU


def eigenvalue_flow(pair_or_ch, n: int, t_grid: Sequence[float], start: EigenvalueRecord | None = None,
                    merge_tol: float = MERGE_TOL, max_bisect: int = 24,
                    partner: int | None = None) -> list[EigenvalueRecord]:
    """Follow ``mu_n(t)`` along ``t_grid`` by Newton continuation.

    ``pair_or_ch`` is a coefficient pair or a characteristic with a
    ``shifted(t)`` method.  Whenever a second zero enters a small circle
    around the tracked one, both are recovered from contour moments and the
    branch is chosen by the labelling rule (real part first, then imaginary
    part) so that indices keep their meaning through collisions.
    """
    base = as_characteristic(pair_or_ch)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if partner is None:
        partner = -n if abs(n) == 1 else (n + 1 if n > 0 else n - 1)
    lower = n < partner
    rad = _local_radius(n)
    # roots move like sqrt(t - t_c) next to a collision; only a jump towards the next index is fatal
    jump_cap = 0.25 * ((NU * (abs(n) + 1)) ** 3 - (NU * abs(n)) ** 3)

    def solve_at(t, guess):
        ch = base.shifted(t)
        roots, res, ok = newton_batch(ch, [guess])
        lam = roots[0]
        good = bool(ok[0] and np.isfinite(lam))
        # the partner of a complex root sits at its conjugate, and a step across a collision
        # moves both roots by comparable amounts, so the check circle must cover both cases
        r = min(jump_cap, max(rad, 1.5 * abs(complex(guess).imag), 2.0 * abs(lam - guess) if good else 0.0))
        circ = Contour.circle(lam if good else guess, r, 32)
        try:
            w = winding_count(ch, circ)
        except (ZeroOnContour, NonIntegerWinding):
            return None
        if w == 1 and ok[0]:
            lam = complex(lam)
            # D is real on the real axis: take the conjugate the labelling rule assigns to this index
            if abs(lam.imag) > merge_tol * (1.0 + abs(lam)) and (lam.imag > 0) == lower:
                lam = lam.conjugate()
            return EigenvalueRecord(n, lam, 1, float(res[0]), "continuation", float(t))
        if w == 2:
            s = contour_moments(ch, circ, 2)
            pair_roots = _roots_from_moments(s, circ.center())
            if abs(pair_roots[0] - pair_roots[1]) <= merge_tol * (1.0 + abs(pair_roots[0])):
                v = complex(0.5 * (pair_roots[0] + pair_roots[1]))
                return EigenvalueRecord(n, v, 2, float(abs(pair_roots[0] - pair_roots[1])),
                                        "contour-cluster", float(t))
            pr, pres, pok = newton_batch(ch, pair_roots)
            gap = abs(pair_roots[0] - pair_roots[1])
            # each polished root must stay next to its own moment estimate
            if not np.all(pok) or np.any(np.abs(pr - pair_roots) > 0.25 * gap):
                pr, pres = pair_roots, np.abs(pair_roots - pair_roots[::-1])
            order = _label_order(pr)
            pick = order[0] if lower else order[1]
            return EigenvalueRecord(n, complex(pr[pick]), 1, float(pres[pick]), "continuation", float(t))
        return None

    if start is None:
        t0 = float(t_grid[0])
        first = base.shifted(t0) if t0 != 0.0 else base
        seed = _disk_seed(pair_or_ch.shift(t0), n) if isinstance(pair_or_ch, CoefficientPair) else None
        start = locate_eigenvalue(first, n, seed=seed)
    out = [EigenvalueRecord(n, start.value, start.multiplicity, start.residual, start.method, float(t_grid[0]))]
    prev = out[0]
    for t_next in t_grid[1:]:
        stack = [float(t_next)]
        t_cur = prev.t
        depth = 0
        while stack:
            t_target = stack[-1]
            rec = solve_at(t_target, prev.value)
            if rec is not None and abs(rec.value - prev.value) <= jump_cap:
                prev = rec
                t_cur = stack.pop()
                continue
            depth += 1
            if depth > max_bisect:
                raise LostTrack(f"index {n} lost between t = {t_cur} and {t_target}")
            stack.append(0.5 * (t_cur + t_target))
        out.append(prev)
    return out
