"""Real 1-periodic coefficients represented as finite trigonometric polynomials.

A coefficient is stored through its harmonic table::

    f(x) = mean + sum_k cos_k * cos(2 pi k x) + sin_k * sin(2 pi k x),   k >= 1

Every operation below (derivatives, shifts, Fourier data, antiderivatives,
products) acts on that table exactly, so no quadrature enters the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
SQRT3 = np.sqrt(3.0)


def _trim(values: Sequence[float], degree: int) -> tuple[float, ...]:
    out = [float(v) for v in values[:degree]]
    return tuple(out + [0.0] * (degree - len(out)))


@dataclass(frozen=True)
class PeriodicCoefficient:
    """Trigonometric polynomial with period 1.

    ``cos_coeffs[k-1]`` and ``sin_coeffs[k-1]`` multiply ``cos(2 pi k x)`` and
    ``sin(2 pi k x)``. Trailing zero harmonics are dropped on construction, so
    ``degree`` is the highest harmonic with a nonzero coefficient.
    """

    mean: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    degree: int = field(init=False)

    def __post_init__(self) -> None:
        cos_c = [float(v) for v in self.cos_coeffs]
        sin_c = [float(v) for v in self.sin_coeffs]
        n = max(len(cos_c), len(sin_c))
        cos_c += [0.0] * (n - len(cos_c))
        sin_c += [0.0] * (n - len(sin_c))
        while n and cos_c[n - 1] == 0.0 and sin_c[n - 1] == 0.0:
            n -= 1
        for name, value in (("mean", self.mean), ("cos", cos_c), ("sin", sin_c)):
            if not np.all(np.isfinite(value)):
                raise ValueError(f"non-finite entry in {name} coefficients")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "cos_coeffs", tuple(cos_c[:n]))
        object.__setattr__(self, "sin_coeffs", tuple(sin_c[:n]))
        object.__setattr__(self, "degree", n)

    # construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "PeriodicCoefficient":
        return cls(mean=value)

    @classmethod
    def from_hat(cls, hat: np.ndarray) -> "PeriodicCoefficient":
        """Build from Fourier coefficients ``hat[k + d]`` for ``k = -d..d``.

        Only the nonnegative half is read; the input is assumed to come from a
        real function.
        """
        hat = np.asarray(hat, dtype=complex)
        d = (len(hat) - 1) // 2
        pos = hat[d + 1:]
        return cls(mean=float(hat[d].real),
                   cos_coeffs=tuple(2.0 * pos.real),
                   sin_coeffs=tuple(-2.0 * pos.imag))

    # tables ---------------------------------------------------------------

    @property
    def cos_array(self) -> np.ndarray:
        return np.array(self.cos_coeffs, dtype=float)

    @property
    def sin_array(self) -> np.ndarray:
        return np.array(self.sin_coeffs, dtype=float)

    def hat_array(self, degree: int | None = None) -> np.ndarray:
        """Fourier coefficients ``f^_k`` for ``k = -d..d`` as one array."""
        d = self.degree if degree is None else max(degree, self.degree)
        a = np.array(_trim(self.cos_coeffs, d))
        b = np.array(_trim(self.sin_coeffs, d))
        pos = 0.5 * (a - 1j * b)
        return np.concatenate([np.conj(pos[::-1]), [self.mean + 0j], pos])

    # evaluation -----------------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.degree == 0:
            return np.full(x.shape, self.mean) if x.ndim else float(self.mean)
        k = np.arange(1, self.degree + 1)
        arg = TWO_PI * np.multiply.outer(x, k)
        val = self.mean + np.cos(arg) @ self.cos_array + np.sin(arg) @ self.sin_array
        return float(val) if np.ndim(val) == 0 else val

    def eval(self, x):
        return self(x)

    # calculus -------------------------------------------------------------

    def derivative(self, order: int = 1) -> "PeriodicCoefficient":
        if order < 0:
            raise ValueError("derivative order must be nonnegative")
        if order == 0:
            return self
        a, b = self.cos_array, self.sin_array
        w = TWO_PI * np.arange(1, self.degree + 1)
        for _ in range(order):
            a, b = b * w, -a * w
        return PeriodicCoefficient(0.0, tuple(a), tuple(b))

    def antiderivative(self, x):
        """Closed form of ``int_0^x f(s) ds`` (includes the linear mean term)."""
        x = np.asarray(x, dtype=float)
        out = self.mean * x
        if self.degree:
            w = TWO_PI * np.arange(1, self.degree + 1)
            arg = np.multiply.outer(x, w)
            out = out + np.sin(arg) @ (self.cos_array / w) \
                + (1.0 - np.cos(arg)) @ (self.sin_array / w)
        return float(out) if np.ndim(out) == 0 else out

    # transformations ------------------------------------------------------

    def shift(self, t: float) -> "PeriodicCoefficient":
        """Coefficient of ``x -> f(x + t)``."""
        if self.degree == 0:
            return self
        w = TWO_PI * np.arange(1, self.degree + 1) * t
        a, b = self.cos_array, self.sin_array
        c, s = np.cos(w), np.sin(w)
        return PeriodicCoefficient(self.mean, tuple(a * c + b * s), tuple(b * c - a * s))

    def reflect(self) -> "PeriodicCoefficient":
        """Coefficient of ``x -> f(-x)``."""
        return PeriodicCoefficient(self.mean, self.cos_coeffs, tuple(-self.sin_array))

    def __neg__(self) -> "PeriodicCoefficient":
        return self * -1.0

    def __add__(self, other) -> "PeriodicCoefficient":
        if not isinstance(other, PeriodicCoefficient):
            other = PeriodicCoefficient(float(other))
        d = max(self.degree, other.degree)
        a = np.array(_trim(self.cos_coeffs, d)) + np.array(_trim(other.cos_coeffs, d))
        b = np.array(_trim(self.sin_coeffs, d)) + np.array(_trim(other.sin_coeffs, d))
        return PeriodicCoefficient(self.mean + other.mean, tuple(a), tuple(b))

    __radd__ = __add__

    def __sub__(self, other) -> "PeriodicCoefficient":
        return self + (-other if isinstance(other, PeriodicCoefficient) else -float(other))

    def __mul__(self, other) -> "PeriodicCoefficient":
        if isinstance(other, PeriodicCoefficient):
            return PeriodicCoefficient.from_hat(np.convolve(self.hat_array(), other.hat_array()))
        c = float(other)
        return PeriodicCoefficient(self.mean * c, tuple(self.cos_array * c),
                                   tuple(self.sin_array * c))

    __rmul__ = __mul__

    # Fourier data ---------------------------------------------------------

    def hat_coeff(self, n: int) -> complex:
        """``int_0^1 exp(-2 pi i n x) f(x) dx`` read off the harmonic table."""
        n = int(n)
        if n == 0:
            return complex(self.mean)
        k = abs(n)
        if k > self.degree:
            return 0j
        a, b = self.cos_coeffs[k - 1], self.sin_coeffs[k - 1]
        return complex(0.5 * a, -0.5 * b if n > 0 else 0.5 * b)

    def tilde_coeff(self, n: int) -> float:
        """``Re f^_n - Im f^_n / sqrt3`` for ``n >= 1``.

        As an integral this is ``(2/sqrt3) int_0^1 f(x) cos(2 pi n x - pi/6) dx``;
        the phase sign is the one the eigenvalue shifts actually follow.
        """
        if n < 1:
            raise ValueError("tilde coefficients are defined for n >= 1")
        h = self.hat_coeff(n)
        return h.real - h.imag / SQRT3

    def sup_norm_bound(self) -> float:
        """Cheap upper bound on ``max |f|``."""
        return abs(self.mean) + float(np.sum(np.abs(self.cos_array)) + np.sum(np.abs(self.sin_array)))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}


# module-level spellings used throughout the package

def eval(c: PeriodicCoefficient, x):  # noqa: A001 - mirrors the operation name
    return c(x)


def derivative(c: PeriodicCoefficient, order: int) -> PeriodicCoefficient:
    return c.derivative(order)


def shift(c: PeriodicCoefficient, t: float) -> PeriodicCoefficient:
    return c.shift(t)


def hat_coeff(c: PeriodicCoefficient, n: int) -> complex:
    return c.hat_coeff(n)


def tilde_coeff(c: PeriodicCoefficient, n: int) -> float:
    return c.tilde_coeff(n)


ZERO = PeriodicCoefficient()


@dataclass(frozen=True)
class CoefficientPair:
    """The coefficients ``(p, q)`` of ``(y'' + p y)' + p y' + q y``."""

    p: PeriodicCoefficient = ZERO
    q: PeriodicCoefficient = ZERO

    def shift(self, t: float) -> "CoefficientPair":
        return CoefficientPair(self.p.shift(t), self.q.shift(t))

    def reflected(self) -> "CoefficientPair":
        """The pair ``(p(-x), -q(-x))`` that carries the spectrum to its negative."""
        return CoefficientPair(self.p.reflect(), -self.q.reflect())

    @property
    def is_zero(self) -> bool:
        return self.p.degree == 0 and self.p.mean == 0.0 and self.q.degree == 0 and self.q.mean == 0.0

    @property
    def degree(self) -> int:
        return max(self.p.degree, self.q.degree)

    def potential(self) -> PeriodicCoefficient:
        """``V = q - p'/3``."""
        return self.q - self.p.derivative(1) * (1.0 / 3.0)

    def kernel_arrays(self) -> tuple:
        """Flat float arrays consumed by the compiled integrators."""
        d = self.degree
        return (self.p.mean, np.array(_trim(self.p.cos_coeffs, d)), np.array(_trim(self.p.sin_coeffs, d)),
                self.q.mean, np.array(_trim(self.q.cos_coeffs, d)), np.array(_trim(self.q.sin_coeffs, d)))

    def to_dict(self) -> dict:
        return {"p": self.p.to_dict(), "q": self.q.to_dict()}


def pair_p1() -> CoefficientPair:
    """``p = 0.3 cos 2 pi x``, ``q = 0.2 sin 2 pi x + 0.1 cos 4 pi x``."""
    return CoefficientPair(PeriodicCoefficient(0.0, (0.3,)),
                           PeriodicCoefficient(0.0, (0.0, 0.1), (0.2,)))

