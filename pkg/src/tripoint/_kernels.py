"""Compiled integrators for the characteristic function.

The characteristic determinant is evaluated without ever forming the full
fundamental matrix.  On ``[0, 1]`` the adjoint system ``w' = -P^T w`` is
integrated from ``w(0) = e1``; then ``v(1) = w(1) x e1`` is carried by
``v' = P v`` across ``[1, 2]`` and ``D = v_1(2)``.  Both legs only follow the
dominant growth of a single vector, so ``D`` keeps full relative precision
even where its size is ``exp(1.5 Re z)``.  The state is renormalised after
every step and the discarded magnitude accumulated as a natural logarithm.

Variational equations in ``lambda`` ride along to give ``dD/dlambda``.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
RK_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
RK_B = np.ascontiguousarray(_dop.B)
RK_C = np.ascontiguousarray(_dop.C[:_NS])
RK_E3 = np.ascontiguousarray(_dop.E3)
RK_E5 = np.ascontiguousarray(_dop.E5)

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def trig_eval(x, mean, cc, ss):
    c1 = np.cos(TWO_PI * x)
    s1 = np.sin(TWO_PI * x)
    ck = c1
    sk = s1
    val = mean
    for k in range(cc.shape[0]):
        val += cc[k] * ck + ss[k] * sk
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
    return val


@njit(cache=True)
def _rhs(leg, x, y, lam, pm, pc, ps, qm, qc, qs, nvar, out):
    p = trig_eval(x, pm, pc, ps)
    r = lam - trig_eval(x, qm, qc, qs)
    if leg == 0:
        out[0] = p * y[1] - r * y[2]
        out[1] = -y[0] + p * y[2]
        out[2] = -y[1]
        if nvar == 6:
            out[3] = p * y[4] - r * y[5] - y[2]
            out[4] = -y[3] + p * y[5]
            out[5] = -y[4]
    else:
        out[0] = y[1]
        out[1] = -p * y[0] + y[2]
        out[2] = r * y[0] - p * y[1]
        if nvar == 6:
            out[3] = y[4]
            out[4] = -p * y[3] + y[5]
            out[5] = r * y[3] - p * y[4] + y[0]


@njit(cache=True)
def _block_scale(y, lo, hi):
    s = 0.0
    for i in range(lo, hi):
        a = abs(y[i])
        if a > s:
            s = a
    return s


@njit(cache=True)
def _integrate_leg(leg, x0, x1, y, lam, pm, pc, ps, qm, qc, qs, nvar,
                   rtol, h0, A, B, C, E3, E5, max_steps):
    """Advance ``y`` in place from x0 to x1; return (log_scale_gain, steps, ok)."""
    ns = B.shape[0]
    K = np.empty((ns + 1, nvar), dtype=np.complex128)
    ytmp = np.empty(nvar, dtype=np.complex128)
    ynew = np.empty(nvar, dtype=np.complex128)
    f = np.empty(nvar, dtype=np.complex128)
    x = x0
    h = h0
    logs = 0.0
    steps = 0
    _rhs(leg, x, y, lam, pm, pc, ps, qm, qc, qs, nvar, f)
    for i in range(nvar):
        K[0, i] = f[i]
    nblocks = nvar // 3
    while x < x1:
        if steps >= max_steps:
            return logs, steps, False
        last = False
        if x + h >= x1:
            h = x1 - x
            last = True
        for s in range(1, ns):
            for i in range(nvar):
                acc = 0.0j
                for j in range(s):
                    acc += A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            _rhs(leg, x + C[s] * h, ytmp, lam, pm, pc, ps, qm, qc, qs, nvar, f)
            for i in range(nvar):
                K[s, i] = f[i]
        for i in range(nvar):
            acc = 0.0j
            for j in range(ns):
                acc += B[j] * K[j, i]
            ynew[i] = y[i] + h * acc
        _rhs(leg, x + h, ynew, lam, pm, pc, ps, qm, qc, qs, nvar, f)
        for i in range(nvar):
            K[ns, i] = f[i]
        # error norm with a separate scale per block: each block is a vector
        # solution of a linear system, so its norm is the natural yardstick
        e5 = 0.0
        e3 = 0.0
        for b in range(nblocks):
            sc = max(_block_scale(y, 3 * b, 3 * b + 3), _block_scale(ynew, 3 * b, 3 * b + 3))
            sc = rtol * sc + 1e-300
            for i in range(3 * b, 3 * b + 3):
                a5 = 0.0j
                a3 = 0.0j
                for j in range(ns + 1):
                    a5 += E5[j] * K[j, i]
                    a3 += E3[j] * K[j, i]
                e5 += (abs(a5) / sc) ** 2
                e3 += (abs(a3) / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(h) * e5 / np.sqrt((e5 + 0.01 * e3) * nvar)
        if err <= 1.0:
            x = x1 if last else x + h
            steps += 1
            sc = _block_scale(ynew, 0, 3)
            if sc == 0.0:
                sc = 1.0
            inv = 1.0 / sc
            for i in range(nvar):
                y[i] = ynew[i] * inv
                K[0, i] = K[ns, i] * inv
            logs += np.log(sc)
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * err ** (-1.0 / 8.0)))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-1.0 / 8.0))
            if h < 1e-14 * (1.0 + abs(x)):
                return logs, steps, False
    return logs, steps, True


@njit(cache=True)
def char_batch(lams, pm, pc, ps, qm, qc, qs, with_deriv, rtol, A, B, C, E3, E5, max_steps):
    """Evaluate D (and D') at every entry of ``lams``.

    Returns ``(d_mant, dd_mant, log_scale, status)``: ``D = d_mant*exp(log_scale)``
    and likewise for ``D'``.  ``status`` holds the accepted step count, or ``-1``
    when the step control failed.
    """
    n = lams.shape[0]
    nvar = 6 if with_deriv else 3
    d_mant = np.empty(n, dtype=np.complex128)
    dd_mant = np.zeros(n, dtype=np.complex128)
    log_scale = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    y = np.empty(nvar, dtype=np.complex128)
    for k in range(n):
        lam = lams[k]
        for i in range(nvar):
            y[i] = 0.0
        y[0] = 1.0
        r3 = abs(lam) ** (1.0 / 3.0)
        h0 = 0.25 / (1.0 + r3)
        l0, s0, ok0 = _integrate_leg(0, 0.0, 1.0, y, lam, pm, pc, ps, qm, qc, qs, nvar,
                                     rtol, h0, A, B, C, E3, E5, max_steps)
        w1 = y[1]
        w2 = y[2]
        y[0] = 0.0
        y[1] = w2
        y[2] = -w1
        if nvar == 6:
            w4 = y[4]
            w5 = y[5]
            y[3] = 0.0
            y[4] = w5
            y[5] = -w4
        # restart the mantissa near unit size for the second leg
        sc = _block_scale(y, 0, 3)
        if sc == 0.0:
            sc = 1.0
        for i in range(nvar):
            y[i] = y[i] / sc
        l1, s1, ok1 = _integrate_leg(1, 1.0, 2.0, y, lam, pm, pc, ps, qm, qc, qs, nvar,
                                     rtol, h0, A, B, C, E3, E5, max_steps)
        d_mant[k] = y[0]
        if nvar == 6:
            dd_mant[k] = y[3]
        log_scale[k] = l0 + l1 + np.log(sc)
        status[k] = s0 + s1 if (ok0 and ok1) else -1
    return d_mant, dd_mant, log_scale, status
