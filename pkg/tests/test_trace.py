import numpy as np
import pytest

from tripoint.coefficients import CoefficientPair, PeriodicCoefficient
from tripoint.spectrum import Contour, cluster_sum
from tripoint.errors import InsufficientData, PeriodicityViolation
from tripoint.trace import (SampledFunction, contour_trace_sum, potential_V, recover_p, recover_q,
                            shift_spectrum, trace_partial_sum, trace_scan)


def test_potential_examples():
    q = PeriodicCoefficient(0.1, (0.2,), (0.3,))
    assert potential_V(CoefficientPair(q=q), 0.3) == pytest.approx(q(0.3))
    pc = CoefficientPair(PeriodicCoefficient(0.0, (1.0,)))
    assert potential_V(pc, 0.0) == pytest.approx(0.0)
    assert potential_V(pc, 0.25) == pytest.approx(2 * np.pi / 3)


def test_constant_pair_trivial():
    pair = CoefficientPair(PeriodicCoefficient(0.4), PeriodicCoefficient(-1.0))
    for t in (0.0, 0.3):
        tc = trace_partial_sum(pair, t, 5)
        assert tc.lhs == 0.0 and tc.rhs == 0.0


def test_zero_shift(p1):
    tc = trace_partial_sum(p1, 0.0, 5, cross_check_upto=0)
    assert tc.residual < 1e-12 and tc.rhs == 0.0


def test_small_N_forms_agree(p1):
    tc = trace_partial_sum(p1, 0.3, 6, cross_check_upto=10)
    assert tc.contour_lhs is not None
    assert abs(tc.lhs - tc.contour_lhs) < 1e-7
    assert abs(tc.lhs_imag) < 1e-8
    assert tc.residual <= tc.tail_estimate + 1e-8


def test_contour_method(p1):
    tc = trace_partial_sum(p1, 0.6, 4, method="contour")
    assert tc.method == "contour" and tc.n0 == 4
    assert abs(tc.lhs_imag) < 1e-8
    with pytest.raises(ValueError):
        trace_partial_sum(p1, 0.6, 4, method="magic")
    with pytest.raises(ValueError):
        trace_partial_sum(p1, 0.6, 0)


def test_antisymmetry(p1):
    t, N = 0.35, 5
    forward = contour_trace_sum(p1, t, N)
    backward = contour_trace_sum(p1.shift(t), -t, N)
    assert forward == pytest.approx(-backward, abs=1e-9)


def fejer_comb(gamma=40.0, K=10):
    """Trig-polynomial stand-in for a kick comb of strength gamma."""
    return CoefficientPair(q=PeriodicCoefficient(gamma, tuple(2 * gamma * (1 - k / (K + 1)) for k in range(1, K + 1))))


def test_complex_low_pair_goes_through_cluster():
    pair = fejer_comb()
    shifted = shift_spectrum(pair, 0.75, 4)
    assert shifted.n0 >= 1 and shifted.total_count == 8
    assert abs(shifted.inner_sum.imag) < 1e-8
    tc = trace_partial_sum(pair, 0.75, 4, cross_check_upto=10)
    assert tc.n0 >= 1
    assert abs(tc.lhs - tc.contour_lhs) < 1e-6
    assert abs(tc.lhs_imag) < 1e-8


def test_zero_between_disks_is_found():
    pair = CoefficientPair(q=PeriodicCoefficient(0.0, (150.0,)))
    shifted = shift_spectrum(pair, 0.0, 3)
    assert shifted.n0 == 2 and shifted.total_count == 6
    assert shifted.total == pytest.approx(cluster_sum(pair, Contour.big_circle(3)), rel=1e-9, abs=1e-7)


def test_scan_shares_base(p1):
    rows = trace_scan(p1, [0.2, 0.7], 5, threads=2)
    assert [r.t for r in rows] == [0.2, 0.7]
    single = trace_partial_sum(p1, 0.7, 5, cross_check_upto=0)
    assert rows[1].lhs == pytest.approx(single.lhs, abs=1e-12)
    assert rows[0].to_row()["residual"] == rows[0].residual


def test_recover_q_synthetic():
    p = PeriodicCoefficient(0.1, (0.3,), (0.2,))
    q = PeriodicCoefficient(0.4, (0.0, 0.1), (0.2,))
    pair = CoefficientPair(p, q)
    V = pair.potential()
    ts = np.linspace(0, 1, 33)
    flow = lambda t: V(0.0) - V(t)
    out = recover_q(flow, p, q(0.0), ts)
    assert out.max_error(q) < 1e-12
    arr = recover_q(np.array([flow(t) for t in ts]), p, q(0.0), ts)
    assert np.allclose(arr.values, out.values, atol=0)
    assert out(0.5) == pytest.approx(q(0.5), abs=1e-12)


def test_recover_q_constant():
    out = recover_q(lambda t: 0.0, PeriodicCoefficient(0.3), 0.8, np.linspace(0, 1, 9))
    assert np.allclose(out.values, 0.8)


def test_recover_p_synthetic():
    p = PeriodicCoefficient(0.1, (0.3,), (0.2,))
    q = PeriodicCoefficient(0.4, (0.0, 0.1), (0.2,))
    pair = CoefficientPair(p, q)
    V = pair.potential()
    ts = np.linspace(0, 1, 257)
    out = recover_p(lambda t: V(0.0) - V(t), q, p(0.0), p.derivative(1)(0.0), ts)
    assert out.max_error(p) < 1e-8
    const = recover_p(lambda t: 0.0, PeriodicCoefficient(0.7), 0.25, 0.0, np.linspace(0, 1, 9))
    assert np.allclose(const.values, 0.25)


def test_recover_errors():
    p = PeriodicCoefficient(0.0, (0.0, 0.0, 0.3))
    with pytest.raises(InsufficientData):
        recover_q(lambda t: 0.0, p, 0.0, np.linspace(0, 1, 5))
    q = PeriodicCoefficient(1.0)
    # a flow that is not periodic leaves p(1) != p(0)
    with pytest.raises(PeriodicityViolation):
        recover_p(lambda t: 0.5 * t, q, 0.0, 0.0, np.linspace(0, 1, 17))


def test_sampled_function_rows():
    f = SampledFunction(np.array([0.0, 1.0]), np.array([2.0, 4.0]))
    assert f(0.5) == 3.0
    assert f.rows() == [{"t": 0.0, "value": 2.0}, {"t": 1.0, "value": 4.0}]
