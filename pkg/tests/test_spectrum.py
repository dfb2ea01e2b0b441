import numpy as np
import pytest

from tripoint.coefficients import CoefficientPair, PeriodicCoefficient
from tripoint.deltamodel import DeltaCharacteristic, delta_flow
from tripoint.errors import NotSimpleInDisk
from tripoint.propagator import NU
from tripoint.spectrum import (Contour, PairCharacteristic, cluster_sum, eigenvalue_flow, inner_zeros,
                               locate_eigenvalue, locate_many, spectrum_range, winding_count)

# mu_1, mu_-1, mu_2 of the P1 pair from a 30-digit Taylor integrator plus secant iteration
P1_ROOTS = {1: 48.22006117751149, -1: -48.2205755136272, 2: 381.84458159109414}


def test_disk_winding_unperturbed(zero_pair):
    assert winding_count(zero_pair, Contour.disk(1)) == 1
    assert winding_count(zero_pair, Contour.disk(-3)) == 1
    # annulus-free region between two counting disks
    mid = 0.5 * ((NU * 2) ** 3 + (NU * 3) ** 3)
    assert winding_count(zero_pair, Contour.circle(mid, 50.0)) == 0


def test_big_circle_count(zero_pair):
    # the numerical count is 2N: the 2N+1 of the counting lemma includes a zero near 0 that D does not have
    assert winding_count(zero_pair, Contour.big_circle(3)) == 6
    assert winding_count(zero_pair, Contour.big_circle(3), reference=True) == 6


def test_reference_walk_agrees(p1):
    for N in (2, 5):
        c = Contour.big_circle(N)
        assert winding_count(p1, c) == winding_count(p1, c, reference=True) == 2 * N


def test_additivity(p1):
    total = winding_count(p1, Contour.big_circle(3))
    parts = sum(winding_count(p1, Contour.disk(n)) for n in (-3, -2, -1, 1, 2, 3))
    assert total == parts


def test_spectrum_unperturbed(zero_pair):
    recs = spectrum_range(zero_pair, 4)
    assert [r.index for r in recs] == [-4, -3, -2, -1, 1, 2, 3, 4]
    for r in recs:
        exact = np.sign(r.index) * (NU * abs(r.index)) ** 3
        assert abs(r.value - exact) <= 1e-8 * abs(exact)
    reals = [r.value.real for r in recs]
    assert reals == sorted(reals)


def constant_p_eigenvalue(p0, n):
    """Exact mu_n for constant p and q = 0.

    The exponents k solve k^3 + 2 p0 k = lambda; the three-point condition
    forces two of them to differ by 2 pi i n.
    """
    a = np.sqrt((np.pi ** 2 * n ** 2 - 2 * p0) / 3)
    return np.sign(n) * 2 * a * (a ** 2 + np.pi ** 2 * n ** 2)


def test_locate_examples(zero_pair):
    assert locate_eigenvalue(zero_pair, 2).value == pytest.approx((2 * NU) ** 3, rel=1e-10)
    p0 = 0.4
    pair = CoefficientPair(PeriodicCoefficient(p0))
    for n in (3, 12, -7):
        mu = locate_eigenvalue(pair, n).value
        assert mu.real == pytest.approx(constant_p_eigenvalue(p0, n), rel=1e-12)
        lead = np.sign(n) * (NU * abs(n)) ** 3 - 2 * NU * n * p0
        assert abs(mu.real - lead) < 1e-3


def test_p1_roots_oracle(p1):
    for rec in locate_many(p1, list(P1_ROOTS)):
        assert rec.value.real == pytest.approx(P1_ROOTS[rec.index], rel=1e-10)
        assert abs(rec.value.imag) < 1e-9


def test_p1_spectrum_counts_and_labels(p1):
    recs = spectrum_range(p1, 6)
    assert len(recs) == 12 == winding_count(p1, Contour.big_circle(6), reference=True)
    vals = np.array([r.value for r in recs])
    assert np.all(np.diff(vals.real) >= 0)
    # conjugate closure, D is real on the real axis
    assert np.allclose(np.sort_complex(vals), np.sort_complex(np.conj(vals)))
    for r in recs:
        assert winding_count(p1, Contour.circle(r.value, 1e-3 * (1 + abs(r.value)), 32)) == r.multiplicity


def test_cluster_sum(zero_pair, p1):
    assert abs(cluster_sum(zero_pair, Contour.big_circle(2))) < 1e-6
    single = locate_eigenvalue(p1, 3).value
    assert cluster_sum(p1, Contour.disk(3)) == pytest.approx(single, rel=1e-7)
    mid = 0.5 * ((NU * 2) ** 3 + (NU * 3) ** 3)
    assert abs(cluster_sum(zero_pair, Contour.circle(mid, 50.0))) < 1e-8


def test_quadtree_finds_complex_pair():
    # a strong kick makes mu_-1, mu_1 complex for this shift
    ch = DeltaCharacteristic(40.0, 0.25)
    zeros, count = inner_zeros(ch, 1)
    assert count == 2
    vals = [v for v, mult, _, _ in zeros for _ in range(mult)]
    assert len(vals) == 2
    a, b = sorted(vals, key=lambda v: v.imag)
    assert abs(a.imag) > 1.0
    assert a == pytest.approx(np.conj(b), rel=1e-7)


def test_not_simple_raises():
    ch = DeltaCharacteristic(40.0, 0.25)
    with pytest.raises(NotSimpleInDisk):
        locate_eigenvalue(ch, 1)


def test_delta_small_gamma_locate():
    ch = DeltaCharacteristic(2.0, 0.3)
    rec = locate_eigenvalue(ch, 1)
    ref = cluster_sum(ch, Contour.disk(1))
    assert rec.value == pytest.approx(ref, rel=1e-8)


def test_flow_invariant_for_constant_pair():
    pair = CoefficientPair(PeriodicCoefficient(0.2), PeriodicCoefficient(-0.1))
    mu = locate_eigenvalue(pair, 2).value
    flow = eigenvalue_flow(pair, 2, [0.0, 0.3, 0.7])
    assert all(abs(r.value - mu) < 1e-9 * abs(mu) for r in flow)


def test_flow_periodic(p1):
    flow = eigenvalue_flow(p1, 3, np.linspace(0, 1, 9))
    assert flow[-1].value == pytest.approx(flow[0].value, rel=1e-10)
    ch = PairCharacteristic(p1)
    assert ch.shifted(0.0).evaluate([flow[0].value])[0].shape == (1,)


def test_flow_matches_delta_model():
    ts = np.linspace(0.0, 1.0, 41)
    ref = delta_flow(40.0, ts)
    ch = DeltaCharacteristic(40.0)
    for n in (1, -1):
        flow = eigenvalue_flow(ch, n, ts)
        got = np.array([r.value for r in flow])
        err = np.abs(got - ref.branch(n)) / (1 + np.abs(ref.branch(n)))
        assert np.max(err) < 1e-6


def test_zero_between_disks():
    # a strong cosine pushes one zero out of every counting disk
    pair = CoefficientPair(q=PeriodicCoefficient(0.0, (150.0,)))
    recs = spectrum_range(pair, 3)
    assert [r.index for r in recs] == [-3, -2, -1, 1, 2, 3]
    vals = [r.value.real for r in recs]
    assert vals == sorted(vals)
    assert vals[2] == pytest.approx(-115.32546775115962, rel=1e-9)
    assert vals[3] == pytest.approx(-33.30165901971774, rel=1e-9)


def test_complex_pair_labels():
    K, gamma = 10, 40.0
    pair = CoefficientPair(q=PeriodicCoefficient(gamma, tuple(2 * gamma * (1 - k / (K + 1)) for k in range(1, K + 1))))
    recs = {r.index: r.value for r in spectrum_range(pair.shift(0.75), 2)}
    assert recs[-1].imag < -1 and recs[1].imag > 1
    assert recs[-1] == pytest.approx(np.conj(recs[1]), rel=1e-9)
