import numpy as np
import pytest

from tripoint.birkhoff import (MM, B_term, BirkhoffSetup, build_A, char_D_via_birkhoff, check_sector, det_A0,
                               factorization_deviation, jost_phi, kernel_K, ode_residual, setup, solve_X,
                               uniform_grid, xi, xi_two_by_two)
from tripoint.coefficients import CoefficientPair, PeriodicCoefficient
from tripoint.errors import NotContractive
from tripoint.propagator import NU, TAU, char_D, companion

pair_cos = CoefficientPair(PeriodicCoefficient(0.0, (1.0,)))


def slope(zs, vals):
    return float(np.polyfit(np.log(zs), np.log(vals), 1)[0])


def test_model_constants():
    assert TAU ** 3 == pytest.approx(1.0)
    assert 1 + TAU + TAU ** 2 == pytest.approx(0.0, abs=1e-15)
    assert MM.kappa == pytest.approx(1j * (TAU - 1))
    for z in (3.0, 20 * np.exp(0.4j), 7 + 1j):
        assert np.linalg.det(MM.Omega(z)) == pytest.approx(-1j * 3 * np.sqrt(3) * z ** 3)
        assert np.allclose(MM.Omega_inv(z) @ MM.Omega(z), np.eye(3))
    # the p-part of the conjugated generator minus 2T^2 has zero diagonal
    assert np.allclose(np.diag(MM.P - 2 * MM.T2), 0)


def test_conjugated_generator(p1):
    z, x = 17 * np.exp(0.3j), 0.41
    st = setup(p1, 1)
    direct = MM.Omega_inv(z) @ companion(p1, z ** 3)(x) @ MM.Omega(z)
    assert np.allclose(st.generator(x, z), direct, rtol=1e-12, atol=1e-12 * abs(z))


def test_sector_ordering():
    for z in 30 * np.exp(1j * np.linspace(0, np.pi / 3 - 1e-9, 7)):
        r = [(TAU * z).real, (TAU ** 2 * z).real, z.real]
        assert r[0] <= r[1] + 1e-12 and r[1] <= r[2] + 1e-12
    with pytest.raises(ValueError):
        check_sector(np.exp(1j * np.pi / 3))
    with pytest.raises(ValueError):
        check_sector(-1.0)


def test_w2_structure(p1):
    h = MM.h(p1, 0.3)
    W = MM.W2(p1, 0.3)
    assert np.allclose(np.diag(W), 0)
    assert W[0, 1] == pytest.approx(h / 3) and W[0, 2] == pytest.approx(np.conj(h) / 3)


def test_theta_and_phi_structure(p1):
    for m in (1, 2, 3):
        st = setup(p1, m)
        z, x = 40.0, np.array([0.2, 1.3])
        th = st.theta(x, z)
        assert np.allclose(th, np.diag(MM.T), atol=2 / abs(z) ** 2)
        lead = st.phi(x, 1e6)
        assert np.allclose(lead[:, [0, 1, 2], [0, 1, 2]], 0, atol=1e-5)
    with pytest.raises(ValueError):
        BirkhoffSetup(p1, 4)


def test_theta_integral_closed_form(p1):
    st = setup(p1, 3)
    z = 12 * np.exp(0.2j)
    xs = np.linspace(0, 2, 2001)
    num = np.cumsum(st.theta(xs, z), axis=0)
    th = st.theta(xs, z)
    trap = np.concatenate([[np.zeros(3)], np.cumsum(0.5 * (th[1:] + th[:-1]) * (xs[1] - xs[0]), axis=0)])
    assert np.allclose(st.theta_integral(xs, z), trap, atol=1e-7)
    del num


def test_kernel_examples(zero_pair):
    st = setup(zero_pair, 1)
    z = 9.0
    assert kernel_K(st, 2, 2, 0.3, 0.8, z) == -1
    assert kernel_K(st, 2, 2, 0.8, 0.3, z) == 0
    assert kernel_K(st, 1, 3, 0.9, 0.4, z) == pytest.approx(np.exp(z * 0.5 * (TAU - 1)))
    assert kernel_K(st, 1, 3, 0.4, 0.9, z) == 0
    rng = np.random.default_rng(5)
    for _ in range(200):
        l, j = rng.integers(1, 4, 2)
        x, s = rng.uniform(0, 2, 2)
        zz = 25 * np.exp(1j * rng.uniform(0, np.pi / 3))
        assert abs(kernel_K(st, int(l), int(j), x, s, zz)) <= 1 + 1e-12


def test_unperturbed_X_is_identity(zero_pair):
    sol = solve_X(setup(zero_pair, 1), 20.0, grid=uniform_grid(65))
    assert sol.iterations == 1
    assert np.array_equal(sol.values, np.broadcast_to(np.eye(3), sol.values.shape))
    assert np.allclose(B_term(setup(zero_pair, 2), 20.0, uniform_grid(65)), 0)


def test_unperturbed_A(zero_pair):
    z = 6 * np.exp(0.2j)
    A = build_A(setup(zero_pair, 1), z, grid=uniform_grid(65))
    for x in (0.5, 2.0):
        k = A.index(x)
        expect = MM.Omega(z) @ np.diag(np.exp(z * np.diag(MM.T) * x))
        assert np.allclose(A.matrix(k), expect)
    assert jost_phi(setup(zero_pair, 1), 3, 1.0, z, A) == pytest.approx(np.exp(z))


def test_boundary_conditions(p1):
    sol = solve_X(setup(p1, 1), 30 * np.exp(0.25j))
    X0, X2 = sol.values[0], sol.values[-1]
    upper = np.triu_indices(3, 1)
    lower = np.tril_indices(3)
    assert np.all(X0[upper] == 0)
    assert np.allclose(X2[lower], np.eye(3)[lower], rtol=0, atol=0)
    assert sol.measured_ratio <= sol.contraction_estimate


def test_second_order_remainder_ratio(p1):
    st = setup(p1, 1)
    errs = []
    for z in (30.0, 60.0):
        sol = solve_X(st, z)
        B = B_term(st, z, sol.grid)
        errs.append(np.max(np.abs(sol.values - np.eye(3) - B / z)))
    # an O(z^-2) remainder shrinks at least fourfold when z doubles; smooth P1 does better
    assert errs[0] / errs[1] > 3.5


def test_B_diagonal_decay(p1):
    st = setup(p1, 1)
    zs = [20.0, 40.0, 80.0]
    diag = [np.max(np.abs(B_term(st, z, uniform_grid(1025))[:, [0, 1, 2], [0, 1, 2]])) for z in zs]
    assert slope(zs, diag) <= -0.9


def test_B_offdiagonal_matches_oscillatory_integral():
    # for l < j the first correction is a one-sided integral of Phi_lj times the kernel
    st = setup(pair_cos, 1)
    z = 2 * np.pi * 5 / np.sqrt(3)
    g = uniform_grid(4097)
    B = B_term(st, z, g)
    k = np.searchsorted(g, 1.0)
    s = g[:k + 1]
    vals = np.array([kernel_K(st, 1, 2, 1.0, si, z) for si in s]) * st.phi(s, z)[:, 0, 1]
    ref = np.trapezoid(vals, s)
    assert B[k, 0, 1] == pytest.approx(ref, rel=1e-5)


def test_not_contractive(p1):
    big = CoefficientPair(PeriodicCoefficient(0.0, (40.0,)), PeriodicCoefficient(0.0, (30.0,)))
    with pytest.raises(NotContractive):
        solve_X(setup(big, 1), 5.0, grid=uniform_grid(129))


def test_exact_variant_factorisation(p1):
    z = 20 * np.exp(0.3j)
    for m in (1, 2):
        assert factorization_deviation(setup(p1, m, "exact"), z) < 1e-9


def test_ode_residual(p1):
    assert ode_residual(setup(p1, 1), 25.0) <= 1e-7


def test_xi_and_D_consistency(p1):
    st = setup(p1, 1)
    z = 15 * np.exp(0.35j)
    A = build_A(st, z)
    assert char_D_via_birkhoff(st, z, A) == pytest.approx(char_D(p1, z ** 3).d_value, rel=1e-9)
    phi32 = jost_phi(st, 3, 2.0, z, A)
    assert xi(st, z, A) == pytest.approx(char_D(p1, z ** 3).d_value * det_A0(st, z, A) / phi32, rel=1e-9)


def test_xi_zeros_unperturbed(zero_pair):
    st = setup(zero_pair, 1)
    for n in (3, 6):
        assert abs(xi(st, NU * n, build_A(st, NU * n, grid=uniform_grid(257)))) < 1e-9


def test_xi_two_by_two_near_real_axis(p1):
    st = setup(p1, 1)
    z = 40 * np.exp(0.1j)
    A = build_A(st, z)
    full, reduced = xi(st, z, A), xi_two_by_two(st, z, A)
    assert abs(full - reduced) <= 1e-6 * abs(full)


def test_det_A0_exact(p1):
    # det A is constant in x; at x = 2 it is det Omega times det U(2) = 1 + O(z^-6)
    for m in (1, 2, 3):
        st = setup(p1, m)
        for z in (20.0, 40.0 * np.exp(0.5j), 80.0):
            assert det_A0(st, z) == pytest.approx(-1j * 3 * np.sqrt(3) * z ** 3, rel=1e-9)


def test_phi3_growth(p1):
    st = setup(p1, 1)
    for z in (30.0, 60.0):
        ratio = abs(jost_phi(st, 3, 2.0, z)) / np.exp(2 * z)
        assert abs(ratio - 1) < 2 / z


def test_constant_p_jost_structure():
    p0 = 0.5
    pair = CoefficientPair(PeriodicCoefficient(p0))
    st = setup(pair, 1)
    for z in (20.0, 40.0):
        got = jost_phi(st, 1, 1.0, z)
        lead = np.exp(TAU * z - 2 * p0 * TAU ** 2 / (3 * z))
        assert abs(got / lead - 1) < 5 / z ** 2
