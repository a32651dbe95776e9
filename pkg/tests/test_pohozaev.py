import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcurv.core import coefficients
from qcurv.delaunay import Degenerate, cached_orbit, translated_delaunay
from qcurv.ode import hamiltonian
from qcurv.pohozaev import (
    FieldJet,
    JetField,
    OutOfRange,
    QuadratureError,
    RadialField,
    SampledField,
    ScaledField,
    SliceQuadrature,
    generalized_invariant,
    ham_cyl_density,
    ham_density,
    necksize_from_pohozaev,
    orbit_field,
    pohozaev_of_necksize,
    pohozaev_range,
    slice_invariant,
    sphere_field,
    translated_delaunay_field,
)

EPS_GRID = [0.1 * k for k in range(1, 10)]


# --- densities ------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from([5, 6, 8]))
def test_density_reduces_to_hamiltonian_exactly(v, d1, d2, d3, n):
    c = coefficients(n)
    y = (v, d1, d2, d3)
    assert float(ham_density(FieldJet.from_state(y), c)) == hamiltonian(y, c)


@pytest.mark.parametrize("n", range(5, 13))
def test_density_at_cylinder(n):
    c = coefficients(n)
    h = float(ham_density(FieldJet(c.eps_n), c))
    assert abs(h - c.cylinder_energy) <= 1e-12 * abs(c.cylinder_energy)


@pytest.mark.parametrize("s", [0.0, 0.5, -0.8])
def test_density_angular_terms(s):
    # v = 1, v_s = 1: the gradient term -(n(n-4)/4)(1-s^2) and the angular
    # Laplacian (n-1) s, which enters as -(1/2)((n-1) s)^2
    n = 5
    c = coefficients(n)
    expected = -(n * (n - 4) / 4) * (1 - s * s) - 0.5 * ((n - 1) * s) ** 2 - c.c0 / 2 + c.power_coeff
    assert float(ham_density(FieldJet(1.0, v_s=1.0), c, s)) == pytest.approx(expected, rel=1e-14)


def test_density_mixed_term_sign():
    c = coefficients(6)
    base = float(ham_density(FieldJet(0.7), c, 0.3))
    with_ts = float(ham_density(FieldJet(0.7, v_ts=0.5), c, 0.3))
    assert with_ts - base == pytest.approx((1 - 0.09) * 0.25, rel=1e-13)


def test_power_split(rng):
    c = coefficients(7)
    y = np.column_stack([rng.uniform(0.1, 1.2, 20), rng.normal(0, 1, (20, 3))])
    jet = FieldJet.from_state(y)
    diff = ham_density(jet, c) - ham_cyl_density(jet, c)
    np.testing.assert_allclose(diff, c.power_coeff * y[:, 0] ** c.power_exp, rtol=1e-13, atol=1e-14)


def test_cyl_density_at_cylinder_n5():
    c = coefficients(5)
    got = float(ham_cyl_density(FieldJet(c.eps_n), c))
    assert got == pytest.approx(c.cylinder_energy - (21 / 32) * c.eps_n ** 10, rel=1e-13)


def test_cyl_density_vanishes_with_v():
    c = coefficients(5)
    vals = [abs(float(ham_cyl_density(FieldJet(v, v, v, v, v, v, v), c, 0.2))) for v in (1e-2, 1e-4, 1e-6)]
    assert vals[2] < 1e-10 and vals[0] > vals[1] > vals[2]


def test_density_rejects_nonpositive():
    with pytest.raises(ValueError):
        ham_density(FieldJet(0.0), coefficients(5))


# --- quadrature -------------------------------------------------------------------

def _sphere_moment(n, k):
    # average of s^k over S^{n-1}
    if k % 2:
        return 0.0
    out = 1.0
    for i in range(k // 2):
        out *= (2 * i + 1) / (n + 2 * i)
    return out


@pytest.mark.parametrize("n", [5, 6, 9])
@pytest.mark.parametrize("m", [4, 16, 64])
def test_quadrature_exact_for_polynomials(n, m):
    q = SliceQuadrature(n, m)
    assert np.all(q.weights > 0)
    assert q.area == pytest.approx(coefficients(n).sphere_area, rel=1e-15)
    for k in range(0, 2 * m):
        got = q.integrate(q.nodes ** k)
        assert got == pytest.approx(q.area * _sphere_moment(n, k), rel=1e-11, abs=1e-14)


def test_quadrature_against_monte_carlo(rng):
    n = 5
    x = rng.normal(size=(400_000, n))
    s = x[:, 0] / np.linalg.norm(x, axis=1)
    f = lambda s: np.exp(s) / (2 + s)
    mc = coefficients(n).sphere_area * f(s).mean()
    err = coefficients(n).sphere_area * f(s).std() / math.sqrt(len(s))
    assert abs(SliceQuadrature(n).integrate(f(SliceQuadrature(n).nodes)) - mc) < 5 * err


def test_quadrature_order_check():
    o = cached_orbit(0.5 * coefficients(5).eps_n, 5)
    field = translated_delaunay_field(o, 0.9)
    with pytest.raises(QuadratureError):
        slice_invariant(field, 0.3, coefficients(5), SliceQuadrature(5, 3))


# --- slice invariant -----------------------------------------------------------------

@pytest.mark.parametrize("rel", [0.2, 0.6])
def test_radial_slice_is_area_times_hamiltonian(rel):
    c = coefficients(5)
    o = cached_orbit(rel * c.eps_n, 5)
    f = orbit_field(o)
    for t, y in zip(o.t[::97], o.states[::97]):
        assert slice_invariant(f, t, c) == pytest.approx(c.sphere_area * hamiltonian(y, c), rel=1e-14, abs=1e-15)
    assert slice_invariant(f, 1.234, c) == pytest.approx(c.sphere_area * o.ham_level, rel=1e-9)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_sphere_slice_vanishes(n):
    c = coefficients(n)
    for t in (-3.0, 0.0, 2.5):
        assert abs(slice_invariant(sphere_field(n), t, c)) <= 1e-12


@pytest.mark.parametrize("n", [5, 6])
@pytest.mark.parametrize("rel", [0.3, 0.6])
@pytest.mark.parametrize("a", [0.25, 0.5])
def test_translated_delaunay_invariant(n, rel, a):
    c = coefficients(n)
    o = cached_orbit(rel * c.eps_n, n)
    ref = c.sphere_area * o.ham_level
    f = translated_delaunay_field(o, a)
    vals = np.array([slice_invariant(f, t, c) for t in np.linspace(2, 6, 9)])
    assert np.max(np.abs(vals - ref)) <= 1e-6 * abs(ref)


def test_translated_field_matches_point_values():
    c = coefficients(6)
    o = cached_orbit(0.4 * c.eps_n, 6)
    f = translated_delaunay_field(o, 0.3, phase=0.7)
    t, s = np.array([2.0, 3.5]), np.array([-0.4, 0.9])
    np.testing.assert_allclose(f.value(t, s), translated_delaunay(o, 0.3, t, s, phase=0.7), rtol=1e-14)


def test_sampled_field_agrees_with_jets():
    c = coefficients(5)
    o = cached_orbit(0.6 * c.eps_n, 5)
    exact = translated_delaunay_field(o, 0.4)
    sampled = SampledField(lambda t, s: translated_delaunay(o, 0.4, t, s))
    for t in (2.0, 3.3):
        assert slice_invariant(sampled, t, c) == pytest.approx(slice_invariant(exact, t, c), rel=1e-7)


def _flipped_sign_density(j, s, c):
    n = c.n
    lap = (1 - s * s) * j.v_ss - (n - 1) * s * j.v_s
    return (-j.v_t * j.v_ttt + 0.5 * j.v_tt ** 2 + 0.5 * c.c2 * j.v_t ** 2 - 0.5 * c.c0 * j.v ** 2
            - (1 - s * s) * j.v_ts ** 2 + 0.5 * lap ** 2 + 0.25 * n * (n - 4) * (1 - s * s) * j.v_s ** 2
            + c.power_coeff * j.v ** c.power_exp)


def test_flipped_angular_signs_are_not_conserved():
    c = coefficients(5)
    o = cached_orbit(0.5 * c.eps_n, 5)
    f = translated_delaunay_field(o, 0.5)
    q = SliceQuadrature(5)
    vals = [q.integrate(_flipped_sign_density(f.jet(np.full(q.m, t), q.nodes), q.nodes, c))
            for t in np.linspace(2, 6, 9)]
    assert np.ptp(vals) > 1e-5 * abs(c.sphere_area * o.ham_level)


# --- necksize map ------------------------------------------------------------------

def test_pohozaev_at_cylinder_n5():
    c = coefficients(5)
    expected = 8 * math.pi ** 2 / 3 * (-(21 / 8) * (5 / 21) ** 1.25)
    assert pohozaev_of_necksize(c.eps_n, c) == pytest.approx(expected, rel=1e-13)
    assert pohozaev_range(c)[0] == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_pohozaev_monotone_negative(n):
    c = coefficients(n)
    P = [pohozaev_of_necksize(rel * c.eps_n, c) for rel in EPS_GRID]
    assert all(p < 0 for p in P)
    assert all(a > b for a, b in zip(P, P[1:]))
    assert pohozaev_range(c)[0] < P[-1]


def test_pohozaev_tends_to_zero():
    c = coefficients(5)
    P = [pohozaev_of_necksize(e, c) for e in (0.05, 0.01, 0.002)]
    assert P[0] < P[1] < P[2] < 0
    assert abs(P[2]) < 1e-5 * abs(pohozaev_range(c)[0])


@pytest.mark.parametrize("n", [5, 6])
def test_necksize_round_trip(n):
    c = coefficients(n)
    lo, _ = pohozaev_range(c)
    for rel in EPS_GRID:
        e = rel * c.eps_n
        P = pohozaev_of_necksize(e, c)
        got = necksize_from_pohozaev(P, c)
        assert abs(got - e) <= 1e-7 * e
        assert abs(pohozaev_of_necksize(got, c) - P) <= 1e-9 * abs(lo)


def test_necksize_endpoint_and_limit():
    c = coefficients(5)
    lo, _ = pohozaev_range(c)
    assert necksize_from_pohozaev(lo, c) == c.eps_n
    assert necksize_from_pohozaev(1e-4 * lo, c) < 0.05 * c.eps_n


@pytest.mark.parametrize("P", [1.0, 0.0, -1e6, float("nan")])
def test_necksize_out_of_range(P):
    with pytest.raises(OutOfRange):
        necksize_from_pohozaev(P, coefficients(5))


def test_necksize_below_cutoff():
    c = coefficients(5)
    with pytest.raises(Degenerate):
        necksize_from_pohozaev(1e-9 * pohozaev_range(c)[0], c)


# --- generalized invariant -----------------------------------------------------------

def test_generalized_reduces_at_c_rhs():
    c = coefficients(6)
    o = cached_orbit(0.5 * c.eps_n, 6)
    for f in (orbit_field(o), translated_delaunay_field(o, 0.3)):
        assert generalized_invariant(f, 2.5, c.c_rhs, c) == pytest.approx(slice_invariant(f, 2.5, c), rel=1e-13)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_generalized_linear_solutions(n):
    # A = 0: positive combinations of the four exponentials solving P_cyl v = 0
    c = coefficients(n)
    k, m = 0.5 * (n - 4), 0.5 * n
    coef = [(0.7, k), (0.4, -k), (0.05, m), (0.2, -m)]

    def profile(t):
        t = np.asarray(t, float)
        return np.stack([sum(a * r ** d * np.exp(r * t) for a, r in coef) for d in range(4)], axis=-1)

    f = RadialField(profile)
    vals = [generalized_invariant(f, t, 0.0, c) for t in np.linspace(-1, 1, 9)]
    assert np.ptp(vals) <= 1e-12 * max(1.0, abs(vals[0]))


@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_generalized_scaled_delaunay(lam):
    # lam * v solves P_cyl w = A w^p with A = c_rhs lam^{1-p}
    c = coefficients(5)
    o = cached_orbit(0.4 * c.eps_n, 5)
    f = ScaledField(translated_delaunay_field(o, 0.3), lam)
    A = c.c_rhs * lam ** (1 - c.p)
    vals = np.array([generalized_invariant(f, t, A, c) for t in np.linspace(2, 5, 7)])
    assert np.ptp(vals) <= 1e-8 * np.max(np.abs(vals))


@pytest.mark.parametrize("rel, a, eps", [(0.4, 0.3, 0.2), (0.7, 0.1, 0.05)])
def test_scaling_consistency(rel, a, eps):
    c = coefficients(5)
    o = cached_orbit(rel * c.eps_n, 5)
    v = translated_delaunay_field(o, a)
    z = ScaledField(v, 1 / eps)
    A = eps ** (8 / (c.n - 4)) * c.c_rhs
    for t in (2.0, 4.0):
        direct = slice_invariant(v, t, c)
        via_z = eps ** 2 * generalized_invariant(z, t, A, c)
        assert abs(direct - via_z) <= 1e-10 * abs(direct)


def test_jet_field_on_formula():
    # a field given by a closed formula through the jet interface
    c = coefficients(5)
    f = JetField(lambda T, S: (T * -0.5).exp() * (S * 0.1 + 1.0))
    j = f.jet(np.array([1.0]), np.array([0.2]))
    assert float(j.v_t[0]) == pytest.approx(-0.5 * math.exp(-0.5) * 1.02, rel=1e-14)
    assert float(j.v_ts[0]) == pytest.approx(-0.05 * math.exp(-0.5), rel=1e-14)
    assert np.isfinite(slice_invariant(f, 1.0, c))
