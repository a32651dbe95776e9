import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcurv.asymptotics import (
    CsvFormatError,
    EpsAtBoundary,
    FitConfig,
    NoConvergence,
    ProjectionError,
    TailSamples,
    WindowTooShort,
    fit_tail,
    measure_decay,
    project_modes,
    read_tail_csv,
    synthesize_tail,
    write_tail_csv,
)
from qcurv.core import coefficients
from qcurv.delaunay import delaunay_eval_array, translated_delaunay, v_sph_array

T_GRID = np.linspace(3.0, 8.0, 41)
S_GRID = np.cos(np.linspace(math.pi, 0.0, 13))


# --- samples and CSV ------------------------------------------------------------

def test_samples_validation():
    t, s = T_GRID[:10], S_GRID
    v = np.ones((10, s.size))
    TailSamples(t, s, v)
    bad = [
        (t, s, v[:, :-1]),
        (t[:5], s, v[:5]),
        (t[::-1], s, v),
        (t, np.append(s[:-1], 1.5), v),
        (t - 3.0, s, v),
        (t, s, -v),
        (t, s, np.where(v > 0, np.nan, v)),
    ]
    for args in bad:
        with pytest.raises(ValueError):
            TailSamples(*args)


def test_csv_round_trip_is_exact(orbit_at):
    o = orbit_at(0.5)
    smp = synthesize_tail(o.eps, 0.3, 0.2, 5, t=T_GRID[:12], s=S_GRID)
    buf = io.StringIO()
    write_tail_csv(smp, buf)
    back = read_tail_csv(buf.getvalue())
    np.testing.assert_array_equal(back.t, smp.t)
    np.testing.assert_array_equal(back.s, smp.s)
    np.testing.assert_array_equal(back.v, smp.v)


def test_csv_row_order_is_irrelevant(orbit_at):
    o = orbit_at(0.5)
    smp = synthesize_tail(o.eps, 0.3, 0.2, 5, t=T_GRID[:10], s=S_GRID[:9])
    buf = io.StringIO()
    write_tail_csv(smp, buf)
    head, *rows = buf.getvalue().splitlines()
    text = "\n".join([head] + rows[::-1]) + "\n"
    np.testing.assert_array_equal(read_tail_csv(text).v, smp.v)


def test_csv_from_path(tmp_path, orbit_at):
    o = orbit_at(0.4)
    smp = synthesize_tail(o.eps, 0.0, 0.1, 5, t=T_GRID[:9], s=S_GRID[:8])
    path = tmp_path / "tail.csv"
    with open(path, "w") as fh:
        write_tail_csv(smp, fh)
    np.testing.assert_array_equal(read_tail_csv(str(path)).v, smp.v)


def _grid_rows(nt=8, ns=8, v="1.0"):
    return "".join(f"{3 + i},{-1 + 2 * j / (ns - 1)},{v}\n" for i in range(nt) for j in range(ns))


@pytest.mark.parametrize("text", [
    "",
    "x,y,z\n1,0,1\n",
    "t,s,v\n" + _grid_rows() + "3,0.5\n",
    "t,s,v\n" + _grid_rows() + "3,0.5,abc\n",
    "t,s,v\n" + _grid_rows()[: -len("3,1.0,1.0\n") - 10],
    "t,s,v\n" + _grid_rows(nt=3),
    "t,s,v\n" + _grid_rows(v="0.0"),
    "t,s,v\n" + _grid_rows(v="nan"),
])
def test_malformed_csv(text):
    with pytest.raises(CsvFormatError):
        read_tail_csv(io.StringIO(text))


def test_duplicate_rows_rejected():
    rows = _grid_rows().splitlines()
    rows[1] = rows[0]
    with pytest.raises(CsvFormatError):
        read_tail_csv(io.StringIO("t,s,v\n" + "\n".join(rows) + "\n"))


# --- modes --------------------------------------------------------------------

def test_constant_field_has_no_mode_one():
    smp = TailSamples(T_GRID, S_GRID, np.full((T_GRID.size, S_GRID.size), 0.7))
    f0, f1 = project_modes(smp, 5)
    np.testing.assert_allclose(f0, 0.7, rtol=1e-14)
    assert np.max(np.abs(f1)) <= 1e-14


def test_linear_field_projects_onto_mode_one():
    c = np.exp(-T_GRID)
    smp = TailSamples(T_GRID, S_GRID, 2.0 + c[:, None] * S_GRID[None, :])
    f0, f1 = project_modes(smp, 6)
    np.testing.assert_allclose(f0, 2.0, rtol=1e-14)
    np.testing.assert_allclose(f1, c, rtol=1e-12)


@pytest.mark.parametrize("n", [5, 7])
def test_mode_orthogonality(n, rng):
    # higher zonal harmonics must not leak into modes 0 and 1
    from scipy.special import eval_gegenbauer

    f0 = 1 + rng.uniform(0, 1, T_GRID.size)
    f1 = rng.normal(0, 0.2, T_GRID.size)
    g2 = 0.05 * eval_gegenbauer(2, 0.5 * (n - 2), S_GRID)
    g3 = 0.02 * eval_gegenbauer(3, 0.5 * (n - 2), S_GRID)
    v = f0[:, None] + f1[:, None] * S_GRID + g2 + g3
    h0, h1 = project_modes(TailSamples(T_GRID, S_GRID, v), n)
    assert np.max(np.abs(h0 - f0)) <= 1e-12
    assert np.max(np.abs(h1 - f1)) <= 1e-12


def test_mode_one_matches_first_order_term(orbit_at):
    # f1(t) e^{t} / a tends to (n-4)/2 v - v' along the orbit
    o = orbit_at(0.5)
    a = 0.2
    t = np.linspace(6.0, 14.0, 33)
    smp = TailSamples(t, S_GRID, translated_delaunay(o, a, t[:, None], S_GRID[None, :]))
    _, f1 = project_modes(smp, 5)
    y = delaunay_eval_array(o, t)
    ref = a * np.exp(-t) * (0.5 * y[:, 0] - y[:, 1])
    rel = np.abs(f1 - ref) / (a * np.exp(-t))
    assert rel[-1] < 1e-4 and rel[-1] < rel[0]


def test_degenerate_s_grid():
    s = np.linspace(0.0, 1.0, 9) ** 8  # clustered near zero
    smp = TailSamples(T_GRID, s * 1e-9, np.ones((T_GRID.size, 9)))
    with pytest.raises(ProjectionError):
        project_modes(smp, 5)


# --- decay ----------------------------------------------------------------------

def test_decay_pure_exponential():
    t = np.linspace(3, 8, 51)
    est = measure_decay(t, 4.0 * np.exp(-2 * t))
    assert abs(est.beta - 2.0) <= 1e-10 and est.oscillation <= 1e-10


def test_decay_modulated():
    t = np.linspace(2, 12, 201)
    est = measure_decay(t, np.exp(-t) * (1 + 0.1 * np.sin(t)))
    assert abs(est.beta - 1.0) <= 0.02
    assert 0.05 <= est.oscillation <= 0.15


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-3, 3))
def test_decay_recovers_rate(beta, logc):
    t = np.linspace(1, 6, 40)
    assert measure_decay(t, np.exp(logc - beta * t)).beta == pytest.approx(beta, rel=1e-9)


def test_decay_window_too_short():
    t = np.linspace(3, 5, 20)
    with pytest.raises(WindowTooShort):
        measure_decay(t, np.exp(-t))
    with pytest.raises(ValueError):
        measure_decay(t, np.zeros_like(t))


# --- fit ------------------------------------------------------------------------

def test_fit_parameters_on_grid(fit_grid):
    failed = [(e, T, a, type(r).__name__) for e, T, a, r in fit_grid if isinstance(r, Exception)]
    assert not failed
    for eps, T, a, r in fit_grid:
        assert abs(r.eps_hat - eps) <= 1e-4 * eps
        assert abs(r.T_hat - T) <= 1e-4 * T
        assert abs(r.a_hat - a) <= 1e-3 * a


def test_fit_decay_rate_on_grid(fit_grid):
    betas = [r.beta_hat for *_, r in fit_grid if not isinstance(r, Exception)]
    assert len(betas) == len(fit_grid)
    assert min(betas) >= 1.9


def test_demodulated_decay_rate_on_grid(fit_grid):
    # with the periodic shape of the second-order term divided out, the
    # remainder decays at the quadratic rate
    for *_, r in fit_grid:
        assert abs(r.diagnostics["beta_demodulated"] - 2.0) <= 0.1


def test_fit_without_translation(orbit_at):
    o = orbit_at(0.5)
    T = 0.7 * o.period
    r = fit_tail(synthesize_tail(o.eps, T, 0.0, 5), coefficients(5))
    assert abs(r.a_hat) <= 1e-6
    assert abs(r.T_hat - T) <= 1e-5 * T
    assert abs(r.eps_hat - o.eps) <= 1e-6 * o.eps


@pytest.mark.parametrize("delta", [0.37, 1.5])
def test_fit_phase_equivariance(delta, orbit_at):
    o = orbit_at(0.5)
    c = coefficients(5)
    smp = synthesize_tail(o.eps, 0.3 * o.period, 0.4, 5)
    r1 = fit_tail(smp, c)
    r2 = fit_tail(smp.shifted(delta), c)
    P = o.period
    gap = (r1.T_hat - delta - r2.T_hat + 0.5 * P) % P - 0.5 * P
    assert abs(gap) <= 1e-5
    assert r2.eps_hat == pytest.approx(r1.eps_hat, rel=1e-7)


@pytest.mark.parametrize("n", [6, 7])
def test_fit_other_dimensions(n, orbit_at):
    o = orbit_at(0.6, n)
    T, a = 0.25 * o.period, 0.3
    r = fit_tail(synthesize_tail(o.eps, T, a, n), coefficients(n))
    assert abs(r.eps_hat - o.eps) <= 1e-4 * o.eps
    assert abs(r.T_hat - T) <= 1e-4 * T
    assert abs(r.a_hat - a) <= 1e-3 * a


def test_sphere_tail_hits_lower_boundary():
    t = np.linspace(3.0, 8.0, 61)
    v = v_sph_array(t, 5)[:, 0]
    smp = TailSamples(t, S_GRID, np.repeat(v[:, None], S_GRID.size, axis=1))
    with pytest.raises(EpsAtBoundary) as info:
        fit_tail(smp, coefficients(5))
    assert "eps_hat" in info.value.best


def test_unrelated_tail_does_not_converge(rng):
    t = np.linspace(3.0, 8.0, 61)
    v = 0.5 + 0.3 * np.sin(3.1 * t)[:, None] + 0.01 * rng.uniform(size=(t.size, S_GRID.size))
    with pytest.raises((NoConvergence, EpsAtBoundary)) as info:
        fit_tail(TailSamples(t, S_GRID, v), coefficients(5))
    assert info.value.best is not None


def test_fit_result_dict(orbit_at):
    o = orbit_at(0.6)
    r = fit_tail(synthesize_tail(o.eps, 0.2, 0.1, 5), coefficients(5), FitConfig())
    d = r.as_dict()
    assert set(d) == {"eps_hat", "T_hat", "a_hat", "beta_hat", "residual", "diagnostics"}
    assert d["diagnostics"]["period"] == r.period
    assert 0 <= r.T_hat < r.period
