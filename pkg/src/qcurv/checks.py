"""The invariant suite run by ``qcurv check``.

Each check is a function ``(ctx) -> (passed, detail)``; the suite runs them
in a fixed order and records wall time separately so the report itself is
deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .asymptotics import FitConfig, TailSamples, fit_tail, project_modes, synthesize_tail
from .core import N_MAX_DEFAULT, N_MIN, coefficients, sphere_area
from .delaunay import (
    ShootingConfig,
    cached_orbit,
    euclid_delaunay,
    find_kappa,
    integrate_v_sph,
    shoot_delaunay,
    v_sph,
    v_sph_array,
)
from .geometry import (
    kelvin,
    mean_curvature_christoffel,
    mean_curvature_geodesic_sphere,
    q_round,
    scaling_check,
    scalar_positivity,
    sphere_profile,
    u_sph,
)
from .ode import (
    IntegrationError,
    IntegratorConfig,
    hamiltonian,
    hamiltonian_drift,
    integrate,
    integrate_on_grid,
    ode_rhs,
)
from .pohozaev import (
    FieldJet,
    ScaledField,
    generalized_invariant,
    ham_cyl_density,
    ham_density,
    necksize_from_pohozaev,
    orbit_field,
    pohozaev_of_necksize,
    slice_invariant,
    translated_delaunay_field,
)

EPS_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class Context:
    n: int
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    @property
    def coeffs(self):
        return coefficients(self.n, wide=True)

    @property
    def shooting(self) -> ShootingConfig:
        return ShootingConfig(integrator=self.integrator)

    def orbit(self, rel: float):
        return cached_orbit(rel * self.coeffs.eps_n, self.n, self.shooting)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _fmt(x: float) -> str:
    return f"{x:.3e}"


# --- core -------------------------------------------------------------------

def check_constants(ctx):
    worst = 0.0
    eps = []
    for n in range(N_MIN, N_MAX_DEFAULT + 1):
        c = coefficients(n)
        worst = max(worst, abs(c.c0 * c.eps_n - c.c_rhs * c.eps_n ** c.p) / (c.c0 * c.eps_n))
        if min(c.c2, c.c0, c.c_rhs, c.p) <= 0 or not 0 < c.eps_n < 1:
            return False, f"bad constants for n={n}"
        eps.append(c.eps_n)
    mono = all(a > b for a, b in zip(eps, eps[1:]))
    return worst <= 1e-12 and mono, f"identity {_fmt(worst)}, eps_n decreasing={mono}"


def check_sphere_area(ctx):
    worst = max(abs(sphere_area(n) - 2 * math.pi / (n - 2) * sphere_area(n - 2)) / sphere_area(n)
                for n in range(4, 14))
    return worst <= 1e-14, f"recurrence {_fmt(worst)}"


# --- ode --------------------------------------------------------------------

def check_closed_form_energies(ctx):
    worst_sph = worst_cyl = 0.0
    for n in range(N_MIN, N_MAX_DEFAULT + 1):
        c = coefficients(n)
        worst_sph = max(worst_sph, abs(hamiltonian(v_sph(0.0, n), c)))
        h = hamiltonian((c.eps_n, 0.0, 0.0, 0.0), c)
        worst_cyl = max(worst_cyl, abs(h - c.cylinder_energy) / abs(c.cylinder_energy))
    return worst_sph <= 1e-12 and worst_cyl <= 1e-12, f"sph {_fmt(worst_sph)}, cyl {_fmt(worst_cyl)}"


def check_gradient_structure(ctx):
    c = ctx.coeffs
    rng = np.random.default_rng(20)
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        y = np.array([rng.uniform(0.2, 1.2), *rng.normal(0, 0.5, 3)])
        f = np.array(ode_rhs(y, c))
        d = (hamiltonian(y + h * f, c) - hamiltonian(y - h * f, c)) / (2 * h)
        worst = max(worst, abs(d))
    return worst <= 1e-6, f"max |dH/dt| {_fmt(worst)}"


def check_vsph_drift(ctx):
    c = ctx.coeffs
    try:
        tr = integrate_v_sph(ctx.n, 5.0, config=ctx.integrator)
    except IntegrationError as exc:
        return False, f"{type(exc).__name__}: {exc}"
    d = hamiltonian_drift(tr, c)
    return d <= 1e-8, f"drift {_fmt(d)}"


def check_random_drift(ctx):
    """Random admissible states integrated until they leave ``0 < v < 2, |y| < 50``."""
    c = ctx.coeffs
    cfg = replace(ctx.integrator, v_max=2.0, norm_max=50.0, max_time=40.0)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        y0 = np.array([rng.uniform(0.1, 1.2) * c.eps_n, rng.normal(0, 0.3), rng.normal(0, 1), rng.normal(0, 1)])
        try:
            states = integrate(y0, 40.0, c, cfg).states
        except IntegrationError as exc:
            states = exc.states
        if states is not None and len(states) > 1:
            worst = max(worst, hamiltonian_drift(states, c))
    limit = 100 * ctx.integrator.rel_tol
    return worst <= limit, f"worst drift {_fmt(worst)} (limit {_fmt(limit)})"


def check_tolerance_halving(ctx):
    c = ctx.coeffs
    try:
        d1 = hamiltonian_drift(integrate_v_sph(ctx.n, 5.0, config=ctx.integrator), c)
        d2 = hamiltonian_drift(integrate_v_sph(ctx.n, 5.0, config=ctx.integrator.scaled(0.5)), c)
    except IntegrationError as exc:
        return False, f"{type(exc).__name__}: {exc}"
    ratio = d1 / d2 if d2 > 0 else math.inf
    return ratio >= 4.0, f"drift ratio {ratio:.3f} (need >= 4)"


def check_fixed_step_order(ctx):
    c = ctx.coeffs
    args = c.as_tuple()
    errs = []
    for h in (0.1, 0.05):
        y = v_sph_array(-1.0, ctx.n)
        steps = int(round(1.0 / h))
        for _ in range(steps):
            y = K.single_step(y, h, *args)
        errs.append(np.max(np.abs(y - v_sph_array(0.0, ctx.n))))
    ratio = errs[0] / errs[1]
    return ratio >= 16.0, f"error ratio on halving h {ratio:.1f}"


# --- delaunay ---------------------------------------------------------------

def check_orbits(ctx):
    c = ctx.coeffs
    worst_min = worst_sym = worst_drift = 0.0
    for rel in EPS_GRID:
        o = ctx.orbit(rel)
        worst_min = max(worst_min, abs(o.v_min - o.eps))
        worst_sym = max(worst_sym, o.residual)
        worst_drift = max(worst_drift, hamiltonian_drift(o, c))
    ok = worst_min <= 1e-8 and worst_sym <= 1e-9 and worst_drift <= 1e-8
    return ok, f"min-v {_fmt(worst_min)}, symmetry {_fmt(worst_sym)}, drift {_fmt(worst_drift)}"


def check_reintegration(ctx):
    c = ctx.coeffs
    worst = 0.0
    failures = []
    for rel in EPS_GRID:
        o = ctx.orbit(rel)
        y0 = o.states[0]
        try:
            traj = integrate_on_grid(y0, [0.0, 2.0 * o.period], c, replace(ctx.integrator, max_time=1e3))
            worst = max(worst, float(np.max(np.abs(traj.states[-1] - y0))))
        except IntegrationError as exc:
            failures.append(f"{rel}:{type(exc).__name__} after {exc.t_stop / o.period:.2f} periods")
    ok = not failures and worst <= 1e-6
    detail = f"max return error {_fmt(worst)}"
    if failures:
        detail += f"; left the orbit at eps/eps_n = {', '.join(failures)}"
    return ok, detail


def check_energy_order(ctx):
    levels = [ctx.orbit(rel).ham_level for rel in EPS_GRID]
    inc = all(a > b for a, b in zip(levels, levels[1:]))
    c = ctx.coeffs
    inside = all(c.cylinder_energy < h < 0 for h in levels)
    return inc and inside, f"strictly ordered={inc}, inside (H(eps_n), 0)={inside}"


def check_linear_period(ctx):
    c = ctx.coeffs
    o = shoot_delaunay(0.999 * c.eps_n, c, ctx.shooting)
    rel = abs(o.period - c.linear_period) / c.linear_period
    return rel <= 0.01, f"relative gap {_fmt(rel)}"


def check_bracket(ctx):
    c = ctx.coeffs
    for rel in (0.2, 0.5, 0.8):
        kappa, shot, (lo, hi) = find_kappa(rel * c.eps_n, c, ctx.shooting)
        if not lo < kappa <= hi or abs(shot.value) > ctx.shooting.half_period_tol:
            return False, f"eps/eps_n={rel}: residual {_fmt(abs(shot.value))}"
    return True, "opposite signs at bracket ends, residual below tolerance"


# --- pohozaev ---------------------------------------------------------------

def check_reduction(ctx):
    c = ctx.coeffs
    rng = np.random.default_rng(3)
    for _ in range(50):
        y = np.array([rng.uniform(0.05, 1.5), *rng.normal(0, 1, 3)])
        jet = FieldJet.from_state(y)
        if float(ham_density(jet, c)) != hamiltonian(y, c):
            return False, f"density differs from hamiltonian at {y.tolist()}"
    o = ctx.orbit(0.5)
    exact = all(slice_invariant(orbit_field(o), t, c) == c.sphere_area * hamiltonian(s, c)
                for t, s in zip(o.t[:64:7], o.states[:64:7]))
    return exact, f"bitwise equality={exact}"


def check_slice_conservation(ctx):
    c = ctx.coeffs
    worst = 0.0
    for rel in (0.3, 0.6):
        o = ctx.orbit(rel)
        ref = c.sphere_area * o.ham_level
        for a in (0.25, 0.5):
            f = translated_delaunay_field(o, a)
            for t in np.linspace(2.0, 6.0, 9):
                worst = max(worst, abs(slice_invariant(f, t, c) - ref) / abs(ref))
    return worst <= 1e-6, f"max relative deviation {_fmt(worst)}"


def check_pohozaev_map(ctx):
    c = ctx.coeffs
    P = [pohozaev_of_necksize(rel * c.eps_n, c, ctx.shooting) for rel in EPS_GRID]
    neg = all(p < 0 for p in P)
    mono = all(a > b for a, b in zip(P, P[1:]))
    worst = 0.0
    for rel, p in zip(EPS_GRID, P):
        e = necksize_from_pohozaev(p, c, ctx.shooting)
        worst = max(worst, abs(e - rel * c.eps_n) / (rel * c.eps_n))
    return neg and mono and worst <= 1e-7, f"negative={neg}, monotone={mono}, round trip {_fmt(worst)}"


def check_scaling(ctx):
    c = ctx.coeffs
    n = ctx.n
    worst = 0.0
    for rel, a, eps in ((0.4, 0.3, 0.2), (0.7, 0.1, 0.05)):
        o = ctx.orbit(rel)
        v = translated_delaunay_field(o, a)
        z = ScaledField(v, 1.0 / eps)
        A = eps ** (8.0 / (n - 4)) * c.c_rhs
        for t in (2.0, 4.0):
            direct = slice_invariant(v, t, c)
            via_z = eps ** 2 * generalized_invariant(z, t, A, c)
            worst = max(worst, abs(direct - via_z) / abs(direct))
    return worst <= 1e-10, f"two evaluation orders differ by {_fmt(worst)}"


def check_power_split(ctx):
    c = ctx.coeffs
    rng = np.random.default_rng(5)
    y = np.column_stack([rng.uniform(0.1, 1.2, 20), rng.normal(0, 1, (20, 3))])
    jet = FieldJet.from_state(y)
    full = ham_density(jet, c)
    diff = full - ham_cyl_density(jet, c)
    err = np.abs(diff - c.power_coeff * y[:, 0] ** c.power_exp) / np.maximum(1.0, np.abs(full))
    return bool(err.max() <= 1e-14), f"density minus cylinder part vs power term {_fmt(err.max())}"


# --- asymptotics ------------------------------------------------------------

FIT_GRID = [(e, T, a) for e in (0.3, 0.6, 0.9) for T in (0.1, 0.45, 0.8) for a in (0.1, 0.3, 0.5)]


def _fit_grid(ctx):
    if not hasattr(ctx, "_fits"):
        c = ctx.coeffs
        out = []
        cfg = FitConfig(shooting=ctx.shooting)
        for rel, Trel, a in FIT_GRID:
            o = ctx.orbit(rel)
            T = Trel * o.period
            smp = synthesize_tail(o.eps, T, a, ctx.n, config=ctx.shooting)
            try:
                out.append((o.eps, T, a, fit_tail(smp, c, cfg)))
            except Exception as exc:  # reported by the checks below
                out.append((o.eps, T, a, exc))
        ctx._fits = out
    return ctx._fits


def check_fit_parameters(ctx):
    worst = [0.0, 0.0, 0.0]
    for eps, T, a, r in _fit_grid(ctx):
        if isinstance(r, Exception):
            return False, f"fit failed at eps={eps:.6g}, T={T:.6g}, a={a}: {type(r).__name__}"
        worst[0] = max(worst[0], abs(r.eps_hat - eps) / eps)
        worst[1] = max(worst[1], abs(r.T_hat - T) / T)
        worst[2] = max(worst[2], abs(r.a_hat - a) / a)
    ok = worst[0] <= 1e-4 and worst[1] <= 1e-4 and worst[2] <= 1e-3
    return ok, "max relative errors eps {} T {} a {}".format(*map(_fmt, worst))


def check_fit_decay(ctx):
    betas = [r.beta_hat for *_, r in _fit_grid(ctx) if not isinstance(r, Exception)]
    if len(betas) != len(FIT_GRID) or any(b is None for b in betas):
        return False, "decay rate unavailable for some fits"
    low = sum(b < 1.9 for b in betas)
    return low == 0, f"min beta {min(betas):.3f}, {low}/{len(betas)} below 1.9"


def check_phase_equivariance(ctx):
    c = ctx.coeffs
    o = ctx.orbit(0.5)
    smp = synthesize_tail(o.eps, 0.3 * o.period, 0.4, ctx.n, config=ctx.shooting)
    cfg = FitConfig(shooting=ctx.shooting)
    r1 = fit_tail(smp, c, cfg)
    worst = 0.0
    for delta in (0.37, 1.5):
        r2 = fit_tail(smp.shifted(delta), c, cfg)
        P = o.period
        gap = (r1.T_hat - delta - r2.T_hat + 0.5 * P) % P - 0.5 * P
        worst = max(worst, abs(gap))
    return worst <= 1e-5, f"phase shift error {_fmt(worst)}"


def check_mode_orthogonality(ctx):
    rng = np.random.default_rng(11)
    t = np.linspace(3.0, 8.0, 12)
    s = np.cos(np.linspace(math.pi, 0.0, 9))
    f0 = 1.0 + rng.uniform(0, 1, t.size)
    f1 = rng.normal(0, 0.2, t.size)
    smp = TailSamples(t, s, f0[:, None] + f1[:, None] * s[None, :])
    g0, g1 = project_modes(smp, ctx.n)
    err = max(np.max(np.abs(g0 - f0)), np.max(np.abs(g1 - f1)))
    return err <= 1e-12, f"re-synthesis error {_fmt(err)}"


# --- geometry ---------------------------------------------------------------

def check_q_round(ctx):
    ok = all(q_round(n) == Fraction(n * (n * n - 4), 8) for n in range(N_MIN, N_MAX_DEFAULT + 1))
    return ok, "exact rational equality for n=5..12"


def check_kelvin(ctx):
    n = ctx.n
    rng = np.random.default_rng(13)
    x = rng.normal(size=(1000, n)) * rng.uniform(0.2, 3.0, (1000, 1))
    o = ctx.orbit(0.5)
    fields = {
        "U_sph": u_sph,
        "poly": lambda y: 1.0 + y[..., 0] ** 2 + 0.5 * np.sum(y * y, axis=-1),
        "u_eps": lambda y: euclid_delaunay(o, y),
    }
    worst = 0.0
    for u in fields.values():
        back = kelvin(lambda y: kelvin(u, y), x)
        worst = max(worst, float(np.max(np.abs(back - u(x)) / np.abs(u(x)))))
    return worst <= 1e-12, f"involution error {_fmt(worst)}"


def check_mean_curvature(ctx):
    n = ctx.n
    worst = 0.0
    for r in (0.1, 0.5, 1.0, 3.0, 5.0, 10.0):
        a = mean_curvature_geodesic_sphere(r, n)
        b = mean_curvature_christoffel(r, n)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    neg = bool(np.all(mean_curvature_geodesic_sphere(np.linspace(3.0001, 50.0, 200), n) < 0))
    return worst <= 1e-10 and neg, f"oracle gap {_fmt(worst)}, negative beyond 3={neg}"


def check_sphere_factor(ctx):
    n = ctx.n
    p = sphere_profile(n)
    r = np.linspace(0.1, 10.0, 400)
    res = float(np.max(np.abs(scaling_check(p, 1.0, r))))
    pos = scalar_positivity(p, r)
    return res <= 1e-8 and pos.passed, f"bilaplacian residual {_fmt(res)}, positivity min {_fmt(pos.min_value)}"


CHECKS = [
    ("core.constants", check_constants),
    ("core.sphere_area", check_sphere_area),
    ("ode.closed_form_energies", check_closed_form_energies),
    ("ode.gradient_structure", check_gradient_structure),
    ("ode.vsph_drift", check_vsph_drift),
    ("ode.random_state_drift", check_random_drift),
    ("ode.tolerance_halving", check_tolerance_halving),
    ("ode.fixed_step_order", check_fixed_step_order),
    ("delaunay.orbits", check_orbits),
    ("delaunay.reintegration", check_reintegration),
    ("delaunay.energy_order", check_energy_order),
    ("delaunay.linear_period", check_linear_period),
    ("delaunay.bracket", check_bracket),
    ("pohozaev.reduction", check_reduction),
    ("pohozaev.power_split", check_power_split),
    ("pohozaev.slice_conservation", check_slice_conservation),
    ("pohozaev.necksize_map", check_pohozaev_map),
    ("pohozaev.scaling", check_scaling),
    ("asymptotics.fit_parameters", check_fit_parameters),
    ("asymptotics.fit_decay", check_fit_decay),
    ("asymptotics.phase_equivariance", check_phase_equivariance),
    ("asymptotics.mode_orthogonality", check_mode_orthogonality),
    ("geometry.q_round", check_q_round),
    ("geometry.kelvin", check_kelvin),
    ("geometry.mean_curvature", check_mean_curvature),
    ("geometry.sphere_factor", check_sphere_factor),
]


def selected(name: str, only) -> bool:
    """Whether ``name`` or its part after the module prefix starts with one of ``only``."""
    short = name.split(".", 1)[-1]
    return any(name.startswith(o) or short.startswith(o) for o in only)


def run_checks(n: int, integrator: IntegratorConfig | None = None, only=None) -> list[CheckResult]:
    ctx = Context(n, integrator or IntegratorConfig())
    results = []
    for name, func in CHECKS:
        if only and not selected(name, only):
            continue
        start = time.perf_counter()
        try:
            ok, detail = func(ctx)
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
