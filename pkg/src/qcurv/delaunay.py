"""Delaunay solutions: shooting, periodic evaluation and the Euclidean pictures."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .core import CylState, DelaunayOrbit, OdeCoefficients, QCurvError, coefficients
from .ode import (
    DEFAULT_CONFIG,
    IntegratorConfig,
    PositivityLost,
    StepFailure,
    Trajectory,
    fourth_derivative,
    hamiltonian,
    integrate_on_grid,
)


class ShootingError(QCurvError):
    pass


class NoBracket(ShootingError):
    pass


class Degenerate(ShootingError):
    pass


@dataclass(frozen=True)
class ShootingConfig:
    kappa_bracket_growth: float = 2.0
    half_period_tol: float = 1e-10
    max_bisections: int = 200
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    min_eps: float = 1e-3
    samples_per_period: int = 1024

    def __post_init__(self):
        if not self.kappa_bracket_growth > 1:
            raise ValueError("kappa_bracket_growth must exceed 1")
        if not (self.half_period_tol > 0 and self.max_bisections > 0 and self.min_eps > 0):
            raise ValueError("shooting parameters must be positive")
        if self.samples_per_period < 512 or self.samples_per_period % 2:
            raise ValueError("samples_per_period must be even and at least 512")


DEFAULT_SHOOTING = ShootingConfig()


def v_sph(t, n: int) -> CylState:
    """Jet of ``(cosh t)**((4-n)/2)`` (value and three derivatives)."""
    return CylState.from_array(v_sph_array(t, n))


def v_sph_array(t, n: int) -> np.ndarray:
    """Vectorised :func:`v_sph`; rows are stacked on the last axis."""
    t = np.asarray(t, dtype=float)
    k = 0.5 * (4 - n)
    u = np.tanh(t)
    v = np.cosh(t) ** k
    d1 = k * u * v
    d2 = k * v * (1.0 + (k - 1.0) * u * u)
    d3 = k * v * u * ((3.0 * k - 2.0) + (k - 1.0) * (k - 2.0) * u * u)
    return np.stack([v, d1, d2, d3], axis=-1)


def integrate_v_sph(n: int, t_max: float = 5.0, points: int = 401,
                    config: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate the ODE along ``v_sph`` on ``[-t_max, t_max]``.

    Each half is integrated from its outer end toward ``t = 0``: forward
    integration through the whole span would follow the unstable fast mode
    and leave the admissible region.
    """
    if points < 3 or points % 2 == 0:
        raise ValueError("points must be odd and at least 3")
    coeffs = coefficients(n, wide=True)
    grid = np.linspace(-t_max, t_max, points)
    mid = points // 2
    left = integrate_on_grid(v_sph_array(grid[0], n), grid[: mid + 1], coeffs, config)
    right = integrate_on_grid(v_sph_array(grid[-1], n), grid[mid:][::-1], coeffs, config)
    states = np.vstack([left.states, right.states[::-1][1:]])
    return Trajectory(grid, states, left.n_steps + right.n_steps)


# --- shooting ---------------------------------------------------------------

@dataclass
class _Shot:
    status: int
    value: float
    tau: float = math.nan
    state: np.ndarray | None = None


def _shoot_once(eps: float, kappa: float, coeffs: OdeCoefficients, cfg: IntegratorConfig) -> _Shot:
    """Integrate to the first maximum of v and report v''' there.

    Blow-up before a maximum counts as positive, loss of positivity as
    negative; both are the far sides of the Delaunay value of kappa.
    """
    c2, c0, cr, p = coeffs.as_tuple()
    y0 = np.array([eps, 0.0, kappa, 0.0])
    status, t_a, y_a, h, y_b, _ = K.integrate_event(
        y0, cfg.max_time, c2, c0, cr, p, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
        cfg.v_max, cfg.norm_max, min(cfg.max_step, 1e-3), 1, -1.0,
    )
    if status == K.BLOWUP:
        return _Shot(status, 1.0)
    if status == K.POSITIVITY:
        return _Shot(status, -1.0)
    if status == K.STEP_FAILURE:
        raise StepFailure(f"step size underflow while shooting eps={eps}, kappa={kappa}")
    if status == K.MAX_TIME:
        raise NoBracket(f"no maximum of v before t={cfg.max_time} (eps={eps}, kappa={kappa})")
    y_a = np.array(y_a)
    if y_a[1] == 0.0:
        dt = 0.0
    else:
        dt = brentq(
            lambda s: K.single_step(y_a, s, c2, c0, cr, p)[1],
            0.0, h, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200,
        )
    state = K.single_step(y_a, dt, c2, c0, cr, p) if dt > 0 else y_a
    return _Shot(status, float(state[3]), t_a + dt, state)


def _constant_orbit(coeffs: OdeCoefficients, samples: int) -> DelaunayOrbit:
    eps = coeffs.eps_n
    period = coeffs.linear_period
    t = np.linspace(0.0, period, samples + 1)
    states = np.zeros((samples + 1, 4))
    states[:, 0] = eps
    return DelaunayOrbit(
        n=coeffs.n, eps=eps, kappa=0.0, period=period,
        ham_level=hamiltonian((eps, 0.0, 0.0, 0.0), coeffs),
        t=t, states=states, constant=True, residual=0.0,
    )


def find_kappa(eps: float, coeffs: OdeCoefficients, config: ShootingConfig = DEFAULT_SHOOTING):
    """Bracket and solve for the Delaunay value of ``v''(0)``.

    Returns ``(kappa, shot, (lo, hi))`` where ``shot`` is the final shot.
    """
    cfg = config.integrator
    g = config.kappa_bracket_growth
    cache = {}

    def shoot(k):
        if k not in cache:
            cache[k] = _shoot_once(eps, k, coeffs, cfg)
        return cache[k]

    # geometric scan outward from the linearised value omega^2 (eps_n - eps)
    k = coeffs.omega ** 2 * (coeffs.eps_n - eps)
    lo = hi = None
    if shoot(k).value < 0:
        lo = k
        for _ in range(400):
            k *= g
            if shoot(k).value > 0:
                hi = k
                break
            lo = k
    else:
        hi = k
        for _ in range(400):
            k /= g
            if k < 1e-300:
                break
            if shoot(k).value < 0:
                lo = k
                break
            hi = k
    if lo is None or hi is None:
        raise NoBracket(f"could not bracket kappa for eps={eps}")

    try:
        kappa = brentq(
            lambda x: shoot(x).value, lo, hi,
            xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=config.max_bisections,
        )
    except RuntimeError as exc:
        raise NoBracket(f"kappa iteration did not converge for eps={eps}: {exc}") from exc

    # Brent stops within a few ulps; keep the float with the smallest residual
    best = kappa
    for _ in range(8):
        for cand in (np.nextafter(best, -np.inf), np.nextafter(best, np.inf)):
            s = shoot(cand)
            if s.status == K.EVENT and abs(s.value) < abs(shoot(best).value):
                best = cand
        if abs(shoot(best).value) <= config.half_period_tol:
            break
    shot = shoot(best)
    if shot.status != K.EVENT:
        raise NoBracket(f"shooting converged onto a non-periodic branch for eps={eps}")
    return float(best), shot, (lo, hi)


def shoot_delaunay(eps: float, coeffs: OdeCoefficients,
                   config: ShootingConfig = DEFAULT_SHOOTING) -> DelaunayOrbit:
    """Periodic solution with minimum ``eps`` at ``t=0``.

    The half period is the first maximum of v, where ``v' = v''' = 0``; the
    second half of the table is the time-reversed image of the first.
    """
    eps = float(eps)
    if not eps > 0:
        raise Degenerate(f"necksize must be positive, got {eps}")
    if eps > coeffs.eps_n * (1.0 + 1e-12):
        raise NoBracket(f"eps={eps} exceeds the cylinder necksize {coeffs.eps_n}")
    if eps < config.min_eps:
        raise Degenerate(f"eps={eps} is below the cutoff {config.min_eps}")
    if eps >= coeffs.eps_n * (1.0 - 1e-12):
        return _constant_orbit(coeffs, config.samples_per_period)

    kappa, shot, _ = find_kappa(eps, coeffs, config)
    tau = shot.tau
    half = config.samples_per_period // 2
    grid = np.linspace(0.0, tau, half + 1)
    y0 = np.array([eps, 0.0, kappa, 0.0])
    try:
        traj = integrate_on_grid(y0, grid, coeffs, config.integrator)
    except PositivityLost as exc:  # pragma: no cover - shot already succeeded
        raise ShootingError(str(exc)) from exc
    first = traj.states
    mirror = first[-2::-1].copy()
    mirror[:, 1] *= -1.0
    mirror[:, 3] *= -1.0
    states = np.vstack([first, mirror])
    t = np.concatenate([grid, 2.0 * tau - grid[-2::-1]])
    residual = max(abs(shot.state[1]), abs(shot.state[3]))
    return DelaunayOrbit(
        n=coeffs.n, eps=eps, kappa=kappa, period=2.0 * tau,
        ham_level=hamiltonian(y0, coeffs), t=t, states=states,
        constant=False, residual=float(residual),
    )


@functools.lru_cache(maxsize=512)
def cached_orbit(eps: float, n: int, config: ShootingConfig = DEFAULT_SHOOTING) -> DelaunayOrbit:
    """Memoised :func:`shoot_delaunay` (thread-safe lookup)."""
    return shoot_delaunay(eps, coefficients(n, wide=True), config)


# --- evaluation -------------------------------------------------------------

def _hermite5(x, h, f0, d0, s0, f1, d1, s1):
    x2 = x * x
    x3 = x2 * x
    x4 = x3 * x
    x5 = x4 * x
    h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5
    h1 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5
    h2 = 0.5 * (x2 - 3.0 * x3 + 3.0 * x4 - x5)
    h3 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5
    h4 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5
    h5 = 0.5 * (x3 - 2.0 * x4 + x5)
    return h0 * f0 + h * h1 * d0 + h * h * h2 * s0 + h3 * f1 + h * h4 * d1 + h * h * h5 * s1


def delaunay_eval_array(orbit: DelaunayOrbit, t) -> np.ndarray:
    """States of the periodic extension at ``t`` (any shape); shape ``t.shape + (4,)``."""
    t = np.asarray(t, dtype=float)
    if orbit.constant:
        out = np.zeros(t.shape + (4,))
        out[..., 0] = orbit.eps
        return out
    period = orbit.period
    tr = np.mod(t, period)
    n_int = len(orbit.t) - 1
    h = period / n_int
    idx = np.clip(np.floor(tr / h).astype(int), 0, n_int - 1)
    x = (tr - orbit.t[idx]) / h
    D = orbit.derivative_table
    out = np.empty(t.shape + (4,))
    for i in range(4):
        out[..., i] = _hermite5(
            x, h,
            D[idx, i], D[idx, i + 1], D[idx, i + 2],
            D[idx + 1, i], D[idx + 1, i + 1], D[idx + 1, i + 2],
        )
    return out


def delaunay_eval(orbit: DelaunayOrbit, t: float) -> CylState:
    """State of the periodic orbit at time ``t``."""
    return CylState.from_array(delaunay_eval_array(orbit, float(t)))


def delaunay_derivatives(orbit: DelaunayOrbit, t) -> np.ndarray:
    """``v`` and its first four derivatives at ``t`` (trailing axis of length 5)."""
    y = delaunay_eval_array(orbit, t)
    d4 = fourth_derivative(y, coefficients(orbit.n, wide=True))
    return np.concatenate([y, d4[..., None]], axis=-1)


def euclid_delaunay(orbit: DelaunayOrbit, x) -> np.ndarray | float:
    """``|x|**((4-n)/2) v(-log|x|)`` for points ``x`` (last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1) if x.ndim else abs(x)
    if np.any(r == 0):
        raise ValueError("the Delaunay solution is singular at the origin")
    val = r ** (0.5 * (4 - orbit.n)) * delaunay_eval_array(orbit, -np.log(r))[..., 0]
    return float(val) if np.ndim(val) == 0 else val


def translated_delaunay(orbit: DelaunayOrbit, a, t, s, phase: float = 0.0):
    """Delaunay solution with the point at infinity moved by ``a``.

    ``s`` is the cosine between the slice direction and ``a``; ``phase``
    shifts the cylinder variable.
    """
    amag = float(np.linalg.norm(np.atleast_1d(np.asarray(a, dtype=float))))
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    b = amag * np.exp(-t)
    rho2 = 1.0 - 2.0 * b * s + b * b
    if np.any(rho2 <= 0):
        raise ValueError("the translated solution is singular at theta = exp(-t) a")
    log_rho = 0.5 * np.log(rho2)
    val = np.exp(0.5 * (4 - orbit.n) * log_rho) * delaunay_eval_array(orbit, t + phase + log_rho)[..., 0]
    return float(val) if np.ndim(val) == 0 else val
