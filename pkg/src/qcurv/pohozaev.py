"""Hamiltonian density on cylinder slices and the radial Pohozaev invariant.

Fields are axisymmetric: functions of ``(t, s)`` where ``s`` is the cosine
of the angle between the slice point and a fixed axis.  A field object only
has to provide ``jet(t, s) -> FieldJet`` and a boolean ``radial``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_jacobi

from .core import CylState, DelaunayOrbit, OdeCoefficients, QCurvError
from .delaunay import (
    DEFAULT_SHOOTING,
    Degenerate,
    ShootingConfig,
    cached_orbit,
    delaunay_eval_array,
    v_sph_array,
)
from .jets import Jet
from .ode import energy_density, power_term


class QuadratureError(QCurvError):
    """Doubling the quadrature order changed a slice integral too much."""


class OutOfRange(QCurvError, ValueError):
    pass


# --- jets -------------------------------------------------------------------

@dataclass(frozen=True)
class FieldJet:
    """Pointwise partials of an axisymmetric field (scalars or equal-shape arrays)."""

    v: object
    v_t: object = 0.0
    v_tt: object = 0.0
    v_ttt: object = 0.0
    v_s: object = 0.0
    v_ss: object = 0.0
    v_ts: object = 0.0

    @classmethod
    def from_state(cls, state) -> "FieldJet":
        """theta-independent jet from ``(v, v', v'', v''')``."""
        y = np.asarray(state, dtype=float)
        return cls(y[..., 0], y[..., 1], y[..., 2], y[..., 3])

    @classmethod
    def from_jet(cls, J: Jet) -> "FieldJet":
        return cls(J.partial(0, 0), J.partial(1, 0), J.partial(2, 0), J.partial(3, 0),
                   J.partial(0, 1), J.partial(0, 2), J.partial(1, 1))


def _check_positive(v):
    if not np.all(np.asarray(v) > 0):
        raise ValueError("field value must be positive")


def ham_cyl_density(jet: FieldJet, coeffs: OdeCoefficients, s=0.0):
    """Density without the nonlinear power term.

    ``s`` is the polar coordinate of the point; it only matters when the
    jet has angular derivatives.
    """
    _check_positive(jet.v)
    n = coeffs.n
    one_m_s2 = 1.0 - np.asarray(s, dtype=float) ** 2
    lap = one_m_s2 * jet.v_ss - (n - 1) * s * jet.v_s
    angular = (
        one_m_s2 * jet.v_ts * jet.v_ts
        - 0.5 * lap * lap
        - 0.25 * n * (n - 4) * one_m_s2 * jet.v_s * jet.v_s
    )
    return energy_density(jet.v, jet.v_t, jet.v_tt, jet.v_ttt, coeffs, angular)


def ham_density(jet: FieldJet, coeffs: OdeCoefficients, s=0.0):
    """Conserved Hamiltonian density of the cylindrical constant-Q equation."""
    return ham_cyl_density(jet, coeffs, s) + power_term(jet.v, coeffs)


# --- quadrature -------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _jacobi_rule(n: int, m: int):
    a = 0.5 * (n - 3)
    x, w = roots_jacobi(m, a, a)
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class SliceQuadrature:
    """Gauss-Jacobi rule for axisymmetric integrals over the unit sphere S^{n-1}.

    ``integrate(f(s_k))`` approximates the integral of ``f(<theta, axis>)``
    and is exact for polynomials in ``s`` of degree below ``2m``.
    """

    n: int
    m: int = 64

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("quadrature order must be at least 2")

    @property
    def nodes(self) -> np.ndarray:
        return _jacobi_rule(self.n, self.m)[0]

    @property
    def weights(self) -> np.ndarray:
        """Positive weights summing to one (the sphere's normalised measure)."""
        return _jacobi_rule(self.n, self.m)[1]

    @property
    def area(self) -> float:
        return 2.0 * math.pi ** (self.n / 2.0) / math.gamma(self.n / 2.0)

    def integrate(self, values) -> float:
        return self.area * float(np.dot(self.weights, values))

    def doubled(self) -> "SliceQuadrature":
        return SliceQuadrature(self.n, 2 * self.m)


# --- fields -----------------------------------------------------------------

class RadialField:
    """theta-independent field given by a profile ``t -> (v, v', v'', v''')``."""

    radial = True

    def __init__(self, profile):
        self._profile = profile

    def jet(self, t, s=0.0) -> FieldJet:
        y = np.asarray(self._profile(t), dtype=float)
        shape = np.broadcast(np.asarray(t), np.asarray(s)).shape
        zero = np.zeros(shape)
        return FieldJet(y[..., 0] + zero, y[..., 1] + zero, y[..., 2] + zero, y[..., 3] + zero,
                        zero, zero, zero)


def orbit_field(orbit: DelaunayOrbit, phase: float = 0.0) -> RadialField:
    """The Delaunay solution ``v_eps(t + phase)``."""
    return RadialField(lambda t: delaunay_eval_array(orbit, np.asarray(t, float) + phase))


def sphere_field(n: int) -> RadialField:
    return RadialField(lambda t: v_sph_array(t, n))


class JetField:
    """Field defined by a formula on Taylor jets: ``func(T, S) -> Jet``."""

    radial = False

    def __init__(self, func, degree: int = 3):
        self._func = func
        self.degree = degree

    def value(self, t, s):
        T, S = Jet.variables(t, s, 0)
        return self._func(T, S).value

    def jet(self, t, s) -> FieldJet:
        T, S = Jet.variables(t, s, self.degree)
        return FieldJet.from_jet(self._func(T, S))


def translated_delaunay_field(orbit: DelaunayOrbit, a: float, phase: float = 0.0) -> JetField:
    """Delaunay solution with its point at infinity moved by ``a`` along the axis.

    ``v(t, s) = rho**((4-n)/2) v_eps(t + phase + log rho)`` with
    ``rho**2 = 1 - 2 b s + b**2`` and ``b = |a| e^{-t}``.
    """
    amag = abs(float(a))
    k = 0.5 * (4 - orbit.n)

    def func(T, S):
        b = (-T).exp() * amag
        L = (1.0 - 2.0 * b * S + b * b).log() * 0.5
        tau = T + L + phase
        y = delaunay_eval_array(orbit, tau.value)
        V = tau.compose([y[..., i] for i in range(tau.degree + 1)])
        return (L * k).exp() * V

    return JetField(func)


class ScaledField:
    """``factor * field``; useful for rescaled blow-up limits."""

    def __init__(self, field, factor: float):
        self.field = field
        self.factor = float(factor)
        self.radial = field.radial

    def jet(self, t, s) -> FieldJet:
        j = self.field.jet(t, s)
        f = self.factor
        return FieldJet(f * j.v, f * j.v_t, f * j.v_tt, f * j.v_ttt, f * j.v_s, f * j.v_ss, f * j.v_ts)


class SampledField:
    """Field known only through point values ``func(t, s)`` (vectorised).

    Derivatives come from fourth-order five-point central differences.
    First derivatives use ``step``; higher ones use larger steps so that
    rounding does not swamp them.  ``func`` must accept ``s`` slightly
    outside ``[-1, 1]``.
    """

    radial = False

    def __init__(self, func, step: float = 1e-4, step2: float = 2e-3, step3: float = 5e-3):
        self.func = func
        self.steps = (step, step2, step3)

    @staticmethod
    def _d1(f, h):
        return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)

    @staticmethod
    def _d2(f, h):
        return (-f(-2 * h) + 16 * f(-h) - 30 * f(0.0) + 16 * f(h) - f(2 * h)) / (12 * h * h)

    @staticmethod
    def _d3(f, h):
        # seven-point, fourth order
        return (f(-3 * h) - 8 * f(-2 * h) + 13 * f(-h) - 13 * f(h) + 8 * f(2 * h) - f(3 * h)) / (8 * h ** 3)

    def jet(self, t, s) -> FieldJet:
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        h1, h2, h3 = self.steps
        g = self.func

        def ft(d):
            return g(t + d, s)

        def fs(d):
            return g(t, s + d)

        v = g(t, s)
        v_ts = self._d1(lambda d: self._d1(lambda e: g(t + d, s + e), h1), h2)
        return FieldJet(v, self._d1(ft, h1), self._d2(ft, h2), self._d3(ft, h3),
                        self._d1(fs, h1), self._d2(fs, h2), v_ts)


# --- slice integrals --------------------------------------------------------

def _slice_integral(density, field, t, quad: SliceQuadrature, check: bool, rtol: float = 1e-8):
    def at(q):
        s = q.nodes
        vals = density(field.jet(np.full_like(s, float(t)), s), s)
        return q.integrate(vals), q.area * float(np.dot(q.weights, np.abs(vals)))

    value, scale = at(quad)
    if check:
        fine, _ = at(quad.doubled())
        if abs(fine - value) > rtol * max(abs(value), abs(fine), scale * 1e-6):
            raise QuadratureError(
                f"slice integral at t={t} moved from {value!r} to {fine!r} when doubling m={quad.m}"
            )
    return value


def slice_invariant(field, t: float, coeffs: OdeCoefficients, quad: SliceQuadrature | None = None,
                    *, check: bool = True) -> float:
    """Integral of the Hamiltonian density over the slice ``{t} x S^{n-1}``."""
    if getattr(field, "radial", False):
        # constant on the slice: area times the pointwise value, no rounding from weights
        jet = field.jet(float(t), 0.0)
        return coeffs.sphere_area * float(ham_density(jet, coeffs))
    quad = quad or SliceQuadrature(coeffs.n)
    return _slice_integral(lambda j, s: ham_density(j, coeffs, s), field, t, quad, check)


def generalized_invariant(field, t: float, A: float, coeffs: OdeCoefficients,
                          quad: SliceQuadrature | None = None, *, check: bool = True) -> float:
    """Slice integral conserved by solutions of ``P_cyl v = A v**p``."""
    n = coeffs.n
    weight = (n - 4) / (2.0 * n) * A

    def density(j, s):
        return ham_cyl_density(j, coeffs, s) + weight * np.power(j.v, coeffs.power_exp)

    if getattr(field, "radial", False):
        return coeffs.sphere_area * float(density(field.jet(float(t), 0.0), 0.0))
    quad = quad or SliceQuadrature(n)
    return _slice_integral(density, field, t, quad, check)


# --- necksize correspondence ------------------------------------------------

def pohozaev_of_necksize(eps: float, coeffs: OdeCoefficients,
                         config: ShootingConfig = DEFAULT_SHOOTING) -> float:
    """Radial Pohozaev invariant of the Delaunay end with necksize ``eps``."""
    orbit = cached_orbit(float(eps), coeffs.n, config)
    return coeffs.sphere_area * orbit.ham_level


def pohozaev_range(coeffs: OdeCoefficients) -> tuple[float, float]:
    """Admissible interval ``[P(eps_n), 0)`` of the invariant."""
    return coeffs.sphere_area * coeffs.cylinder_energy, 0.0


def necksize_from_pohozaev(P: float, coeffs: OdeCoefficients,
                           config: ShootingConfig = DEFAULT_SHOOTING) -> float:
    """Invert :func:`pohozaev_of_necksize` by bracketed root finding."""
    P = float(P)
    lo_p, _ = pohozaev_range(coeffs)
    if not (math.isfinite(P) and P < 0.0 and P >= lo_p * (1.0 + 1e-12)):
        raise OutOfRange(f"P={P!r} is outside the admissible interval [{lo_p!r}, 0)")
    eps_n = coeffs.eps_n
    if P <= lo_p * (1.0 - 1e-12):
        return eps_n
    eps_lo = config.min_eps

    def g(e):
        return pohozaev_of_necksize(e, coeffs, config) - P

    g_lo = g(eps_lo)
    if g_lo < 0:
        raise Degenerate(f"P={P!r} corresponds to a necksize below the cutoff {eps_lo}")
    if g_lo == 0:
        return eps_lo
    tol = 1e-9 * abs(lo_p)
    eps = brentq(g, eps_lo, eps_n, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(g(eps)) > tol:
        raise OutOfRange(f"could not resolve P={P!r} to within {tol:g}")
    return float(eps)


__all__ = [
    "CylState",
    "FieldJet",
    "JetField",
    "OutOfRange",
    "QuadratureError",
    "RadialField",
    "SampledField",
    "ScaledField",
    "SliceQuadrature",
    "generalized_invariant",
    "ham_cyl_density",
    "ham_density",
    "necksize_from_pohozaev",
    "orbit_field",
    "pohozaev_of_necksize",
    "pohozaev_range",
    "slice_invariant",
    "sphere_field",
    "translated_delaunay_field",
]
