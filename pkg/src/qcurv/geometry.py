"""Side computations in flat and conformally flat coordinates.

Radial profiles, the flat (bi)Laplacian, scalar-curvature positivity of a
conformal factor, mean curvature of geodesic spheres of the round metric,
the Kelvin transform and the passage to cylindrical coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DelaunayOrbit, DimensionError, coefficients
from .delaunay import delaunay_derivatives
from .jets import Jet


# --- Q-curvature ------------------------------------------------------------

def q_curvature(n, scalar, ric_sq, lap_scalar=0):
    """Q-curvature from scalar curvature, |Ric|^2 and the Laplacian of R.

    Exact when the inputs are integers or Fractions.
    """
    n = Fraction(n)
    return (
        -Fraction(1, 2) / (n - 1) * lap_scalar
        - 2 / (n - 2) ** 2 * ric_sq
        + (n ** 3 - 4 * n ** 2 + 16 * n - 16) / (8 * (n - 1) ** 2 * (n - 2) ** 2) * scalar ** 2
    )


def q_round(n: int) -> Fraction:
    """Q-curvature of the round unit sphere, computed in rational arithmetic."""
    if int(n) != n or n < 5:
        raise DimensionError(f"q_round needs an integer n >= 5, got {n!r}")
    n = int(n)
    return q_curvature(n, Fraction(n * (n - 1)), Fraction(n * (n - 1) ** 2), 0)


# --- radial profiles --------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """A function of ``r = |x|`` with derivatives up to order four.

    ``derivs(r)`` returns an array whose last axis holds ``f, f', ..., f''''``.
    """

    n: int
    derivs: object
    name: str = ""

    def __call__(self, r):
        return np.asarray(self.derivs(r))[..., 0]

    @classmethod
    def from_formula(cls, n: int, func, name: str = "") -> "RadialProfile":
        """Profile from a formula on Taylor jets ``func(R) -> Jet``."""

        def derivs(r):
            R, _ = Jet.variables(r, 0.0, 4)
            J = func(R)
            return np.stack([J.partial(i, 0) for i in range(5)], axis=-1)

        return cls(n, derivs, name)

    def scaled(self, lam: float) -> "RadialProfile":
        """``lam**((n-4)/2) f(lam r)``."""
        w = lam ** (0.5 * (self.n - 4))
        powers = lam ** np.arange(5)
        return RadialProfile(self.n, lambda r: w * powers * np.asarray(self.derivs(lam * np.asarray(r, float))),
                             f"{self.name}_scaled")

    def times(self, other: "RadialProfile") -> "RadialProfile":
        """Pointwise product (Leibniz rule up to order four)."""
        binom = [[math.comb(k, j) for j in range(k + 1)] for k in range(5)]

        def derivs(r):
            a = np.asarray(self.derivs(r))
            b = np.asarray(other.derivs(r))
            out = [sum(binom[k][j] * a[..., j] * b[..., k - j] for j in range(k + 1)) for k in range(5)]
            return np.stack(out, axis=-1)

        return RadialProfile(self.n, derivs, f"{self.name}*{other.name}")


def power_profile(alpha: float, n: int) -> RadialProfile:
    """``r**alpha``."""
    return RadialProfile.from_formula(n, lambda R: R ** alpha, f"r^{alpha}")


def sphere_profile(n: int) -> RadialProfile:
    """Conformal factor of the round metric, ``((1 + r^2)/2)**((4-n)/2)``."""
    return RadialProfile.from_formula(n, lambda R: ((R * R + 1.0) * 0.5) ** (0.5 * (4 - n)), "U_sph")


def delaunay_profile(orbit: DelaunayOrbit) -> RadialProfile:
    """Euclidean Delaunay factor ``r**((4-n)/2) v_eps(-log r)``."""
    n = orbit.n
    k = 0.5 * (4 - n)

    def func(R):
        tau = -R.log()
        d = delaunay_derivatives(orbit, tau.value)
        return R ** k * tau.compose([d[..., i] for i in range(5)])

    return RadialProfile.from_formula(n, func, f"u_eps({orbit.eps:.6g})")


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    return r


def radial_laplacian(profile: RadialProfile, r):
    r = _check_r(r)
    d = np.asarray(profile.derivs(r))
    return d[..., 2] + (profile.n - 1) * d[..., 1] / r


def radial_bilaplacian(profile: RadialProfile, r):
    """Flat bilaplacian, the radial Laplacian applied twice."""
    r = _check_r(r)
    d = np.asarray(profile.derivs(r))
    m = profile.n - 1
    g1 = d[..., 3] + m * (d[..., 2] / r - d[..., 1] / r ** 2)
    g2 = d[..., 4] + m * (d[..., 3] / r - 2.0 * d[..., 2] / r ** 2 + 2.0 * d[..., 1] / r ** 3)
    return g2 + m * g1 / r


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    r_at_min: float
    passed: bool
    tol: float


def scalar_positivity(profile: RadialProfile, r_grid, tol: float = 1e-10) -> PositivityReport:
    """Check ``-lap w >= (2/(n-4)) |grad w|^2 / w`` on a grid of radii.

    For a total conformal factor ``w`` this is nonnegative scalar curvature
    of ``w**(4/(n-4)) |dx|^2``.
    """
    r = _check_r(r_grid)
    d = np.asarray(profile.derivs(r))
    w = d[..., 0]
    if np.any(w <= 0):
        raise ValueError("conformal factor must be positive")
    q = -radial_laplacian(profile, r) - 2.0 / (profile.n - 4) * d[..., 1] ** 2 / w
    i = int(np.argmin(q))
    return PositivityReport(float(q.flat[i]), float(r.flat[i]), bool(q.flat[i] >= -tol), tol)


# --- mean curvature of geodesic spheres --------------------------------------

def mean_curvature_geodesic_sphere(r, n: int):
    """Mean curvature (inward normal, trace convention) of the round-metric
    geodesic sphere that is the Euclidean sphere of radius ``r``.

    Equals ``(n-1) cot(rho)`` for geodesic radius ``rho = 2 arctan r``.
    """
    r = _check_r(r)
    return (n - 1) * (1.0 - r * r) / (2.0 * r)


def mean_curvature_alternative(r, n: int):
    """The alternative closed form ``-2n r (1+r^2) + (n-1+n r^2)/r``.

    Kept for comparison only; it disagrees with
    :func:`mean_curvature_christoffel`.
    """
    r = _check_r(r)
    return -2.0 * n * r * (1.0 + r * r) + (n - 1 + n * r * r) / r


def _complex_jacobian(f, x, h=1e-30):
    n = x.shape[0]
    cols = []
    for j in range(n):
        z = x.astype(complex)
        z[j] += 1j * h
        cols.append(np.imag(f(z)) / h)
    return np.stack(cols, axis=-1)


def christoffel(metric, x) -> np.ndarray:
    """``Gamma[l, i, j]`` of the metric field ``metric(x) -> (n, n)`` at ``x``.

    Metric derivatives by complex-step differentiation, so ``metric`` must
    be complex-analytic in ``x``.
    """
    x = np.asarray(x, dtype=float)
    g = np.real(metric(x.astype(complex)))
    dg = _complex_jacobian(metric, x)  # dg[a, b, k] = d_k g_ab
    ginv = np.linalg.inv(g)
    # Gamma^l_ij = 1/2 g^lk (d_i g_kj + d_j g_ki - d_k g_ij)
    d_i_gkj = np.einsum("kji->kij", dg)
    d_j_gki = dg
    d_k_gij = np.einsum("ijk->kij", dg)
    return 0.5 * np.einsum("lk,kij->lij", ginv, d_i_gkj + d_j_gki - d_k_gij)


def round_metric(x):
    """Round-sphere metric pulled back by stereographic projection."""
    phi = 2.0 / (1.0 + np.sum(x * x))
    return phi * phi * np.eye(x.shape[0])


def mean_curvature_christoffel(r: float, n: int, direction=None) -> float:
    """``H = -d_l eta^l - eta^p Gamma^l_{lp}`` at the point ``r * direction``.

    ``eta`` is the inward unit normal of the sphere ``|x| = r`` for the round
    metric; both terms are evaluated by complex-step differentiation.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    e = np.zeros(n)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
    x = float(r) * e

    def eta(z):
        rr = np.sqrt(np.sum(z * z))
        return -((1.0 + rr * rr) / (2.0 * rr)) * z

    div = np.trace(_complex_jacobian(eta, x))
    gamma = christoffel(round_metric, x)
    contracted = np.einsum("llp->p", gamma)
    return float(-div - np.dot(np.real(eta(x.astype(complex))), contracted))


# --- Kelvin transform and cylindrical coordinates ---------------------------

def _points(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("the origin is excluded")
    return x, r


def kelvin(u, x):
    """``|x|**(4-n) u(x / |x|**2)``; ``n`` is the length of the last axis of ``x``."""
    x, r = _points(x)
    n = x.shape[-1]
    return r ** (4 - n) * u(x / (r * r)[..., None])


def u_sph(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    return (0.5 * (1.0 + np.sum(x * x, axis=-1))) ** (0.5 * (4 - n))


def _slice_point(t, s, n):
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    t, s = np.broadcast_arrays(t, s)
    theta = np.zeros(t.shape + (n,))
    theta[..., 0] = s
    theta[..., 1] = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    return np.exp(-t)[..., None] * theta


def cyl_from_euclid(u, t, s, n: int):
    """``v(t, theta) = e^{(4-n)t/2} (U_sph u)(e^{-t} theta)``.

    ``theta`` is a point of the unit sphere with first coordinate ``s``.
    With ``u = 1`` this gives ``(cosh t)**((4-n)/2)``.
    """
    x = _slice_point(t, s, n)
    return np.exp(0.5 * (4 - n) * np.asarray(t, float)) * u_sph(x) * u(x)


def euclid_from_cyl(v, x, n: int | None = None):
    """Inverse of :func:`cyl_from_euclid`; ``v(t, s)`` is axisymmetric about e_1."""
    x, r = _points(x)
    n = x.shape[-1] if n is None else n
    t = -np.log(r)
    return np.exp(-0.5 * (4 - n) * t) * v(t, x[..., 0] / r) / u_sph(x)


def cyl_from_euclid_flat(u, t, s, n: int):
    """Flat convention ``v(t, theta) = e^{(4-n)t/2} u(e^{-t} theta)``."""
    x = _slice_point(t, s, n)
    return np.exp(0.5 * (4 - n) * np.asarray(t, float)) * u(x)


def euclid_from_cyl_flat(v, x, n: int | None = None):
    """``u(x) = |x|**((4-n)/2) v(-log|x|, x_1/|x|)``."""
    x, r = _points(x)
    n = x.shape[-1] if n is None else n
    return r ** (0.5 * (4 - n)) * v(-np.log(r), x[..., 0] / r)


def scaling_check(profile: RadialProfile, lam: float, r, A: float | None = None):
    """Defect ``lap^2 u_lam - A u_lam**p`` of the rescaled profile at ``r``.

    ``A`` defaults to the sphere constant of dimension ``n``.
    """
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    n = profile.n
    c = coefficients(n, wide=True)
    A = c.c_rhs if A is None else A
    scaled = profile if lam == 1 else profile.scaled(lam)
    return radial_bilaplacian(scaled, r) - A * scaled(r) ** c.p
