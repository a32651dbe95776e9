"""Singular constant Q-curvature metrics with Delaunay-type ends.

Submodules: ``core`` (constants and containers), ``ode`` (integrator and
energy), ``delaunay`` (periodic solutions), ``pohozaev`` (slice invariants),
``asymptotics`` (tail fits), ``geometry`` (side computations) and ``cli``.
"""

from ._jit import BACKEND
from .core import CylState, DelaunayOrbit, OdeCoefficients, QCurvError, coefficients, sphere_area
from .delaunay import (
    cached_orbit,
    delaunay_eval,
    euclid_delaunay,
    shoot_delaunay,
    translated_delaunay,
    v_sph,
)
from .ode import IntegratorConfig, hamiltonian, hamiltonian_drift, integrate, ode_rhs
from .pohozaev import necksize_from_pohozaev, pohozaev_of_necksize, slice_invariant

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CylState",
    "DelaunayOrbit",
    "IntegratorConfig",
    "OdeCoefficients",
    "QCurvError",
    "cached_orbit",
    "coefficients",
    "delaunay_eval",
    "euclid_delaunay",
    "hamiltonian",
    "hamiltonian_drift",
    "integrate",
    "necksize_from_pohozaev",
    "ode_rhs",
    "pohozaev_of_necksize",
    "shoot_delaunay",
    "slice_invariant",
    "sphere_area",
    "translated_delaunay",
    "v_sph",
]
