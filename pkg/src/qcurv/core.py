"""Dimension constants, phase-space state and orbit containers."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

N_MIN = 5
N_MAX_DEFAULT = 12


class QCurvError(Exception):
    """Base class for all library errors."""


class DimensionError(QCurvError, ValueError):
    pass


@dataclass(frozen=True)
class OdeCoefficients:
    """Constants of the cylindrical constant-Q ODE in dimension ``n``.

    ``v'''' - c2 v'' + c0 v = c_rhs v**p``.
    """

    n: int
    c2: float
    c0: float
    c_rhs: float
    p: float
    eps_n: float
    sphere_area: float

    @property
    def power_coeff(self) -> float:
        """Coefficient of ``v**(2n/(n-4))`` in the Hamiltonian."""
        n = self.n
        return (n - 4) ** 2 * (n * n - 4) / 32.0

    @property
    def power_exp(self) -> float:
        """``2n/(n-4)``, i.e. ``p + 1``."""
        return 2.0 * self.n / (self.n - 4)

    @property
    def half_weight(self) -> float:
        """``(n-4)/2``, the conformal weight of the field on the cylinder."""
        return 0.5 * (self.n - 4)

    @property
    def omega(self) -> float:
        """Angular frequency of the linearisation at the cylinder."""
        disc = math.sqrt(self.c2 ** 2 + 4.0 * self.c0 * (self.p - 1.0))
        return math.sqrt(0.5 * (disc - self.c2))

    @property
    def linear_period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def cylinder_energy(self) -> float:
        """Closed form of the reduced Hamiltonian on the constant solution."""
        n = self.n
        ratio = n * (n - 4) / (n * n - 4)
        return -((n - 4) * (n * n - 4) / 8.0) * ratio ** (n / 4.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c2, self.c0, self.c_rhs, self.p)


def sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere in R^n."""
    if int(n) != n or n < 2:
        raise DimensionError(f"sphere_area needs an integer n >= 2, got {n!r}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def coefficients(n: int, *, wide: bool = False) -> OdeCoefficients:
    """Closed-form ODE constants for dimension ``n``.

    ``n`` is limited to 5..12 unless ``wide`` is set.
    """
    if isinstance(n, bool) or int(n) != n:
        raise DimensionError(f"dimension must be an integer, got {n!r}")
    n = int(n)
    if n < N_MIN:
        raise DimensionError(f"dimension must be >= {N_MIN}, got {n}")
    if n > N_MAX_DEFAULT and not wide:
        raise DimensionError(
            f"dimension {n} is outside 5..{N_MAX_DEFAULT}; pass wide=True to allow it"
        )
    c2 = (n * (n - 4) + 8) / 2.0
    c0 = n * n * (n - 4) ** 2 / 16.0
    c_rhs = n * (n - 4) * (n * n - 4) / 16.0
    p = (n + 4) / (n - 4)
    eps_n = (n * (n - 4) / (n * n - 4)) ** ((n - 4) / 8.0)
    return OdeCoefficients(n, c2, c0, c_rhs, p, eps_n, sphere_area(n))


class CylState(NamedTuple):
    """A point ``(v, v', v'', v''')`` of the four-dimensional phase space."""

    v: float
    dv: float
    d2v: float
    d3v: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, y) -> "CylState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))


@dataclass(frozen=True, eq=False)
class DelaunayOrbit:
    """One period of the even periodic solution with minimum ``eps`` at t=0.

    ``t`` holds a uniform grid on ``[0, period]`` and ``states`` the matching
    ``(v, v', v'', v''')`` rows.  ``constant`` marks the cylinder, whose
    ``period`` is the limiting linearisation period.
    """

    n: int
    eps: float
    kappa: float
    period: float
    ham_level: float
    t: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    constant: bool = False
    residual: float = 0.0

    @property
    def half_period(self) -> float:
        return 0.5 * self.period

    @property
    def v_max(self) -> float:
        return float(self.states[:, 0].max())

    @property
    def v_min(self) -> float:
        return float(self.states[:, 0].min())

    @functools.cached_property
    def derivative_table(self) -> np.ndarray:
        """Samples of v and its first five derivatives (six columns)."""
        c = coefficients(self.n, wide=True)
        s = self.states
        v = s[:, 0]
        d4 = c.c2 * s[:, 2] - c.c0 * v + c.c_rhs * v ** c.p
        d5 = c.c2 * s[:, 3] - c.c0 * s[:, 1] + c.c_rhs * c.p * v ** (c.p - 1.0) * s[:, 1]
        return np.column_stack([s, d4, d5])

    def sample_table(self) -> list[tuple[float, CylState]]:
        return [(float(t), CylState.from_array(y)) for t, y in zip(self.t, self.states)]
