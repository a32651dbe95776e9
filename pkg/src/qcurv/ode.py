"""Vector field, adaptive integrator and conserved energy of the Delaunay ODE."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .core import CylState, OdeCoefficients, QCurvError


class IntegrationError(QCurvError):
    """Integration stopped early.  ``t``/``states`` hold the part computed."""

    def __init__(self, message, t_stop=None, t=None, states=None):
        super().__init__(message)
        self.t_stop = t_stop
        self.t = t
        self.states = states


class PositivityLost(IntegrationError):
    pass


class BlowUp(IntegrationError):
    pass


class StepFailure(IntegrationError):
    pass


_STATUS_ERRORS = {
    K.POSITIVITY: PositivityLost,
    K.BLOWUP: BlowUp,
    K.STEP_FAILURE: StepFailure,
}


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.05
    max_time: float = 200.0
    # overflow guard; crossing either bound raises BlowUp
    v_max: float = 1e6
    norm_max: float = 1e8

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "max_time", "v_max", "norm_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 10 * sys.float_info.epsilon:
            raise ValueError("rel_tol must be at least 10 * machine epsilon")

    def scaled(self, factor: float) -> "IntegratorConfig":
        """Same configuration with both tolerances multiplied by ``factor``."""
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    n_steps: int = field(default=0, compare=False)

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for t, y in zip(self.t, self.states):
            yield float(t), CylState.from_array(y)

    @property
    def final(self) -> CylState:
        return CylState.from_array(self.states[-1])


def _check_positive(v):
    if not v > 0:
        raise PositivityLost(f"field value must be positive, got v={v!r}")


def ode_rhs(state, coeffs: OdeCoefficients) -> CylState:
    """Time derivative of ``state`` under the cylindrical ODE."""
    v, dv, d2v, d3v = (float(x) for x in state)
    _check_positive(v)
    d4v = coeffs.c2 * d2v - coeffs.c0 * v + coeffs.c_rhs * v ** coeffs.p
    return CylState(dv, d2v, d3v, d4v)


def fifth_derivative(states, coeffs: OdeCoefficients) -> np.ndarray:
    """``v'''''`` along an array of states (differentiated right-hand side)."""
    y = np.asarray(states, dtype=float)
    v = y[..., 0]
    return (
        coeffs.c2 * y[..., 3]
        - coeffs.c0 * y[..., 1]
        + coeffs.c_rhs * coeffs.p * v ** (coeffs.p - 1.0) * y[..., 1]
    )


def fourth_derivative(states, coeffs: OdeCoefficients) -> np.ndarray:
    y = np.asarray(states, dtype=float)
    return coeffs.c2 * y[..., 2] - coeffs.c0 * y[..., 0] + coeffs.c_rhs * y[..., 0] ** coeffs.p


def energy_density(v, dv, d2v, d3v, coeffs: OdeCoefficients, angular=0.0):
    """Hamiltonian without its power term; ``angular`` enters before the mass term.

    Shared by :func:`hamiltonian` and the slice densities so that both use
    one arithmetic path.
    """
    return -dv * d3v + 0.5 * d2v * d2v + 0.5 * coeffs.c2 * dv * dv + angular - 0.5 * coeffs.c0 * v * v


def power_term(v, coeffs: OdeCoefficients):
    return coeffs.power_coeff * np.power(v, coeffs.power_exp)


def hamiltonian(state, coeffs: OdeCoefficients) -> float:
    """Reduced Hamiltonian; constant along solutions of the ODE."""
    y = np.array([float(x) for x in state])
    _check_positive(y[0])
    return float(hamiltonian_array(y, coeffs))


def hamiltonian_array(states, coeffs: OdeCoefficients) -> np.ndarray:
    y = np.asarray(states, dtype=float)
    v = y[..., 0]
    if np.any(v <= 0):
        raise PositivityLost("field value must be positive")
    return energy_density(v, y[..., 1], y[..., 2], y[..., 3], coeffs) + power_term(v, coeffs)


def hamiltonian_drift(samples, coeffs: OdeCoefficients) -> float:
    """``max |H(t) - H(0)| / max(1, |H(0)|)`` over a sample table."""
    states = getattr(samples, "states", None)
    if states is None:
        states = np.array([np.asarray(s[1] if isinstance(s, tuple) and len(s) == 2 else s, float)
                           for s in samples])
    h = hamiltonian_array(states, coeffs)
    return float(np.max(np.abs(h - h[0])) / max(1.0, abs(h[0])))


def _as_array(initial) -> np.ndarray:
    y0 = np.array([float(x) for x in initial], dtype=float)
    if y0.shape != (4,):
        raise ValueError("initial state must have four components")
    return y0


def integrate_on_grid(initial, grid, coeffs: OdeCoefficients, config: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate from ``grid[0]`` through every grid point (monotone, either direction).

    The cylinder state ``(eps_n, 0, 0, 0)`` is returned as a constant table:
    it is an exact equilibrium, and stepping it would only amplify the
    rounding error of the right-hand side along the unstable directions.
    """
    y0 = _as_array(initial)
    _check_positive(y0[0])
    grid = np.ascontiguousarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a non-empty 1-d array")
    d = np.diff(grid)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise ValueError("grid must be monotone")
    span = abs(grid[-1] - grid[0])
    if span > config.max_time:
        raise ValueError(f"integration span {span} exceeds max_time={config.max_time}")
    if y0[0] == coeffs.eps_n and not y0[1:].any():
        return Trajectory(grid.copy(), np.tile(y0, (grid.size, 1)), 0)
    c2, c0, cr, p = coeffs.as_tuple()
    h0 = min(config.max_step, 1e-3)
    out, filled, status, n_acc, _, t_reached = K.integrate_grid(
        y0, grid, c2, c0, cr, p,
        config.rel_tol, config.abs_tol, config.max_step, config.v_max, config.norm_max, h0,
    )
    if status != K.OK:
        err = _STATUS_ERRORS[status]
        raise err(
            f"{err.__name__} at t={t_reached:.6g} (started at {grid[0]:.6g})",
            t_stop=float(t_reached), t=grid[:filled].copy(), states=out[:filled].copy(),
        )
    return Trajectory(grid.copy(), out, n_acc)


def integrate(initial, t_end: float, coeffs: OdeCoefficients, config: IntegratorConfig = DEFAULT_CONFIG,
              *, t0: float = 0.0, grid=None) -> Trajectory:
    """Integrate ``initial`` (given at time ``t0``) over a span of length ``t_end``.

    Output lands on a uniform grid of spacing at most ``config.max_step``
    (never coarser than the accepted steps) merged with any caller grid.
    """
    if not 0 < t_end <= config.max_time:
        raise ValueError(f"need 0 < t_end <= {config.max_time}, got {t_end}")
    n_uniform = int(np.ceil(t_end / config.max_step)) + 1
    base = np.linspace(t0, t0 + t_end, n_uniform)
    if grid is not None:
        extra = np.asarray(grid, dtype=float)
        if np.any(extra < t0) or np.any(extra > t0 + t_end):
            raise ValueError("requested grid points must lie inside the integration span")
        base = np.union1d(base, extra)
    return integrate_on_grid(initial, base, coeffs, config)
