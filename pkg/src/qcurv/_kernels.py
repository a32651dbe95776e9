"""Dormand-Prince 5(4) kernels for the cylindrical ODE.

All functions here are numba-compatible and compiled when numba is enabled
(see ``_jit``).  They work on raw float arrays; ``ode`` wraps them.
"""

import math

import numpy as np

from ._jit import njit

OK = 0
EVENT = 1
POSITIVITY = 2
BLOWUP = 3
STEP_FAILURE = 4
MAX_TIME = 5

# Dormand & Prince (1980) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA


@njit
def rhs(y, c2, c0, cr, p, out):
    v = y[0]
    if v >= 0.0:
        pw = v ** p
    else:
        # odd extension so a stage may overshoot zero; accepted states are checked
        pw = -((-v) ** p)
    out[0] = y[1]
    out[1] = y[2]
    out[2] = y[3]
    out[3] = c2 * y[2] - c0 * v + cr * pw


@njit
def dopri_step(y, k, h, c2, c0, cr, p, ynew, yerr, tmp):
    """One DOPRI5 step.  ``k[0]`` must hold f(y); ``k[6]`` receives f(ynew)."""
    m = y.shape[0]
    for i in range(m):
        tmp[i] = y[i] + h * A21 * k[0, i]
    rhs(tmp, c2, c0, cr, p, k[1])
    for i in range(m):
        tmp[i] = y[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    rhs(tmp, c2, c0, cr, p, k[2])
    for i in range(m):
        tmp[i] = y[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    rhs(tmp, c2, c0, cr, p, k[3])
    for i in range(m):
        tmp[i] = y[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
    rhs(tmp, c2, c0, cr, p, k[4])
    for i in range(m):
        tmp[i] = y[i] + h * (
            A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i] + A64 * k[3, i] + A65 * k[4, i]
        )
    rhs(tmp, c2, c0, cr, p, k[5])
    for i in range(m):
        ynew[i] = y[i] + h * (
            B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i] + B5 * k[4, i] + B6 * k[5, i]
        )
    rhs(ynew, c2, c0, cr, p, k[6])
    for i in range(m):
        yerr[i] = h * (
            E1 * k[0, i]
            + E3 * k[2, i]
            + E4 * k[3, i]
            + E5 * k[4, i]
            + E6 * k[5, i]
            + E7 * k[6, i]
        )


@njit
def error_norm(yerr, y, ynew, rtol, atol):
    m = y.shape[0]
    acc = 0.0
    for i in range(m):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = yerr[i] / sc
        acc += r * r
    val = math.sqrt(acc / m)
    if val != val:
        return np.inf
    return val


@njit
def _finite(y):
    for i in range(y.shape[0]):
        if not math.isfinite(y[i]):
            return False
    return True


@njit
def _overflow(y, vmax, normmax):
    if abs(y[0]) > vmax:
        return True
    for i in range(y.shape[0]):
        if abs(y[i]) > normmax:
            return True
    return False


@njit
def single_step(y, h, c2, c0, cr, p):
    """State after one DOPRI5 step of size ``h`` from ``y``."""
    m = y.shape[0]
    k = np.empty((7, m))
    ynew = np.empty(m)
    yerr = np.empty(m)
    tmp = np.empty(m)
    rhs(y, c2, c0, cr, p, k[0])
    dopri_step(y, k, h, c2, c0, cr, p, ynew, yerr, tmp)
    return ynew


@njit
def integrate_grid(y0, tgrid, c2, c0, cr, p, rtol, atol, max_step, vmax, normmax, h0):
    """Integrate through every point of a monotone grid, landing on each exactly.

    Returns ``(out, n_filled, status, n_accepted, n_rejected, t_reached)``.
    """
    m = y0.shape[0]
    npts = tgrid.shape[0]
    out = np.full((npts, m), np.nan)
    for i in range(m):
        out[0, i] = y0[i]
    if npts == 1:
        return out, 1, OK, 0, 0, tgrid[0]
    direction = 1.0 if tgrid[npts - 1] >= tgrid[0] else -1.0

    k = np.empty((7, m))
    y = y0.copy()
    ynew = np.empty(m)
    yerr = np.empty(m)
    tmp = np.empty(m)
    rhs(y, c2, c0, cr, p, k[0])

    t = tgrid[0]
    h = min(abs(h0), max_step)
    err_old = 1e-4
    rejected = False
    n_acc = 0
    n_rej = 0
    j = 1
    while j < npts:
        target = tgrid[j]
        remaining = abs(target - t)
        clipped = False
        h_try = h
        if h_try >= remaining:
            h_try = remaining
            clipped = True
        if h_try < 1e-14 * max(1.0, abs(t)):
            if remaining < 1e-14 * max(1.0, abs(t)):
                # coincident grid points
                for i in range(m):
                    out[j, i] = y[i]
                j += 1
                continue
            return out, j, STEP_FAILURE, n_acc, n_rej, t
        dopri_step(y, k, direction * h_try, c2, c0, cr, p, ynew, yerr, tmp)
        if _finite(ynew):
            err = error_norm(yerr, y, ynew, rtol, atol)
        else:
            err = np.inf
        if err <= 1.0:
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** (-PI_ALPHA) * err_old ** PI_BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            h_new = min(max_step, h_try * fac)
            if clipped and h_new < h:
                h_new = h
            h = h_new
            err_old = max(err, 1e-4)
            rejected = False
            n_acc += 1
            if clipped:
                t = target
            else:
                t = t + direction * h_try
            for i in range(m):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if y[0] <= 0.0:
                return out, j, POSITIVITY, n_acc, n_rej, t
            if _overflow(y, vmax, normmax):
                return out, j, BLOWUP, n_acc, n_rej, t
            if clipped:
                for i in range(m):
                    out[j, i] = y[i]
                j += 1
        else:
            n_rej += 1
            rejected = True
            if err == np.inf:
                h = h_try * FAC_MIN
            else:
                h = h_try * max(FAC_MIN, SAFETY * err ** (-PI_ALPHA))
    return out, npts, OK, n_acc, n_rej, t


@njit
def integrate_event(y0, t_max, c2, c0, cr, p, rtol, atol, max_step, vmax, normmax, h0, comp, sign):
    """Integrate forward until ``y[comp]`` changes sign in direction ``sign``.

    ``sign=-1`` catches a crossing from positive to non-positive.  On an event
    the bracketing step ``(t_a, y_a) -> (t_a + h, y_b)`` is returned so the
    caller can locate the root.  Returns
    ``(status, t_a, y_a, h, y_b, n_accepted)``.
    """
    m = y0.shape[0]
    k = np.empty((7, m))
    y = y0.copy()
    ynew = np.empty(m)
    yerr = np.empty(m)
    tmp = np.empty(m)
    rhs(y, c2, c0, cr, p, k[0])

    t = 0.0
    h = min(abs(h0), max_step)
    err_old = 1e-4
    rejected = False
    n_acc = 0
    while t < t_max:
        h_try = min(h, t_max - t)
        if h_try < 1e-14 * max(1.0, t):
            if t_max - t < 1e-14 * max(1.0, t):
                break
            return STEP_FAILURE, t, y, 0.0, y, n_acc
        dopri_step(y, k, h_try, c2, c0, cr, p, ynew, yerr, tmp)
        if _finite(ynew):
            err = error_norm(yerr, y, ynew, rtol, atol)
        else:
            err = np.inf
        if err <= 1.0:
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** (-PI_ALPHA) * err_old ** PI_BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            h = min(max_step, h_try * fac)
            err_old = max(err, 1e-4)
            rejected = False
            n_acc += 1
            before = y[comp]
            after = ynew[comp]
            if sign * before < 0.0 and sign * after >= 0.0:
                return EVENT, t, y, h_try, ynew.copy(), n_acc
            t = t + h_try
            for i in range(m):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if y[0] <= 0.0:
                return POSITIVITY, t, y, 0.0, y, n_acc
            if _overflow(y, vmax, normmax):
                return BLOWUP, t, y, 0.0, y, n_acc
        else:
            rejected = True
            if err == np.inf:
                h = h_try * FAC_MIN
            else:
                h = h_try * max(FAC_MIN, SAFETY * err ** (-PI_ALPHA))
    return MAX_TIME, t, y, 0.0, y, n_acc
