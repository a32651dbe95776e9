"""Truncated bivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``c[i, j]`` of a function of
``(t, s)`` about a base point, up to total degree ``D``; trailing axes are
batch axes, so one jet can carry a whole slice of quadrature nodes.
Partial derivatives are ``i! j! c[i, j]``.
"""

from __future__ import annotations

import math

import numpy as np


class Jet:
    __array_priority__ = 100

    def __init__(self, coeffs, degree: int):
        self.c = coeffs
        self.degree = degree

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, degree: int = 3) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((degree + 1, degree + 1) + value.shape)
        c[0, 0] = value
        return cls(c, degree)

    @classmethod
    def variables(cls, t, s, degree: int = 3) -> tuple["Jet", "Jet"]:
        """Coordinate jets ``(T, S)`` based at ``(t, s)``, broadcast together."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        T = cls.constant(t, degree)
        S = cls.constant(s, degree)
        if degree >= 1:
            T.c[1, 0] = 1.0
            S.c[0, 1] = 1.0
        return T, S

    # -- access -------------------------------------------------------------
    @property
    def value(self):
        return self.c[0, 0]

    def partial(self, i: int, j: int = 0):
        """``d^{i+j} f / dt^i ds^j`` at the base point."""
        return self.c[i, j] * (math.factorial(i) * math.factorial(j))

    # -- arithmetic ---------------------------------------------------------
    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(np.broadcast_to(np.asarray(other, float), self.c.shape[2:]), self.degree)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.c + o.c, self.degree)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.degree)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * np.asarray(other, float), self.degree)
        D = self.degree
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for i in range(D + 1):
            for j in range(D + 1 - i):
                acc = 0.0
                for k in range(i + 1):
                    for m in range(j + 1):
                        acc = acc + a[k, m] * b[i - k, j - m]
                out[i, j] = acc
        return Jet(out, D)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / np.asarray(other, float), self.degree)
        return self * other ** -1.0

    def __rtruediv__(self, other):
        return self._lift(other) * self ** -1.0

    def compose(self, derivs) -> "Jet":
        """``f(self)`` given ``derivs[k] = f^(k)(self.value)`` for k = 0..D."""
        D = self.degree
        delta = Jet(self.c.copy(), D)
        delta.c[0, 0] = 0.0
        out = Jet.constant(np.asarray(derivs[0], float) * np.ones_like(self.value), D)
        power = None
        for k in range(1, D + 1):
            power = delta if power is None else power * delta
            out = out + power * (np.asarray(derivs[k], float) / math.factorial(k))
        return out

    def __pow__(self, a: float):
        u0 = self.value
        derivs = []
        coef = 1.0
        for k in range(self.degree + 1):
            derivs.append(coef * u0 ** (a - k))
            coef *= a - k
        return self.compose(derivs)

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose([e] * (self.degree + 1))

    def log(self) -> "Jet":
        u0 = self.value
        derivs = [np.log(u0)]
        for k in range(1, self.degree + 1):
            derivs.append((-1.0) ** (k - 1) * math.factorial(k - 1) / u0 ** k)
        return self.compose(derivs)
