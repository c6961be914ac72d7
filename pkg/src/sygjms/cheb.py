"""Chebyshev--Lobatto collocation helpers on an interval [a, b]."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.fft import dct


def nodes(N, a=0.0, b=1.0):
    """N+1 Lobatto nodes in increasing order."""
    x = np.sin(np.pi * (2 * np.arange(N + 1) - N) / (2 * N))
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def diff_matrix(N, a=0.0, b=1.0):
    """First-derivative matrix on ``nodes(N, a, b)``."""
    th = np.pi * np.arange(N + 1) / N
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    # node differences via the product formula, free of cancellation
    X = 2 * np.sin((th[:, None] + th[None, :]) / 2) * np.sin((th[:, None] - th[None, :]) / 2)
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D * (2.0 / (b - a))


def interpolant(values, a=0.0, b=1.0):
    """Chebyshev series through values sampled at ``nodes(N, a, b)``."""
    f = np.asarray(values, dtype=float)[::-1]
    N = len(f) - 1
    c = dct(f, type=1) / N
    c[0] *= 0.5
    c[-1] *= 0.5
    return Chebyshev(c, domain=[a, b])


def fit_function(fn, N, a=0.0, b=1.0):
    return interpolant(fn(nodes(N, a, b)), a, b)


def tail_size(cheb):
    """Magnitude of the last few coefficients relative to the largest (resolution check)."""
    c = np.abs(cheb.coef)
    return float(c[-3:].max() / max(c.max(), 1e-300))


class RadialGrid:
    """Collocation in t on [0, 1] with r = c t^2.

    The substitution doubles the algebraic order of boundary singularities
    r^m log r, so expansions with a first log term resolve quickly.
    """

    def __init__(self, N, c):
        self.N = N
        self.c = float(c)
        self.t = nodes(N, 0.0, 1.0)
        self.r = self.c * self.t ** 2
        self.Dt = diff_matrix(N, 0.0, 1.0)
        self.Dtt = self.Dt @ self.Dt
        t = self.t[1:]
        Dr = np.zeros_like(self.Dt)
        Drr = np.zeros_like(self.Dt)
        Dr[1:] = self.Dt[1:] / (2 * self.c * t[:, None])
        Drr[1:] = (self.Dtt[1:] - self.Dt[1:] / t[:, None]) / (4 * self.c ** 2 * t[:, None] ** 2)
        self.Dr, self.Drr = Dr, Drr

    def function(self, values):
        return RadialFunction(interpolant(values, 0.0, 1.0), self.c)


class RadialFunction:
    """f(r) = F(sqrt(r / c)) for a Chebyshev series F on [0, 1]."""

    def __init__(self, F, c):
        self.F = F
        self.c = c
        self._d = [F]

    def _Fd(self, k):
        while len(self._d) <= k:
            self._d.append(self._d[-1].deriv())
        return self._d[k]

    def __call__(self, r, d=0):
        r = np.asarray(r, dtype=float)
        c = self.c
        t = np.sqrt(np.maximum(r, 0.0) / c)
        f0 = self._Fd(0)(t)
        if d == 0:
            return f0
        f1 = self._Fd(1)(t)
        if d == 1:
            return f1 / (2 * c * t)
        f2 = self._Fd(2)(t)
        if d == 2:
            return (f2 - f1 / t) / (4 * c * c * t * t)
        f3 = self._Fd(3)(t)
        if d == 3:
            return (f3 - 3 * f2 / t + 3 * f1 / t ** 2) / (8 * c ** 3 * t ** 3)
        raise ValueError("derivative order above 3")

    def tail(self):
        return tail_size(self.F)
