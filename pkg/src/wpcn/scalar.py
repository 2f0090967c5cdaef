"""Monotone scalar root finding for the closed-form KKT conditions.

``f(z) = ln(1+z) - z/(1+z)`` and ``fbar(z; a) = f(z) - a/(1+z)`` are
strictly increasing on ``[0, inf)``; inverting them gives the per-slot
time shares of the full- and half-duplex solvers.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

DEFAULT_TOL = 1e-12
_REL = 4e-16


class BracketError(ValueError):
    """The endpoints do not bracket a sign change."""


class NoRootError(ValueError):
    """``fbar(z) = c`` has no solution on ``[0, inf)`` (``c < -a``)."""


class BisectionError(RuntimeError):
    """Bisection ran out of iterations; ``interval`` is the last bracket."""

    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.f_lo * self.f_hi > 0.0:
            raise BracketError(
                f"no sign change on [{self.lo}, {self.hi}]: f = {self.f_lo}, {self.f_hi}")

    @classmethod
    def of(cls, fn, lo, hi):
        return cls(lo, hi, fn(lo), fn(hi))


def f_value(z):
    """``ln(1+z) - z/(1+z)``, accurate near zero."""
    if z < 0:
        raise ValueError("f is defined for z >= 0")
    if z < 1e-3:
        return sum((-1) ** k * (k - 1) / k * z ** k for k in range(2, 10))
    return math.log1p(z) - z / (1.0 + z)


def fbar_value(z, a):
    """``f(z) - a/(1+z)``."""
    return f_value(z) - a / (1.0 + z)


def _converged(g, c, tol):
    return abs(g) <= tol * min(1.0, max(abs(c), 1e-300))


def _invert(c, a, tol):
    target = lambda z: fbar_value(z, a) - c  # noqa: E731
    if c == -a:
        return 0.0
    lo, hi = 0.0, 1.0
    while target(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return math.inf
    z = math.sqrt(2.0 * c) if a == 0.0 and 0.0 < c < 0.05 else 0.5 * (lo + hi)
    if not lo < z < hi:
        z = 0.5 * (lo + hi)
    for _ in range(400):
        g = target(z)
        if g == 0.0:
            return z
        if g > 0.0:
            hi = z
        else:
            lo = z
        slope = (z + a) / (1.0 + z) ** 2
        zn = z - g / slope if slope > 0.0 else 0.5 * (lo + hi)
        if not lo < zn < hi:
            # the polish never leaves the bracket
            zn = 0.5 * (lo + hi)
        if (_converged(target(zn), c, tol) and abs(zn - z) <= 1e-12 * zn) \
                or hi - lo <= _REL * hi or abs(zn - z) <= _REL * zn:
            return zn
        z = zn
    return z


def f_inverse(c, tol=DEFAULT_TOL):
    """Solve ``f(z) = c`` for ``z >= 0``.

    The search doubles ``hi`` from 1 until it brackets the root, then
    runs bisection with a Newton polish that is confined to the bracket.
    Iteration continues to full double precision, so the residual is
    below ``tol`` in absolute terms for ``c >= 1`` and relative to ``c``
    for small ``c``.
    """
    if c < 0:
        raise ValueError("f_inverse needs c >= 0")
    if c == 0:
        return 0.0
    return _invert(float(c), 0.0, tol)


def fbar_inverse(c, a, tol=DEFAULT_TOL):
    """Solve ``fbar(z; a) = c`` for ``z >= 0``; raises NoRootError if ``c < -a``."""
    if a < 0:
        raise ValueError("fbar_inverse needs a >= 0")
    if c < -a:
        raise NoRootError(f"fbar(z; {a}) = {c} has no root on [0, inf)")
    return _invert(float(c), float(a), tol)


def f_inverse_array(c):
    """Vectorized :func:`f_inverse` through the active kernel backend."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("f_inverse needs c >= 0")
    return kernels.invert(c, 0.0).reshape(c.shape)


def fbar_inverse_array(c, a):
    """Vectorized :func:`fbar_inverse`; ``nan`` marks entries without a root."""
    c = np.asarray(c, dtype=float)
    return kernels.invert(c, np.broadcast_to(a, c.shape)).reshape(c.shape)


def bisect(fn, bracket, tol=DEFAULT_TOL, max_iter=200):
    """Root of a monotone function inside ``bracket``.

    Stops when ``|fn(root)| <= tol`` or the interval is narrower than
    ``tol`` (relative for large endpoints).
    """
    lo, hi, f_lo = bracket.lo, bracket.hi, bracket.f_lo
    if f_lo == 0.0:
        return lo
    if bracket.f_hi == 0.0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid) <= tol:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)) or hi - lo <= _REL * abs(hi):
            return 0.5 * (lo + hi)
    raise BisectionError(f"bisection did not converge in {max_iter} halvings", (lo, hi))
