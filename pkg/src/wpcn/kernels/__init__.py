"""Hot kernels behind a backend switch.

The public functions here forward to the implementation selected by
:mod:`wpcn._backend`.  ``implementation(name)`` returns a specific
backend module, which the parity tests and the benchmark use directly.

Kernels
-------
invert(c, a)
    Elementwise root of ``ln(1+z) - (z + a)/(1+z) = c`` on ``[0, inf)``;
    ``nan`` where ``c < -a``.  With ``a = 0`` this inverts ``f``.
fd_profile(lam, mu, alpha, w, p_avg, p_peak)
    Per-user maximizer ``(tau, E)`` of the perfect-SIC Lagrangian terms.
fd2_grid(alpha, w, p_avg, p_peak, t1s, t2s, s1s, s2s)
    Exhaustive two-user lattice search used by the oracle.
"""

import importlib

import numpy as np

from .._backend import active_backend

_MODULES = {"numba": "._loops", "numpy": "._vectorized"}
_cache = {}


def implementation(name=None):
    name = name or active_backend()
    if name not in _cache:
        _cache[name] = importlib.import_module(_MODULES[name], __name__)
    return _cache[name]


def invert(c, a=0.0):
    c = np.ascontiguousarray(np.atleast_1d(np.asarray(c, dtype=float)))
    a = np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), c.shape))
    return implementation().invert(c, a)


def fd_profile(lam, mu, alpha, w, p_avg, p_peak):
    alpha = np.ascontiguousarray(alpha, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    return implementation().fd_profile(float(lam), float(mu), alpha, w,
                                       float(p_avg), float(p_peak))


def fd2_grid(alpha, w, p_avg, p_peak, t1s, t2s, s1s, s2s):
    args = [np.ascontiguousarray(x, dtype=float) for x in (alpha, w)]
    grids = [np.ascontiguousarray(x, dtype=float) for x in (t1s, t2s, s1s, s2s)]
    out = implementation().fd2_grid(args[0], args[1], float(p_avg), float(p_peak), *grids)
    return tuple(float(x) for x in out)
