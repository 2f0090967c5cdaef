"""Backend selection for the hot numerical kernels.

Two interchangeable implementations exist for every kernel: compiled
loops (numba) and vectorized numpy.  The active one is chosen once from
the environment and can be switched at runtime with :func:`set_backend`.

Environment
-----------
WPCN_BACKEND
    ``numba`` or ``numpy``.  Unset means numba when it is importable.
WPCN_DISABLE_NUMBA
    Any non-empty value other than ``0`` forces the numpy backend.
"""

import importlib.util
import os

BACKENDS = ("numba", "numpy")


def numba_available():
    return importlib.util.find_spec("numba") is not None


def _from_env():
    flag = os.environ.get("WPCN_DISABLE_NUMBA", "").strip()
    if flag and flag != "0":
        return "numpy"
    name = os.environ.get("WPCN_BACKEND", "").strip().lower()
    if name:
        if name not in BACKENDS:
            raise ValueError(f"WPCN_BACKEND must be one of {BACKENDS}, got {name!r}")
        if name == "numba" and not numba_available():
            raise ImportError("WPCN_BACKEND=numba but numba is not installed")
        return name
    return "numba" if numba_available() else "numpy"


_active = _from_env()


def active_backend():
    """Name of the backend used by :mod:`wpcn.kernels`."""
    return _active


def set_backend(name):
    """Switch the kernel backend; returns the previous name."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not numba_available():
        raise ImportError("numba is not installed")
    previous, _active = _active, name
    return previous
