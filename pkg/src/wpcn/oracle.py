"""Brute-force grid maximizers used to check the solvers.

They are deliberately plain: an exhaustive lattice pass followed by one
10x zoom around the incumbent.  Ties go to the lexicographically
smallest lattice index.
"""

import numpy as np

from . import kernels
from .model import LN2, Allocation


def _zoom(center, step, lo=0.0, hi=1.0, factor=10):
    pts = center + step * np.arange(-factor, factor + 1) / factor
    return np.unique(np.clip(pts, lo, hi))


def grid_fd_nosi(params, channels, n=100, refine=True):
    """Best two-user perfect-SIC allocation on a lattice.

    Times ``(tau_1, tau_2)`` run over the simplex lattice and each user
    energy over ``s_i * min(p_peak tau_i, p_avg)`` with ``s_i`` on a
    uniform grid; slot 0 takes the remaining time and energy and points
    where it would exceed the peak are discarded.  Two extra ``E_2``
    candidates close the energy budget exactly (slot 0 silent or at
    peak), so optimal points on those faces are representable.

    Returns
    -------
    best : float
        Largest WSR found.
    point : Allocation
        Energy-form allocation attaining it.
    """
    if params.num_users != 2:
        raise ValueError("grid_fd_nosi handles exactly two users")
    if n < 10:
        raise ValueError("grid resolution must be at least 10")
    alpha, w = channels.alpha, params.weights
    p_avg, pk = params.p_avg, params.p_peak
    line = np.linspace(0.0, 1.0, n + 1)
    best, t1, t2, e1, e2 = kernels.fd2_grid(alpha, w, p_avg, pk, line, line, line, line)
    if refine:
        h = 1.0 / n
        cap1, cap2 = min(pk * t1, p_avg), min(pk * t2, p_avg)
        s1 = e1 / cap1 if cap1 > 0.0 else 0.0
        s2 = e2 / cap2 if cap2 > 0.0 else 0.0
        fine = kernels.fd2_grid(alpha, w, p_avg, pk, _zoom(t1, h), _zoom(t2, h),
                                _zoom(s1, h), _zoom(s2, h))
        if fine[0] > best:
            best, t1, t2, e1, e2 = fine
    tau = np.array([max(1.0 - t1 - t2, 0.0), t1, t2])
    energy = np.array([max(p_avg - e1 - e2, 0.0), e1, e2])
    return best, Allocation.from_energy(tau, energy)


def _hd_values(ts, alpha, w, p_avg, pk):
    # ts: (m, K+1) time vectors; returns WSR of each row
    e = np.minimum(p_avg, pk * ts[:, 0])
    tu = ts[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = tu * np.log1p(alpha[None, :] * e[:, None] / tu) / LN2
    r = np.where(tu > 0.0, r, 0.0)
    return r @ w


def _hd_lattice(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    free = np.stack([m.ravel() for m in mesh], axis=1)
    last = 1.0 - free.sum(axis=1)
    keep = last >= -1e-15
    return np.column_stack([free, np.maximum(last, 0.0)]), keep


def grid_hd(params, channels, n=100, refine=True):
    """Best half-duplex time split on a lattice with ``P = min(p_avg/tau_0, p_peak)``.

    The first ``K`` durations ``(tau_0, ..., tau_{K-1})`` are gridded and
    the last user takes the remaining time.

    Returns
    -------
    best : float
    point : Allocation
        Power-form allocation with the H-AP power in slot 0.
    """
    k = params.num_users
    if k > 3:
        raise ValueError("grid_hd handles at most three users")
    if n < 10:
        raise ValueError("grid resolution must be at least 10")
    alpha, w = channels.alpha, params.weights
    p_avg, pk = params.p_avg, params.p_peak
    line = np.linspace(0.0, 1.0, n + 1)
    ts, keep = _hd_lattice([line] * k)
    vals = np.where(keep, _hd_values(ts, alpha, w, p_avg, pk), -np.inf)
    i = int(np.argmax(vals))
    best, tau = float(vals[i]), ts[i]
    if refine:
        ts2, keep2 = _hd_lattice([_zoom(tau[j], 1.0 / n) for j in range(k)])
        vals2 = np.where(keep2, _hd_values(ts2, alpha, w, p_avg, pk), -np.inf)
        j = int(np.argmax(vals2))
        if vals2[j] > best:
            best, tau = float(vals2[j]), ts2[j]
    power = np.zeros(k + 1)
    if tau[0] > 0.0:
        power[0] = min(p_avg / tau[0], pk)
    return best, Allocation.from_power(tau, power)
