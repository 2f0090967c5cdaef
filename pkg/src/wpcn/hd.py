"""Half-duplex harvest-then-transmit baseline.

The H-AP broadcasts in slot 0 at power ``P`` and then listens while the
users transmit in turn.  The optimal power is always the peak; what
remains is a time split, solved in closed form up to one scalar price.
"""

import numpy as np

from .model import LN2, Allocation, SolverResult, rates_hd, weighted_sum_rate
from .scalar import Bracket, bisect, f_inverse_array


def _active(params):
    idx = np.flatnonzero(params.weights > 0.0)
    if idx.size == 0:
        raise ValueError("at least one weight must be positive")
    return idx


def _root(fn, tol, start=1.0):
    """Root of a decreasing function on ``(0, inf)`` by bracketing then bisection."""
    lo = hi = start
    while fn(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ArithmeticError("price bracket collapsed toward zero")
    while fn(hi) >= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("price bracket diverged")
    if lo == hi:
        lo = 0.5 * hi
    return bisect(fn, Bracket.of(fn, lo, hi), tol=tol, max_iter=400)


def solve_p6(params, channels, tol=1e-14):
    """Optimal time split at a fixed DL power ``p_peak``.

    Returns
    -------
    tau : ndarray
        ``K + 1`` durations summing to one.
    nu : float
        Price of time, the root of
        ``sum w_i alpha_i / (1 + z_i(nu)) = nu ln2 / p_peak`` with
        ``f(z_i) = nu ln2 / w_i``.
    """
    if params.infinite_peak:
        raise ValueError("solve_p6 needs a finite peak power")
    idx = _active(params)
    alpha, w, pk = channels.alpha[idx], params.weights[idx], params.p_peak

    def condition(nu):
        z = f_inverse_array(nu * LN2 / w)
        return float(np.sum(w * alpha / (1.0 + z))) - nu * LN2 / pk

    nu = _root(condition, tol)
    z = f_inverse_array(nu * LN2 / w)
    share = pk * alpha / z
    tau = np.zeros(params.num_users + 1)
    tau[0] = 1.0 / (1.0 + share.sum())
    tau[1 + idx] = share * tau[0]
    return tau, nu


def solve_energy_limited(params, channels, tol=1e-14):
    """Allocation when the average budget binds: ``tau_0 = p_avg / p_peak``.

    The user times are ``p_avg alpha_i / z_i`` with a common price
    ``lambda`` such that ``sum alpha_i / z_i = 1/p_avg - 1/p_peak``.
    """
    idx = _active(params)
    alpha, w = channels.alpha[idx], params.weights[idx]
    target = 1.0 / params.p_avg - 1.0 / params.p_peak
    if not target > 0.0:
        raise ValueError("p_peak must exceed p_avg for an energy-limited split")

    def excess(lam):
        return float(np.sum(alpha / f_inverse_array(lam * LN2 / w))) / target - 1.0

    lam = _root(excess, tol)
    tau = np.zeros(params.num_users + 1)
    tau[0] = 0.0 if params.infinite_peak else params.p_avg / params.p_peak
    tau[1 + idx] = params.p_avg * alpha / f_inverse_array(lam * LN2 / w)
    # remove the last rounding so that the block is exactly filled
    tau[1 + idx] *= (1.0 - tau[0]) / tau[1 + idx].sum()
    return tau, lam


def solve(params, channels, tol=1e-14):
    """Optimal HD allocation; the DL power is ``p_peak`` on every instance.

    With an unbounded peak the energy slot shrinks to an impulse that
    carries ``p_avg``; the allocation is then returned in energy form.
    """
    if params.infinite_peak:
        tau, lam = solve_energy_limited(params, channels, tol)
        alloc = Allocation.from_energy(tau, np.r_[params.p_avg, np.zeros(params.num_users)])
        rates = rates_hd(tau, params.p_avg, channels)
        idx = _active(params)
        z = f_inverse_array(lam * LN2 / params.weights[idx])
        target = float(np.sum(channels.alpha[idx] / z))
        residuals = {"branch": 2, "condition": abs(target * params.p_avg - 1.0)}
        return SolverResult(alloc, rates, weighted_sum_rate(rates, params.weights),
                            (lam,), 0, True, residuals)
    tau, nu = solve_p6(params, channels, tol)
    duals = (nu,)
    branch = 1
    if tau[0] > params.p_avg / params.p_peak:
        tau, lam = solve_energy_limited(params, channels, tol)
        duals = (lam,)
        branch = 2
    power = np.zeros(params.num_users + 1)
    power[0] = params.p_peak
    alloc = Allocation.from_power(tau, power)
    energy = tau[0] * params.p_peak
    rates = rates_hd(tau, energy, channels)
    residuals = {
        "branch": branch,
        "sum_time": abs(float(tau.sum()) - 1.0),
        "energy": max(0.0, energy - params.p_avg),
        "condition": _condition_residual(tau, duals[0], branch, params, channels),
    }
    return SolverResult(alloc, rates, weighted_sum_rate(rates, params.weights), duals,
                        0, True, residuals)


def _condition_residual(tau, price, branch, params, channels):
    idx = _active(params)
    alpha, w = channels.alpha[idx], params.weights[idx]
    z = f_inverse_array(price * LN2 / w)
    if branch == 1:
        lhs = float(np.sum(w * alpha / (1.0 + z)))
        return abs(lhs - price * LN2 / params.p_peak) / max(lhs, 1e-300)
    target = 1.0 / params.p_avg - 1.0 / params.p_peak
    return abs(float(np.sum(alpha / z)) - target) / target


def is_energy_limited(params, channels):
    """True when the peak-power split would overspend the average budget."""
    tau, _ = solve_p6(params, channels)
    return bool(tau[0] > params.p_avg / params.p_peak)

