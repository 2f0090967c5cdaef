"""Full-duplex WPCN with residual self-interference.

The SI term couples each user's rate to the H-AP power in its own slot,
and the problem is no longer jointly concave.  A local optimum is found
by alternating two steps from the perfect-SIC solution:

1. with the powers fixed, the optimal times solve a concave problem whose
   two-price dual is minimized with the ellipsoid method;
2. with the times fixed, one projected-gradient step moves the powers,
   with a backtracking step size that never lowers the WSR.

Throughout, the whole budget is spent (``sum tau_i P_i = p_avg``) and the
energy slot 0 stays empty, so ``tau_0 = P_0 = 0``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fd_perfect
from .ellipsoid import (EllipsoidState, InfeasiblePoint, best_combination,
                        minimize_with_restarts, nonneg_lambda)
from .model import LN2, Allocation, SolverResult, rates_fd, rates_fd_si, weighted_sum_rate
from .scalar import fbar_inverse_array


class SubproblemInfeasible(RuntimeError):
    """No time split spends the budget with the current powers."""


@dataclass
class SiIterate:
    k: int
    tau: np.ndarray
    power: np.ndarray
    wsr: float


@dataclass
class StepConfig:
    """Step-size and stopping rules of the alternating optimizer.

    The power step starts at ``s = initial_fraction * p_peak / (|q| + eps)``
    and is halved up to ``max_halvings`` times until the WSR improves.
    """

    initial_fraction: float = 0.1
    max_halvings: int = 20
    delta: float = 1.0
    eps: float = 1e-12
    tol_wsr: float = 1e-8
    max_outer: int = 200
    subproblem_tol: float = 1e-9
    window: int = 30


@dataclass
class TimeSolution:
    tau: np.ndarray
    duals: tuple
    iterations: int
    converged: bool
    info: dict = field(default_factory=dict)


def _user_power(power, k):
    power = np.asarray(power, dtype=float)
    return power[1:] if power.size == k + 1 else power


def time_update(p_prev, lam, mu, params, channels):
    """Maximizer of the time-subproblem Lagrangian at the prices ``(lam, mu)``.

    Parameters
    ----------
    p_prev : array_like
        Slot powers, length ``K + 1`` (slot 0 ignored) or ``K``.

    Returns
    -------
    ndarray
        ``K + 1`` times with ``tau_0 = 0``.

    Raises
    ------
    InfeasiblePoint
        If ``lam + P_i mu`` is so negative for some user that its
        stationarity condition has no root; the exception's normal is the
        cut ``-(1, P_i)``.
    """
    k = params.num_users
    p = _user_power(p_prev, k)
    tau = np.zeros(k + 1)
    idx = np.flatnonzero(params.weights > 0.0)
    c_gain = channels.si_gain(p[idx], params)
    a = c_gain * p[idx]
    rhs = (lam + p[idx] * mu) * LN2 / params.weights[idx]
    z = fbar_inverse_array(rhs, a)
    bad = np.isnan(z)
    if np.any(bad):
        worst = idx[bad][np.argmax((-a - rhs)[bad])]
        raise InfeasiblePoint((-1.0, -p[worst]))
    tau[1 + idx] = c_gain * params.p_avg / (z + a)
    return tau


def _subproblem_value(tau_u, p, params, channels):
    return weighted_sum_rate(rates_fd_si(tau_u, p, params, channels, tol=math.inf),
                             params.weights)


def _time_bounds(p, params, channels):
    idx = params.weights > 0.0
    gain = channels.si_gain(p, params)
    return float(np.sum(params.weights[idx] * np.log2(1.0 + gain[idx] * params.p_avg)))


def solve_time_subproblem(p_prev, params, channels, tol=1e-9, warm=None, window=30,
                          max_iter=300):
    """Optimal times for fixed powers with ``sum tau <= 1`` and ``sum P tau = p_avg``.

    ``warm`` is an optional ``(lambda, mu)`` guess used to centre the
    starting ellipsoid; the budget multiplier ``mu`` has free sign.  The
    stopping tolerance ``tol`` is relative to the rate bound of the block.

    Returns
    -------
    TimeSolution
    """
    k = params.num_users
    p = _user_power(p_prev, k).copy()
    active = params.weights > 0.0
    if not np.any(active & (p > params.p_avg)) and not np.any(active & np.isclose(p, params.p_avg)):
        raise SubproblemInfeasible("no active slot power reaches p_avg")
    rmax = _time_bounds(p, params, channels)

    def oracle(x):
        tau = time_update(p, x[0], x[1], params, channels)
        tu = tau[1:]
        spent = float(tu @ p)
        value = _subproblem_value(tu, p, params, channels)
        value += -x[0] * (tu.sum() - 1.0) - x[1] * (spent - params.p_avg)
        return value, np.array([1.0 - tu.sum(), params.p_avg - spent]), tau

    p_ref = max(float(p[active].max()), params.p_avg)
    if warm is None:
        start = EllipsoidState.box([0.5 * rmax, 0.0], [0.6 * rmax, rmax / params.p_avg])
    else:
        lam0, mu0 = float(warm[0]), float(warm[1])
        half = [max(abs(lam0), 1e-3 * rmax), max(abs(mu0), 1e-3 * rmax / p_ref)]
        start = EllipsoidState.box([max(lam0, 0.0), mu0], half)
    res = minimize_with_restarts(oracle, start, (nonneg_lambda(),), tol * rmax, max_iter)
    pts = res.trace[-window:]
    values = [_subproblem_value(q.payload[1:], p, params, channels) for q in pts]
    cols = np.array([[q.payload[1:].sum(), float(q.payload[1:] @ p)] for q in pts]).T
    w, _, resid = best_combination(values, cols, [1.0, params.p_avg], extra=[[1.0], [0.0]])
    tau = sum(wk * q.payload for wk, q in zip(w, pts))
    spent = float(tau[1:] @ p)
    if spent <= 0.0:
        raise SubproblemInfeasible("recovered times spend no energy")
    tau = tau * (params.p_avg / spent)
    if tau.sum() > 1.0 + 1e-6:
        raise SubproblemInfeasible(f"recovered times overfill the block ({tau.sum():.9f})")
    if tau.sum() > 1.0:
        tau[1:] *= 1.0 / tau.sum()
    info = {"budget_residual": resid, "dual_value": res.value, "restarts": res.restarts}
    return TimeSolution(tau, (float(res.x[0]), float(res.x[1])), res.iterations,
                        res.converged, info)


def power_gradient(tau, power, params, channels):
    """Gradient of the WSR in the user-slot powers at fixed times.

    The budget is spent in full, so slot ``i`` only affects its own user:
    raising ``P_i`` takes energy away from the other slots and adds SI.
    """
    k = params.num_users
    t = np.asarray(tau, dtype=float)[1:]
    p = _user_power(power, k)
    g, s2 = params.si_gamma, params.sigma2
    amp = channels.alpha * s2
    noise = g * p + s2
    left = params.p_avg - t * p
    num = amp * (t * noise + g * left)
    den = noise * (t * noise + amp * left)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = -(params.weights * t / LN2) * num / den
    return np.where((t > 0.0) & (params.weights > 0.0), q, 0.0)


def project_power(candidate, tau, params, tol=1e-12):
    """Euclidean projection onto ``{P : sum tau_i P_i = p_avg, 0 <= P <= p_peak}``.

    The solution is ``clip(x + eta tau, 0, p_peak)``; ``eta`` is bracketed
    by bisection and then solved exactly on the final active set.
    """
    x = np.asarray(candidate, dtype=float)
    t = np.asarray(tau, dtype=float)
    t = t[1:] if t.size == x.size + 1 else t
    pk = params.p_peak
    if float(t.sum()) * pk < params.p_avg * (1.0 - 1e-12):
        raise ValueError("the times cannot carry p_avg at peak power")

    def spend(eta):
        return float(t @ np.clip(x + eta * t, 0.0, pk))

    pos = t > 0.0
    if not np.any(pos):
        raise ValueError("all slot times are zero")
    lo = float(np.min(-x[pos] / t[pos])) - 1.0
    hi = float(np.max((pk - x[pos]) / t[pos])) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spend(mid) < params.p_avg:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    eta = 0.5 * (lo + hi)
    y = x + eta * t
    free = pos & (y > 0.0) & (y < pk)
    if np.any(free):
        fixed = float(t[~free] @ np.clip(y[~free], 0.0, pk))
        eta_exact = (params.p_avg - fixed - float(t[free] @ x[free])) / float(t[free] @ t[free])
        y2 = x + eta_exact * t
        if np.all((y2[free] >= -tol) & (y2[free] <= pk + tol)):
            eta = eta_exact
    return np.clip(x + eta * t, 0.0, pk)


def _wsr(tau, power, params, channels):
    return weighted_sum_rate(rates_fd_si(tau[1:], power[1:], params, channels), params.weights)


def _general_wsr(tau, power, params, channels):
    alloc = Allocation.from_power(tau, power)
    return weighted_sum_rate(rates_fd(alloc, params, channels), params.weights)


def solve(params, channels, init=None, step=None):
    """Locally optimal allocation with residual SI.

    Parameters
    ----------
    params : SystemParams
        ``si_gamma`` sets the residual SI.
    channels : ChannelState
    init : SolverResult, optional
        Perfect-SIC solution to start from; computed when omitted.
    step : StepConfig, optional

    Returns
    -------
    SolverResult
        Power-form allocation of the best iterate; ``history`` holds the
        WSR of every accepted iterate (non-decreasing).
    """
    step = step or StepConfig()
    k = params.num_users
    if init is None:
        init = fd_perfect.solve(params, channels)
    tau = np.array(init.allocation.tau, dtype=float)
    power = np.array(init.allocation.power, dtype=float)
    if not np.all(np.isfinite(power)):
        raise ValueError("the initial point needs finite slot powers")
    w0 = _general_wsr(tau, power, params, channels)
    best = SiIterate(0, tau, power, w0)
    history = [w0]
    last = w0
    duals = (float(init.duals[0]), -float(init.duals[1])) if len(init.duals) == 2 else None
    outer = 0
    stop = "converged"
    pk = params.p_peak
    for outer in range(1, step.max_outer + 1):
        try:
            ts = solve_time_subproblem(power, params, channels, step.subproblem_tol,
                                       warm=duals, window=step.window)
        except SubproblemInfeasible:
            stop = "subproblem infeasible"
            break
        duals = ts.duals
        tau = ts.tau
        power = power.copy()
        power[0] = 0.0
        base = _wsr(tau, power, params, channels)
        q = np.r_[0.0, power_gradient(tau, power, params, channels)]
        s = step.initial_fraction * pk / (float(np.linalg.norm(q)) + step.eps)
        new_power, new_w = power, base
        for _ in range(step.max_halvings + 1):
            proj = project_power(power[1:] + s * q[1:], tau, params)
            cand = power.copy()
            cand[1:] += step.delta * (proj - power[1:])
            w_c = _wsr(tau, cand, params, channels)
            if w_c > base:
                new_power, new_w = cand, w_c
                break
            s *= 0.5
        power = new_power
        if new_w > best.wsr:
            best = SiIterate(outer, tau.copy(), power.copy(), new_w)
        if new_w > last:
            history.append(new_w)
        if new_w <= last + step.tol_wsr:
            break
        last = new_w
    else:
        stop = "iteration limit"
    alloc = Allocation.from_power(best.tau, best.power)
    rates = rates_fd(alloc, params, channels)
    spent = float(best.tau @ np.where(np.isfinite(best.power), best.power, 0.0))
    residuals = {
        "sum_time": max(0.0, float(best.tau.sum()) - 1.0),
        "budget": abs(spent - params.p_avg),
        "peak": max(0.0, float(np.max(best.power)) - pk),
        "stop": stop,
        "best_iterate": best.k,
    }
    return SolverResult(alloc, rates, weighted_sum_rate(rates, params.weights),
                        duals or (), outer, stop != "iteration limit", residuals, history)
