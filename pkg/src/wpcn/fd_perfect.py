"""Full-duplex WPCN with perfect self-interference cancellation.

With energies ``E_i = tau_i P_i`` the problem is jointly concave in
``(tau, E)``.  It is solved through its two-dimensional Lagrange dual
``G(lambda, mu)`` (time price and energy price) with the ellipsoid
method.  The primal allocation is recovered as a convex combination of
the inner maximizers visited near the dual optimum.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .ellipsoid import (EllipsoidState, best_combination, minimize_with_restarts,
                        mu_at_least, nonneg_lambda)
from .model import (LN2, Allocation, SolverResult, rates_fd_nosi, validate_allocation,
                    weighted_sum_rate)
from .scalar import Bracket, bisect, f_inverse_array


class ConvergenceError(RuntimeError):
    """The dual was not solved tightly enough to recover a feasible primal."""


@dataclass
class InnerIterate:
    tau_users: np.ndarray
    energy_users: np.ndarray
    lagrangian_value: float
    converged: bool


def _active(params):
    idx = np.flatnonzero(params.weights > 0.0)
    if idx.size == 0:
        raise ValueError("at least one weight must be positive")
    return idx


def _users_value(tau, energy, alpha, w, p_avg):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = tau * np.log1p(alpha * np.maximum(p_avg - energy, 0.0) / tau) / LN2
    return float(np.dot(w, np.where(tau > 0.0, r, 0.0)))


def _alternate(lam, mu, alpha, w, p_avg, p_peak, tol, max_iter):
    # literal block-coordinate sweeps between the closed-form tau and E updates
    k = alpha.size
    tau = np.full(k, 1.0 / (k + 1))
    energy = np.full(k, p_avg / (k + 1))
    z = f_inverse_array(lam * LN2 / w)
    for sweep in range(max_iter):
        with np.errstate(divide="ignore"):
            t_new = np.minimum(np.maximum(alpha / z * (p_avg - energy), 0.0), 1.0)
        e_new = np.minimum(np.maximum(p_avg + t_new / alpha - w * t_new / (mu * LN2), 0.0),
                           p_peak * t_new)
        change = max(np.max(np.abs(t_new - tau)), np.max(np.abs(e_new - energy)) / p_avg)
        tau, energy = t_new, e_new
        if change < tol:
            return tau, energy, True, sweep + 1
    return tau, energy, False, max_iter


def inner_iterate(lam, mu, params, channels, tol=1e-9, max_iter=500, method="profile"):
    """Maximizer of the Lagrangian over the user slots.

    ``method="profile"`` maximizes each user term exactly: for fixed
    ``tau_i`` the optimal energy is a clipped closed form, and the
    resulting one-dimensional concave profile in ``tau_i`` is bisected
    on its derivative.  ``method="alternate"`` runs the plain sweeps
    between the two closed-form updates instead; it can cycle when a
    slot sits on its peak-power line, so it is kept only for comparison.
    """
    if params.infinite_peak:
        raise ValueError("use solve_infinite_peak for an unbounded peak power")
    if not mu > 0.0:
        raise ValueError("the inner problem is unbounded for mu <= 0")
    if lam < 0.0:
        raise ValueError("lambda must be non-negative")
    idx = _active(params)
    alpha, w = channels.alpha[idx], params.weights[idx]
    if method == "profile":
        tau, energy = kernels.fd_profile(lam, mu, alpha, w, params.p_avg, params.p_peak)
        ok = True
    elif method == "alternate":
        tau, energy, ok, _ = _alternate(lam, mu, alpha, w, params.p_avg, params.p_peak,
                                        tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    value = _users_value(tau, energy, alpha, w, params.p_avg) - lam * tau.sum() + mu * energy.sum()
    tau_full = np.zeros(params.num_users)
    e_full = np.zeros(params.num_users)
    tau_full[idx], e_full[idx] = tau, energy
    return InnerIterate(tau_full, e_full, value, ok)


def inner_maximize(lam, mu, params, channels, tol=1e-9, max_iter=500, method="profile"):
    """Full ``(tau, E)`` maximizer including slot 0.

    Slot 0 is worth ``(mu p_peak - lambda) tau_0``: it runs the whole
    block at peak power when that is positive and stays empty otherwise
    (ties go to the empty slot).
    """
    it = inner_iterate(lam, mu, params, channels, tol, max_iter, method)
    if not it.converged:
        raise ConvergenceError("inner alternation did not settle")
    tau0 = 1.0 if mu * params.p_peak - lam > 0.0 else 0.0
    tau = np.concatenate([[tau0], it.tau_users])
    energy = np.concatenate([[params.p_peak * tau0], it.energy_users])
    return tau, energy


def dual_subgradient(tau, energy, params):
    """Subgradient ``(1 - sum tau, sum E - p_avg)`` of the dual function."""
    return np.array([1.0 - float(np.sum(tau)), float(np.sum(energy)) - params.p_avg])


def lagrangian(tau, energy, lam, mu, params, channels):
    alloc = Allocation.from_energy(tau, energy)
    wsr = weighted_sum_rate(rates_fd_nosi(alloc, params, channels, tol=math.inf), params.weights)
    return wsr - lam * (float(np.sum(tau)) - 1.0) + mu * (float(np.sum(energy)) - params.p_avg)


def dual_value(lam, mu, params, channels):
    tau, energy = inner_maximize(lam, mu, params, channels)
    return lagrangian(tau, energy, lam, mu, params, channels)


def dual_bounds(params, channels):
    """Box ``[0, lam_hi] x [0, mu_hi]`` known to hold the dual optimum.

    No allocation beats ``sum w log2(1 + alpha p_avg)``, which bounds the
    value of the whole block and hence the time price.  The energy price
    cannot exceed ``lambda / p_peak`` or slot 0 would take the block.
    """
    idx = _active(params)
    rmax = float(np.sum(params.weights[idx] * np.log2(1.0 + channels.alpha[idx] * params.p_avg)))
    return rmax, rmax / params.p_peak


def _result_from(tau, energy, params, channels, duals, iterations, converged, extra):
    alloc = Allocation.from_energy(tau, energy)
    rates = rates_fd_nosi(alloc, params, channels)
    residuals = validate_allocation(alloc, params)
    residuals.update(extra)
    return SolverResult(alloc, rates, weighted_sum_rate(rates, params.weights), duals,
                        iterations, converged, residuals)


def _recover(tau_u, e_u, e0, params, tol_time=1e-6):
    """Close the time and energy budgets, fixing tiny residuals.

    ``e0`` is the slot-0 energy chosen by the combination.  Slot 0 runs
    at peak power, so its time is ``e0 / p_peak``; the leftover of the
    time budget goes to the longest user slot and, when slot 0 stays
    empty, the leftover energy goes to the user with most peak headroom.
    """
    p_avg, p_peak = params.p_avg, params.p_peak
    tol_energy = 1e-6 * p_avg
    tau_u = np.clip(tau_u, 0.0, 1.0)
    e_u = np.clip(e_u, 0.0, np.minimum(p_peak * tau_u, p_avg))
    rest = p_avg - e_u.sum()
    if rest < -tol_energy:
        raise ConvergenceError(f"recovered E_0 = {rest:.3e} is negative")
    if e0 <= tol_energy and rest <= tol_energy:
        e0 = 0.0
        j = int(np.argmax(np.minimum(p_peak * tau_u, p_avg) - e_u)) if rest > 0.0 \
            else int(np.argmax(e_u))
        e_u[j] += rest
    else:
        e0 = max(rest, 0.0)
        if rest < 0.0:
            e_u[np.argmax(e_u)] += rest
    tau0 = e0 / p_peak
    gap = 1.0 - tau_u.sum() - tau0
    if gap < -tol_time:
        raise ConvergenceError(f"recovered tau_0 = {tau0 + gap:.3e} leaves no room")
    if gap > tol_time:
        # a genuine remainder of the block can only lower the slot-0 power
        tau0 += gap
    else:
        tau_u[np.argmax(tau_u)] += gap
    if np.any(e_u > p_peak * tau_u + 1e-7):
        raise ConvergenceError("recovered user slot exceeds the peak power")
    return np.concatenate([[tau0], tau_u]), np.concatenate([[e0], e_u])


def solve(params, channels, tol=1e-13, max_iter=300, window=30, method="profile"):
    """Optimal time and energy allocation under perfect SIC.

    Parameters
    ----------
    params : SystemParams
        ``si_gamma`` is ignored (treated as zero).
    channels : ChannelState
    tol : float
        Ellipsoid stopping tolerance on ``sqrt(g^T A g)``, relative to the
        rate bound ``sum w log2(1 + alpha p_avg)``.  Being relative, it
        keeps the solve equivariant under a common scaling of the weights.

    Returns
    -------
    SolverResult
        Energy-form allocation with ``sum(tau) = 1`` and
        ``sum(E) = p_avg``; duals are ``(lambda, mu)``.
    """
    if params.infinite_peak:
        return solve_infinite_peak(params, channels)
    lam_hi, mu_hi = dual_bounds(params, channels)
    mu_min = 1e-9 * mu_hi

    def oracle(x):
        tau, energy = inner_maximize(x[0], x[1], params, channels, method=method)
        value = lagrangian(tau, energy, x[0], x[1], params, channels)
        return value, dual_subgradient(tau, energy, params), (tau, energy)

    start = EllipsoidState.box([0.5 * lam_hi, 0.5 * mu_hi], [0.55 * lam_hi, 0.55 * mu_hi])
    res = minimize_with_restarts(oracle, start, (nonneg_lambda(), mu_at_least(mu_min)),
                                 tol * lam_hi, max_iter)
    pts = res.trace[-window:]
    values = [_users_value(p.payload[0][1:], p.payload[1][1:], channels.alpha,
                           params.weights, params.p_avg) for p in pts]
    cols = np.array([[p.payload[0][1:].sum(), p.payload[1][1:].sum()] for p in pts]).T
    w, slot0, resid = best_combination(values, cols, [1.0, params.p_avg],
                                       extra=[[1.0 / params.p_peak], [1.0]])
    tau_c = sum(wk * p.payload[0] for wk, p in zip(w, pts))
    e_c = sum(wk * p.payload[1] for wk, p in zip(w, pts))
    tau, energy = _recover(tau_c[1:].copy(), e_c[1:].copy(), float(slot0[0]), params)
    out = _result_from(tau, energy, params, channels, (float(res.x[0]), float(res.x[1])),
                       res.iterations, res.converged, {})
    out.residuals["dual_gap"] = res.value - out.wsr
    out.residuals["budget_residual"] = resid
    out.residuals["restarts"] = res.restarts
    return out


def solve_infinite_peak(params, channels, tol=1e-14):
    """Closed form for an unbounded peak power.

    All energy goes out as an impulse in slot 0 (``tau_0 = 0``,
    ``E_0 = p_avg``) and user ``i`` gets ``tau_i = alpha_i p_avg / z_i``
    where ``f(z_i) = lambda ln2 / w_i`` and ``lambda`` makes the times sum
    to one.
    """
    idx = _active(params)
    alpha, w, p_avg = channels.alpha[idx], params.weights[idx], params.p_avg

    def times(lam):
        return alpha * p_avg / f_inverse_array(lam * LN2 / w)

    excess = lambda lam: float(np.sum(times(lam))) - 1.0  # noqa: E731
    lo, hi = 1.0, 1.0
    while excess(lo) <= 0.0:
        lo *= 0.5
    while excess(hi) >= 0.0:
        hi *= 2.0
    lam = bisect(excess, Bracket.of(excess, lo, hi), tol=tol, max_iter=400)
    t = times(lam)
    t = t / t.sum()
    tau = np.zeros(params.num_users + 1)
    tau[1 + idx] = t
    energy = np.zeros(params.num_users + 1)
    energy[0] = p_avg
    return _result_from(tau, energy, params, channels, (lam, 0.0), 0, True, {})
