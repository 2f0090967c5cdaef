"""Domain types and rate formulas for full- and half-duplex WPCNs.

Slot 0 is the dedicated energy slot and slots ``1..K`` belong to the
users, so every time/energy/power vector has length ``K + 1``.  The block
length is normalized to one.  Units are whatever the caller uses for
power (dimensionless for the illustrative figures, mW for the physical
setup); the formulas are unit-agnostic.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

LN2 = math.log(2.0)
FEAS_TOL = 1e-9


def _frozen_array(x, length, name):
    arr = np.array(np.broadcast_to(np.asarray(x, dtype=float), (length,)), dtype=float)
    if arr.shape != (length,):
        raise ValueError(f"{name} must have length {length}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemParams:
    """System constants shared by every solver.

    Parameters
    ----------
    num_users : int
        Number of users K.
    p_avg, p_peak : float
        Average and peak H-AP power.  ``p_peak`` may be ``math.inf``.
    sigma2 : float
        Receiver noise power.
    gap : float
        SINR gap (linear, at least 1).
    theta : array_like
        Per-user end-to-end harvesting efficiency in ``(0, 1]``.
    weights : array_like
        Non-negative rate weights, at least one positive.
    si_gamma : float
        Effective self-interference coefficient; 0 means perfect SIC.
    """

    num_users: int
    p_avg: float
    p_peak: float
    sigma2: float = 1.0
    gap: float = 1.0
    theta: np.ndarray = field(default=1.0)
    weights: np.ndarray = field(default=1.0)
    si_gamma: float = 0.0

    def __post_init__(self):
        k = int(self.num_users)
        if k < 1:
            raise ValueError("num_users must be positive")
        object.__setattr__(self, "num_users", k)
        object.__setattr__(self, "theta", _frozen_array(self.theta, k, "theta"))
        object.__setattr__(self, "weights", _frozen_array(self.weights, k, "weights"))
        for name in ("p_avg", "p_peak", "sigma2", "gap", "si_gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.p_avg > 0.0 or math.isinf(self.p_avg):
            raise ValueError("p_avg must be positive and finite")
        if not self.p_peak >= self.p_avg:
            raise ValueError("p_peak must be at least p_avg")
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be positive")
        if not self.gap >= 1.0:
            raise ValueError("gap must be at least 1")
        if not self.si_gamma >= 0.0:
            raise ValueError("si_gamma must be non-negative")
        if np.any(self.theta <= 0.0) or np.any(self.theta > 1.0):
            raise ValueError("theta entries must lie in (0, 1]")
        if np.any(self.weights < 0.0) or not np.any(self.weights > 0.0):
            raise ValueError("weights must be non-negative with at least one positive")

    @property
    def infinite_peak(self):
        return math.isinf(self.p_peak)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelState:
    """Combined gains ``H_i`` and the normalized gains ``alpha_i``.

    Build it with :meth:`from_gains` (or :meth:`from_alpha`) so that
    ``alpha = theta * H / (gap * sigma2)`` always holds.
    """

    H: np.ndarray
    alpha: np.ndarray

    @classmethod
    def from_gains(cls, H, params):
        H = _frozen_array(H, params.num_users, "H")
        if np.any(H <= 0.0):
            raise ValueError("channel gains must be positive")
        alpha = params.theta * H / (params.gap * params.sigma2)
        alpha.setflags(write=False)
        return cls(H, alpha)

    @classmethod
    def from_alpha(cls, alpha, params):
        alpha = np.asarray(alpha, dtype=float)
        return cls.from_gains(alpha * params.gap * params.sigma2 / params.theta, params)

    def si_gain(self, power, params):
        """``theta H / (gap (gamma P + sigma2))`` for each user slot."""
        return self.alpha * params.sigma2 / (params.si_gamma * np.asarray(power) + params.sigma2)


@dataclass(frozen=True)
class Allocation:
    """Slot durations with either energies or powers as the master copy.

    ``form`` is ``"energy"`` or ``"power"``; the other representation is
    derived with ``P_i = E_i / tau_i`` (and ``P_i = 0`` when ``tau_i = 0``).
    An energy-form slot with ``tau_i = 0`` and ``E_i > 0`` is an impulse
    and reports infinite power.
    """

    tau: np.ndarray
    values: np.ndarray
    form: str = "energy"

    def __post_init__(self):
        if self.form not in ("energy", "power"):
            raise ValueError("form must be 'energy' or 'power'")
        tau = np.array(self.tau, dtype=float)
        values = np.array(self.values, dtype=float)
        if tau.ndim != 1 or tau.shape != values.shape or tau.size < 2:
            raise ValueError("tau and values must be matching vectors of length K+1")
        tau.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_energy(cls, tau, energy):
        return cls(tau, energy, "energy")

    @classmethod
    def from_power(cls, tau, power):
        return cls(tau, power, "power")

    @property
    def num_users(self):
        return self.tau.size - 1

    @property
    def energy(self):
        if self.form == "energy":
            return self.values
        return np.where(self.tau > 0.0, self.tau * self.values, 0.0)

    @property
    def power(self):
        if self.form == "power":
            return self.values
        with np.errstate(divide="ignore", invalid="ignore"):
            p = self.values / self.tau
        return np.where(self.tau > 0.0, p, np.where(self.values > 0.0, np.inf, 0.0))


@dataclass
class SolverResult:
    """Outcome of one solver run.

    ``duals`` holds ``(lambda, mu)`` for the full-duplex solvers and
    ``(nu,)`` or ``(lambda,)`` for half duplex.  ``history`` lists the
    accepted WSR values of iterative solvers.
    """

    allocation: Allocation
    rates: np.ndarray
    wsr: float
    duals: tuple = ()
    iterations: int = 0
    converged: bool = True
    residuals: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def effective_si(phi, eps, beta):
    """Residual self-interference coefficient ``phi * (eps + beta)``."""
    if phi < 0 or eps < 0 or beta < 0:
        raise ValueError("SI parameters must be non-negative")
    return phi * (eps + beta)


def _tlog(tau, snr_num):
    # tau * log2(1 + x / tau) with the tau = 0 limit set to 0
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = tau * np.log1p(np.asarray(snr_num, dtype=float) / tau) / LN2
    return np.where(tau > 0.0, r, 0.0)


def _check_user(i, k):
    if not 1 <= i <= k:
        raise IndexError(f"user index {i} outside 1..{k}")


def rates_fd(alloc, params, channels):
    """Per-user FD rates with residual SI, from the power-form allocation."""
    energy = alloc.energy
    power = alloc.power[1:]
    others = energy.sum() - energy[1:]
    gain = channels.si_gain(np.where(np.isfinite(power), power, 0.0), params)
    return _tlog(alloc.tau[1:], gain * others)


def rate_fd(i, alloc, params, channels):
    _check_user(i, params.num_users)
    return float(rates_fd(alloc, params, channels)[i - 1])


def rates_fd_nosi(alloc, params, channels, tol=FEAS_TOL):
    """Per-user FD rates without SI; the budget ``sum(E) = p_avg`` is assumed."""
    e = alloc.energy[1:]
    if np.any(e > params.p_avg + tol):
        raise ValueError("user slot energy exceeds p_avg")
    return _tlog(alloc.tau[1:], channels.alpha * np.maximum(params.p_avg - e, 0.0))


def rate_fd_nosi(i, alloc, params, channels):
    _check_user(i, params.num_users)
    return float(rates_fd_nosi(alloc, params, channels)[i - 1])


def rates_fd_si(tau, power, params, channels, tol=FEAS_TOL):
    """Per-user rates when the whole budget ``p_avg`` is spent.

    ``tau`` and ``power`` are user-slot vectors (length K).
    """
    tau = np.asarray(tau, dtype=float)
    power = np.asarray(power, dtype=float)
    own = tau * power
    if np.any(own > params.p_avg * (1.0 + tol) + tol):
        raise ValueError("tau_i * P_i exceeds p_avg")
    gain = channels.si_gain(power, params)
    return _tlog(tau, gain * np.maximum(params.p_avg - own, 0.0))


def rate_fd_si(i, tau_i, p_i, params, channels):
    _check_user(i, params.num_users)
    if tau_i * p_i > params.p_avg * (1.0 + FEAS_TOL) + FEAS_TOL:
        raise ValueError("tau_i * P_i exceeds p_avg")
    gain = channels.alpha[i - 1] * params.sigma2 / (params.si_gamma * p_i + params.sigma2)
    return float(_tlog(tau_i, gain * max(params.p_avg - tau_i * p_i, 0.0)))


def rate_fd_si_curvature(tau_i, p_i, i, params, channels):
    """Second derivative of the SI rate in ``tau_i`` at fixed ``P_i``."""
    c = channels.alpha[i - 1] * params.sigma2 / (params.si_gamma * p_i + params.sigma2)
    s = tau_i + c * (params.p_avg - p_i * tau_i)
    return -(c * params.p_avg) ** 2 / (tau_i * s * s * LN2)


def rates_hd(tau, dl_energy, channels):
    """Harvest-then-transmit rates given the DL energy ``tau_0 * P``."""
    tau = np.asarray(tau, dtype=float)
    return _tlog(tau[1:], channels.alpha * dl_energy)


def rate_hd(i, tau, p, params, channels):
    _check_user(i, params.num_users)
    if p < 0:
        raise ValueError("DL power must be non-negative")
    tau = np.asarray(tau, dtype=float)
    return float(rates_hd(tau, tau[0] * p, channels)[i - 1])


def weighted_sum_rate(rates, weights):
    rates = np.asarray(rates, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if rates.shape != weights.shape:
        raise ValueError("rates and weights must have equal length")
    return float(rates @ weights)


def validate_allocation(alloc, params):
    """Constraint violations of an FD allocation (all zero when feasible).

    Keys: ``sum_time``, ``sum_energy``, ``peak``, ``negativity``,
    ``slot_time`` (a duration above one).
    """
    tau, energy = alloc.tau, alloc.energy
    if params.infinite_peak:
        peak = 0.0
    else:
        peak = float(np.max(energy - params.p_peak * tau))
    return {
        "sum_time": max(0.0, float(tau.sum()) - 1.0),
        "sum_energy": max(0.0, float(energy.sum()) - params.p_avg),
        "peak": max(0.0, peak),
        "negativity": max(0.0, -float(min(tau.min(), energy.min()))),
        "slot_time": max(0.0, float(tau.max()) - 1.0),
    }
