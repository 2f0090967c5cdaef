"""Stochastic scenarios: channel draws, rate regions and Monte Carlo curves.

Channel draws are keyed by ``(seed, realization, stream)`` so every
realization can be regenerated on its own, in any order and in any
process.  Within a stream draws are taken user by user, so the first
``K`` users of a ``K'``-user draw (``K' > K``) coincide with the
``K``-user draw.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import fd_perfect, fd_si, hd
from .model import ChannelState, SystemParams, effective_si

MODES = ("fd-perfect", "fd-si", "hd")
CHANNEL_MODELS = ("pathloss", "rayleigh")
MIN_SUCCESS = 0.95

# RNG stream tags
_DISTANCE, _DOWNLINK, _UPLINK = 0, 1, 2


def dbm_to_mw(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical setup of a simulation run.

    Powers are in mW and ``noise_psd`` in mW/Hz.  With
    ``channel_model="rayleigh"`` the gains are plain products of two
    unit-mean exponentials (no pathloss), which together with
    ``noise_psd * bandwidth = 1`` gives the normalized setup.  ``gains``
    fixes the combined channel gains instead of drawing them.

    The ``sweep_*`` fields list the values scanned by :func:`monte_carlo_sweep`;
    ``peak_ratio`` (when set) ties ``p_peak`` to ``p_avg`` during sweeps.
    """

    num_users: int = 10
    d_min: float = 5.0
    d_max: float = 10.0
    alpha_d: float = 2.0
    alpha_u: float = 2.0
    atten_ref: float = 1e-3
    bandwidth: float = 1e6
    noise_psd: float = 1e-16
    theta: float = 0.5
    gap: float = 10.0 ** 0.98
    phi: float = 1e-6
    eps: float = 1e-6
    beta: float = 1e-6
    p_avg: float = 100.0
    p_peak: float = 200.0
    seed: int = 0
    realizations: int = 200
    channel_model: str = "pathloss"
    sort_channels: bool = False
    gains: tuple = None
    weights: tuple = None
    peak_ratio: float = None
    modes: tuple = MODES
    rate_region_points: int = 21
    sweep_p_avg_dbm: tuple = ()
    sweep_num_users: tuple = ()
    sweep_peak_ratio: tuple = ()
    sweep_phi_db: tuple = ()

    def __post_init__(self):
        if int(self.num_users) < 1:
            raise ValueError("num_users must be positive")
        if not 0.0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        if int(self.realizations) < 1:
            raise ValueError("realizations must be at least 1")
        for name in ("alpha_d", "alpha_u", "atten_ref", "bandwidth", "noise_psd", "theta",
                     "gap", "p_avg", "p_peak"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.p_peak >= self.p_avg:
            raise ValueError("p_peak must be at least p_avg")
        for name in ("phi", "eps", "beta"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"channel_model must be one of {CHANNEL_MODELS}")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown mode(s) {bad}; choose from {MODES}")
        if self.gains is not None and len(self.gains) != self.num_users:
            raise ValueError("gains must list one value per user")
        if self.weights is not None and len(self.weights) != self.num_users:
            raise ValueError("weights must list one value per user")
        if self.peak_ratio is not None and not self.peak_ratio >= 1.0:
            raise ValueError("peak_ratio must be at least 1")
        if int(self.rate_region_points) < 2:
            raise ValueError("rate_region_points must be at least 2")

    @property
    def sigma2(self):
        return self.noise_psd * self.bandwidth

    @property
    def si_gamma(self):
        return effective_si(self.phi, self.eps, self.beta)

    def with_p_avg(self, p_avg):
        """Copy at a new budget, keeping ``p_peak / p_avg`` when ``peak_ratio`` is set."""
        p_peak = self.p_peak if self.peak_ratio is None else self.peak_ratio * p_avg
        return replace(self, p_avg=float(p_avg), p_peak=max(float(p_peak), float(p_avg)))

    def system_params(self, weights=None, perfect_sic=False):
        w = weights if weights is not None else (self.weights if self.weights is not None else 1.0)
        return SystemParams(int(self.num_users), self.p_avg, self.p_peak, sigma2=self.sigma2,
                            gap=self.gap, theta=self.theta, weights=w,
                            si_gamma=0.0 if perfect_sic else self.si_gamma)


def config_fields():
    return {f.name: f for f in fields(ScenarioConfig)}


def _stream(config, realization, tag):
    ss = np.random.SeedSequence(int(config.seed), spawn_key=(int(realization), tag))
    return np.random.default_rng(ss)


def draw_gains(config, realization):
    """Combined gains ``H_i = |h_D,i|^2 |h_U,i|^2`` of one realization."""
    k = int(config.num_users)
    if config.gains is not None:
        h = np.asarray(config.gains, dtype=float)
    else:
        rho_d = _stream(config, realization, _DOWNLINK).standard_exponential(k)
        rho_u = _stream(config, realization, _UPLINK).standard_exponential(k)
        if config.channel_model == "rayleigh":
            h = rho_d * rho_u
        else:
            d = _stream(config, realization, _DISTANCE).uniform(config.d_min, config.d_max, k)
            h_d = config.atten_ref * rho_d * d ** (-config.alpha_d)
            h_u = config.atten_ref * rho_u * d ** (-config.alpha_u)
            h = h_d * h_u
    if config.sort_channels:
        h = np.sort(h)
    return h


def draw_channels(config, realization=0):
    """Channel state of one realization, fully determined by ``(seed, realization)``."""
    return ChannelState.from_gains(draw_gains(config, realization), config.system_params())


def solve_mode(mode, params, channels, init=None):
    """Dispatch one solve; ``init`` is an optional perfect-SIC result for ``fd-si``."""
    if mode == "fd-perfect":
        return fd_perfect.solve(params.replace(si_gamma=0.0), channels)
    if mode == "hd":
        return hd.solve(params, channels)
    if mode == "fd-si":
        return fd_si.solve(params, channels, init=init)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class RateRegionPoint:
    w1: float
    r1: float
    r2: float


def rate_region(params, channels, mode, m=21):
    """Per-user rates of the WSR maximizers for ``omega = (w, 1 - w)``.

    Returns
    -------
    list of RateRegionPoint
        ``m`` points sorted by ``w``.
    """
    if params.num_users != 2:
        raise ValueError("rate regions are drawn for two users")
    points = []
    for w in np.linspace(0.0, 1.0, int(m)):
        p = params.replace(weights=np.array([w, 1.0 - w]))
        try:
            res = solve_mode(mode, p, channels)
        except Exception as exc:
            raise RuntimeError(f"{mode} solve failed at w1={w:.9g}: {exc}") from exc
        rates = np.maximum(res.rates, 0.0)
        points.append(RateRegionPoint(float(w), float(rates[0]), float(rates[1])))
    return points


def pareto_filter(points):
    """Drop points weakly dominated by another point with a strictly larger rate."""
    keep = []
    for p in points:
        dominated = any(q.r1 >= p.r1 and q.r2 >= p.r2 and (q.r1 > p.r1 or q.r2 > p.r2)
                        for q in points)
        if not dominated:
            keep.append(p)
    return keep


@dataclass(frozen=True)
class MonteCarloRow:
    p_avg_dbm: float
    mode: str
    mean: float
    stderr: float
    realizations: int
    failures: int
    extra: dict = field(default_factory=dict)


def realization_sumrates(config, realization, modes, p_avg_dbm):
    """Sum-rates of one channel draw, shape ``(len(p_avg_dbm), len(modes))``.

    The draw is shared by every budget and mode.  The perfect-SIC solution
    doubles as the starting point of the SI solver.  Failed solves give NaN.
    """
    h = draw_gains(config, realization)
    out = np.full((len(p_avg_dbm), len(modes)), np.nan)
    for j, x in enumerate(p_avg_dbm):
        cfg = config.with_p_avg(float(dbm_to_mw(x)))
        params = cfg.system_params(weights=1.0)
        ch = ChannelState.from_gains(h, params)
        init = None
        if "fd-perfect" in modes or "fd-si" in modes:
            try:
                init = solve_mode("fd-perfect", params, ch)
            except Exception:
                init = None
        for i, mode in enumerate(modes):
            try:
                if mode == "fd-perfect":
                    res = init
                elif mode == "fd-si":
                    res = solve_mode(mode, params, ch, init) if init is not None else None
                else:
                    res = solve_mode(mode, params, ch)
            except Exception:
                res = None
            if res is not None and np.isfinite(res.wsr):
                out[j, i] = res.wsr
    return out


def _chunk(args):
    config, indices, modes, p_avg_dbm = args
    return [realization_sumrates(config, r, modes, p_avg_dbm) for r in indices]


def worker_count():
    """Process count from ``WPCN_THREADS`` (0 or unset means all cores)."""
    raw = os.environ.get("WPCN_THREADS", "").strip()
    n = int(raw) if raw else 0
    if n < 0:
        raise ValueError("WPCN_THREADS must be non-negative")
    return n if n > 0 else (os.cpu_count() or 1)


def _all_sumrates(config, modes, p_avg_dbm, workers):
    n = int(config.realizations)
    if workers <= 1 or n < 2:
        return np.stack([realization_sumrates(config, r, modes, p_avg_dbm) for r in range(n)])
    blocks = np.array_split(np.arange(n), min(workers * 4, n))
    jobs = [(config, [int(i) for i in b], modes, p_avg_dbm) for b in blocks if b.size]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk, jobs))
    return np.stack([a for part in parts for a in part])


def summarize(values):
    """Mean and standard error of the finite entries."""
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        return math.nan, math.nan, 0
    se = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
    return float(np.mean(ok)), se, int(ok.size)


def monte_carlo(config, modes=None, p_avg_dbm=None, workers=None, extra=None):
    """Average sum-rate (equal weights) over ``config.realizations`` paired draws.

    Returns
    -------
    list of MonteCarloRow
        Ordered by budget, then by mode.  A (budget, mode) cell is left out
        when fewer than 95% of its realizations solved.
    """
    modes = tuple(modes or config.modes)
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ValueError(f"unknown mode(s) {bad}")
    sweep = tuple(p_avg_dbm if p_avg_dbm is not None else config.sweep_p_avg_dbm)
    if not sweep:
        sweep = (10.0 * math.log10(config.p_avg),)
    workers = worker_count() if workers is None else int(workers)
    vals = _all_sumrates(config, modes, sweep, workers)
    n = int(config.realizations)
    rows = []
    for j, x in enumerate(sweep):
        for i, mode in enumerate(modes):
            mean, se, count = summarize(vals[:, j, i])
            if count >= MIN_SUCCESS * n:
                rows.append(MonteCarloRow(float(x), mode, mean, se, count, n - count,
                                          dict(extra or {})))
    return rows


def sweep_axes(config):
    """Outer sweep variables of a configuration, each as ``(name, values)``."""
    axes = []
    if config.sweep_num_users:
        axes.append(("num_users", tuple(int(v) for v in config.sweep_num_users)))
    if config.sweep_peak_ratio:
        axes.append(("peak_ratio", tuple(float(v) for v in config.sweep_peak_ratio)))
    if config.sweep_phi_db:
        axes.append(("phi_db", tuple(float(v) for v in config.sweep_phi_db)))
    return axes


def monte_carlo_sweep(config, modes=None, workers=None):
    """:func:`monte_carlo` over the Cartesian product of the outer sweeps.

    The same seed is used everywhere, so draws stay paired across the
    outer variables as well.  Each row's ``extra`` records the outer values.
    """
    axes = sweep_axes(config)
    combos = [()]
    for _, values in axes:
        combos = [c + (v,) for c in combos for v in values]
    rows = []
    for combo in combos:
        changes, extra = {}, {}
        for (name, _), v in zip(axes, combo):
            extra[name] = v
            if name == "phi_db":
                changes["phi"] = float(db_to_linear(v))
            else:
                changes[name] = v
        cfg = replace(config, **changes)
        if "peak_ratio" in changes:
            cfg = cfg.with_p_avg(cfg.p_avg)
        rows.extend(monte_carlo(cfg, modes, workers=workers, extra=extra))
    return rows


def oracle_config(seed=0):
    """Two-user normalized setup used for the grid-oracle comparisons."""
    return ScenarioConfig(num_users=2, channel_model="rayleigh", noise_psd=1.0, bandwidth=1.0,
                          gap=1.0, theta=1.0, p_avg=100.0, p_peak=200.0, seed=seed,
                          realizations=1)


@dataclass(frozen=True)
class OracleCheck:
    instance: int
    mode: str
    solver_wsr: float
    oracle_wsr: float

    @property
    def difference(self):
        return self.solver_wsr - self.oracle_wsr


def oracle_comparison(instances=10, n=100, seed=0, modes=("fd-perfect", "hd"), config=None):
    """Solver WSR against the brute-force grid on seeded two-user draws."""
    from . import oracle

    config = config or oracle_config(seed)
    params = config.system_params()
    checks = []
    for r in range(int(instances)):
        ch = draw_channels(config, r)
        for mode in modes:
            if mode == "fd-perfect":
                grid, _ = oracle.grid_fd_nosi(params, ch, n)
            elif mode == "hd":
                grid, _ = oracle.grid_hd(params, ch, n)
            else:
                raise ValueError(f"no grid oracle for mode {mode!r}")
            res = solve_mode(mode, params, ch)
            checks.append(OracleCheck(r, mode, float(res.wsr), float(grid)))
    return checks
