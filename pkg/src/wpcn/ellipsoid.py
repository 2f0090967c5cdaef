"""Central-cut ellipsoid method for two-dimensional dual problems.

The ellipsoid is ``{x : (x - c)^T A^{-1} (x - c) <= 1}``.  Objective
cuts come from a subgradient oracle; domain cuts come from linear
half-planes checked before the oracle is called, so the oracle is never
evaluated outside the domain.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

N = 2
# det(A') / det(A) for one central cut in two dimensions
DET_FACTOR = (N * N / (N * N - 1.0)) ** N * (N - 1.0) / (N + 1.0)


class EllipsoidError(RuntimeError):
    """The shape matrix stopped being positive definite."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class InfeasiblePoint(Exception):
    """Raised by an oracle whose inner problem is undefined at a point.

    ``normal`` is the cut direction: the dual optimum lies in
    ``{x : normal . (x - point) <= 0}``.
    """

    def __init__(self, normal):
        super().__init__("dual point outside the oracle domain")
        self.normal = np.asarray(normal, dtype=float)


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(N)
        self.shape = np.asarray(self.shape, dtype=float).reshape(N, N)

    @classmethod
    def ball(cls, center, radius):
        return cls(center, np.eye(N) * float(radius) ** 2)

    @classmethod
    def box(cls, center, half_widths):
        """Axis-aligned ellipsoid circumscribing a box of the given half widths."""
        h = np.asarray(half_widths, dtype=float)
        return cls(center, np.diag(N * h * h))

    @classmethod
    def default(cls, p_avg):
        """Generic start for ``(lambda, mu)`` duals of a budget ``p_avg``."""
        return cls.ball([1.0, 1.0 / p_avg], 10.0 * max(1.0, 1.0 / p_avg))

    def is_positive_definite(self):
        a = self.shape
        return (abs(a[0, 1] - a[1, 0]) <= 1e-12 * abs(a).max()
                and np.trace(a) > 0.0 and np.linalg.det(a) > 0.0)

    def metric(self, x):
        """``(x - c)^T A^{-1} (x - c)``; at most 1 inside the ellipsoid."""
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ np.linalg.solve(self.shape, d))


def central_cut(state, g):
    """Shrink ``state`` to the minimal ellipsoid of ``{x : g.(x - c) <= 0}``."""
    a = state.shape
    ag = a @ g
    gag = float(g @ ag)
    if not gag > 0.0:
        raise ValueError("cut vector is degenerate for this ellipsoid")
    gt = ag / math.sqrt(gag)
    center = state.center - gt / (N + 1)
    shape = N * N / (N * N - 1.0) * (a - 2.0 / (N + 1) * np.outer(gt, gt))
    shape = 0.5 * (shape + shape.T)
    return EllipsoidState(center, shape, state.iteration + 1)


@dataclass(frozen=True)
class HalfPlane:
    """Domain constraint ``normal . x <= offset``."""

    normal: tuple
    offset: float

    def violated(self, x):
        return float(np.dot(self.normal, x)) > self.offset


def nonneg_lambda():
    return HalfPlane((-1.0, 0.0), 0.0)


def mu_at_least(mu_min):
    return HalfPlane((0.0, -1.0), -float(mu_min))


@dataclass
class TracePoint:
    point: np.ndarray
    value: float
    subgradient: np.ndarray
    payload: object = None


@dataclass
class EllipsoidResult:
    x: np.ndarray
    value: float
    trace: list
    iterations: int
    converged: bool
    state: EllipsoidState = None
    restarts: int = 0
    log: list = field(default_factory=list)


def ellipsoid_minimize(oracle, initial, domain=(), tol=1e-7, max_iter=300):
    """Minimize a convex function given by a subgradient oracle.

    Parameters
    ----------
    oracle : callable
        ``oracle(x) -> (value, subgradient, payload)``.  It may raise
        :class:`InfeasiblePoint` to request a feasibility cut.
    initial : EllipsoidState
        Must contain the minimizer.
    domain : sequence of HalfPlane
        Linear constraints enforced with central cuts.
    tol : float
        Stop once ``sqrt(g^T A g) <= tol`` for an objective cut.

    Returns
    -------
    EllipsoidResult
        ``x`` is the best evaluated center; ``trace`` lists every oracle
        evaluation in order.
    """
    state = EllipsoidState(initial.center.copy(), initial.shape.copy(), 0)
    trace = []
    best_x, best_v = None, math.inf
    converged = False
    for _ in range(max_iter):
        if not state.is_positive_definite():
            raise EllipsoidError(f"shape lost definiteness at iteration {state.iteration}", trace)
        x = state.center
        g = None
        for plane in domain:
            if plane.violated(x):
                g = np.asarray(plane.normal, dtype=float)
                break
        objective = g is None
        if objective:
            try:
                value, g, payload = oracle(x.copy())
            except InfeasiblePoint as cut:
                g, objective = cut.normal, False
            else:
                g = np.asarray(g, dtype=float)
                trace.append(TracePoint(x.copy(), float(value), g.copy(), payload))
                if value < best_v:
                    best_x, best_v = x.copy(), float(value)
                if not np.any(g):
                    converged = True
                    break
                if math.sqrt(max(float(g @ state.shape @ g), 0.0)) <= tol:
                    converged = True
                    break
        state = central_cut(state, g)
    if best_x is None:
        raise EllipsoidError("no oracle evaluation inside the domain", trace)
    return EllipsoidResult(best_x, best_v, trace, state.iteration, converged, state)


def minimize_with_restarts(oracle, initial, domain=(), tol=1e-7, max_iter=300,
                           max_restarts=4, edge=0.8, grow=4.0):
    """Run :func:`ellipsoid_minimize`, enlarging the start if it was too small.

    A minimizer found near the rim of the starting ellipsoid suggests the
    true optimum may lie outside it; the search then restarts from the
    best point with every axis scaled by ``grow``.
    """
    start = initial
    log = []
    for attempt in range(max_restarts + 1):
        res = ellipsoid_minimize(oracle, start, domain, tol, max_iter)
        rim = start.metric(res.x)
        log.append((attempt, res.iterations, res.value, rim))
        if rim <= edge or attempt == max_restarts:
            res.restarts = attempt
            res.log = log
            return res
        start = EllipsoidState(res.x, start.shape * grow * grow)
    return res


def best_combination(values, columns, target, extra=None):
    """Best convex combination of primal points meeting linear budgets.

    Solves the linear program

        max  sum_k w_k values_k
        s.t. columns @ w + extra @ s = target,  sum(w) = 1,  w, s >= 0

    where column ``k`` holds the budget usage of the inner maximizer at
    trace point ``k`` and ``extra`` lists non-negative slack directions.
    Concavity makes the combined primal point at least as good as the
    objective value reported here.

    Returns
    -------
    w : ndarray
        Convex weights.
    s : ndarray
        Slack coefficients.
    residual : float
        Largest absolute budget violation of the combination.
    """
    values = np.asarray(values, dtype=float)
    cols = np.atleast_2d(np.asarray(columns, dtype=float))
    target = np.asarray(target, dtype=float)
    m = values.size
    ext = np.zeros((cols.shape[0], 0)) if extra is None else np.atleast_2d(
        np.asarray(extra, dtype=float)).reshape(cols.shape[0], -1)
    q = ext.shape[1]
    a = np.hstack([cols, ext])
    scale = np.maximum(np.abs(a).max(axis=1), np.abs(target))
    scale = np.where(scale > 0.0, scale, 1.0)
    a_eq = np.vstack([a / scale[:, None], np.r_[np.ones(m), np.zeros(q)]])
    b_eq = np.r_[target / scale, 1.0]
    vmax = max(float(np.abs(values).max()), 1e-300)
    c = np.r_[-values / vmax, np.zeros(q)]
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 0:
        x = np.maximum(res.x, 0.0)
    else:
        # least-squares fallback when the budgets cannot be met exactly
        rho = 1e4
        lhs = np.vstack([a / scale[:, None], rho * np.r_[np.ones(m), np.zeros(q)]])
        x, _ = nnls(lhs, np.r_[target / scale, rho], maxiter=50 * (m + q + 3))
    w, sl = x[:m], x[m:]
    total = w.sum()
    if total > 0.0:
        w, sl = w / total, sl / total
    residual = float(np.abs(cols @ w + ext @ sl - target).max())
    return w, sl, residual
