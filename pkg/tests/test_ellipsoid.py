import numpy as np
import pytest

from wpcn.ellipsoid import (DET_FACTOR, EllipsoidError, EllipsoidState, HalfPlane,
                            InfeasiblePoint, best_combination, central_cut, ellipsoid_minimize,
                            minimize_with_restarts, mu_at_least, nonneg_lambda)


def quadratic(target):
    target = np.asarray(target, dtype=float)

    def oracle(x):
        d = x - target
        return float(d @ d), 2.0 * d, None
    return oracle


def test_quadratic_minimum():
    res = ellipsoid_minimize(quadratic([1.0, 2.0]), EllipsoidState.ball([0.0, 0.0], 10.0),
                             (nonneg_lambda(),), tol=1e-9)
    assert res.converged
    assert np.allclose(res.x, [1.0, 2.0], atol=1e-6)


def test_zero_subgradient_stops_immediately():
    calls = []

    def oracle(x):
        calls.append(x)
        return 0.0, np.zeros(2), None
    res = ellipsoid_minimize(oracle, EllipsoidState.ball([3.0, 4.0], 1.0))
    assert res.converged and len(calls) == 1
    assert np.allclose(res.x, [3.0, 4.0])


def test_determinant_factor_per_cut(rng):
    state = EllipsoidState([0.0, 0.0], [[4.0, 1.0], [1.0, 3.0]])
    for _ in range(50):
        new = central_cut(state, rng.normal(size=2))
        ratio = np.linalg.det(new.shape) / np.linalg.det(state.shape)
        assert ratio == pytest.approx(DET_FACTOR, rel=1e-12)
        state = new
    assert DET_FACTOR == pytest.approx((4.0 / 3.0) ** 2 / 3.0, rel=1e-15)


def test_domain_cuts_never_reach_oracle():
    seen = []

    def oracle(x):
        seen.append(x.copy())
        d = x - np.array([-1.0, 0.5])
        return float(d @ d), 2.0 * d, None
    res = ellipsoid_minimize(oracle, EllipsoidState.ball([0.5, 0.5], 5.0),
                             (nonneg_lambda(), mu_at_least(0.1)), tol=1e-9)
    assert all(x[0] >= 0.0 and x[1] >= 0.1 for x in seen)
    assert res.x[0] == pytest.approx(0.0, abs=1e-5)
    assert res.x[1] == pytest.approx(0.5, abs=1e-5)


def test_infeasible_point_cut():
    # the oracle is undefined for x0 + x1 > 3 and reports the cut itself
    def oracle(x):
        if x[0] + x[1] > 3.0:
            raise InfeasiblePoint((1.0, 1.0))
        d = x - np.array([2.0, 2.0])
        return float(d @ d), 2.0 * d, None
    res = ellipsoid_minimize(oracle, EllipsoidState.ball([0.0, 0.0], 10.0), tol=1e-9)
    assert np.allclose(res.x, [1.5, 1.5], atol=1e-5)


def test_loss_of_definiteness_is_reported():
    bad = EllipsoidState([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(EllipsoidError):
        ellipsoid_minimize(quadratic([0.0, 0.0]), bad)


def test_restarts_grow_small_start():
    res = minimize_with_restarts(quadratic([30.0, -20.0]), EllipsoidState.ball([0.0, 0.0], 1.0),
                                 tol=1e-9, max_restarts=6)
    assert res.restarts > 0
    assert np.allclose(res.x, [30.0, -20.0], atol=1e-5)


def test_half_plane():
    h = HalfPlane((1.0, -1.0), 0.5)
    assert h.violated([1.0, 0.0]) and not h.violated([0.0, 0.0])


def test_best_combination_meets_budgets():
    values = [1.0, 3.0, 2.0]
    cols = np.array([[0.0, 2.0, 1.0], [2.0, 0.0, 1.0]])
    w, s, resid = best_combination(values, cols, [1.0, 1.0])
    assert resid <= 1e-9
    assert w.sum() == pytest.approx(1.0)
    assert float(np.dot(w, values)) == pytest.approx(2.0)


def test_best_combination_with_slack():
    values = [1.0, 2.0]
    cols = np.array([[0.5, 0.8]])
    w, s, resid = best_combination(values, cols, [1.0], extra=[[1.0]])
    assert resid <= 1e-9
    assert w == pytest.approx([0.0, 1.0])
    assert s == pytest.approx([0.2])


def test_default_ball():
    st = EllipsoidState.default(100.0)
    assert np.allclose(st.center, [1.0, 0.01])
    assert st.is_positive_definite()
    assert st.metric(st.center) == 0.0
