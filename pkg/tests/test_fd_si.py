import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, mp_rate_si, projection_active_set
from wpcn import fd_perfect
from wpcn.ellipsoid import InfeasiblePoint
from wpcn.fd_si import (StepConfig, SubproblemInfeasible, power_gradient, project_power,
                        solve, solve_time_subproblem, time_update)
from wpcn.model import LN2, ChannelState, SystemParams, rates_fd_si
from wpcn.scalar import f_inverse

FBAR_INV_052LN2_2 = 3.800611596042012   # mpmath root, 40 digits


def instance(alpha, p_avg=100.0, p_peak=200.0, weights=1.0, gamma=0.0):
    p = SystemParams(len(alpha), p_avg, p_peak, weights=weights, si_gamma=gamma)
    return p, ChannelState.from_alpha(alpha, p)


def random_instance(seed, k=3, gamma=1e-3, p_peak=200.0):
    rng = np.random.default_rng(seed)
    alpha = rng.exponential(size=k) * 0.02
    w = rng.uniform(0.1, 1.0, k)
    return instance(alpha, p_peak=p_peak, weights=w, gamma=gamma)


# time update

def test_time_update_leaves_slot0_empty():
    p, ch = random_instance(0)
    tau = time_update([0.0, 150.0, 120.0, 180.0], 0.3, 1e-3, p, ch)
    assert tau[0] == 0.0
    assert np.all(tau[1:] > 0.0)


def test_time_update_zero_power_reduces_to_perfect_sic():
    p, ch = random_instance(1, gamma=0.4)
    lam = 0.2
    tau = time_update(np.zeros(4), lam, 5e-3, p, ch)
    z = np.array([f_inverse(lam * LN2 / w) for w in p.weights])
    assert np.allclose(tau[1:], ch.alpha * p.p_avg / z, rtol=1e-12)


def test_time_update_single_user_example():
    p, ch = instance([1.0], p_avg=10.0, p_peak=20.0)
    tau = time_update([0.0, 2.0], 0.5, 0.01, p, ch)
    assert tau[1] == pytest.approx(10.0 / (FBAR_INV_052LN2_2 + 2.0), rel=1e-10)


def test_time_update_signals_infeasible_prices():
    p, ch = random_instance(2)
    with pytest.raises(InfeasiblePoint):
        time_update([0.0, 150.0, 120.0, 180.0], 0.1, -0.05, p, ch)


# time subproblem

def test_subproblem_reproduces_perfect_sic_times():
    p, ch = random_instance(1, gamma=0.0)
    ref = fd_perfect.solve(p, ch)
    assert ref.allocation.tau[0] == 0.0
    for gamma in (0.0, 1e-12):
        q = p.replace(si_gamma=gamma)
        ts = solve_time_subproblem(ref.allocation.power, q, ChannelState.from_alpha(ch.alpha, q))
        assert np.allclose(ts.tau[1:], ref.allocation.tau[1:], atol=1e-4)


def test_subproblem_two_users_against_line_search():
    p, ch = random_instance(3, k=2, gamma=1e-3)
    power = np.array([0.0, 180.0, 120.0])
    ts = solve_time_subproblem(power, p, ch)
    tau = ts.tau
    assert tau[1:].sum() <= 1.0 + 1e-9
    assert float(tau[1:] @ power[1:]) == pytest.approx(p.p_avg, abs=1e-6)
    # one equality leaves a single free time; scan it at 4e6 points
    t1 = np.linspace(0.0, p.p_avg / power[1], 2000 * 2000 + 1)[1:-1]
    t2 = (p.p_avg - power[1] * t1) / power[2]
    ok = t1 + t2 <= 1.0
    t1, t2 = t1[ok], t2[ok]
    c = ch.si_gain(power[1:], p)
    vals = sum(p.weights[i] * t * np.log2(1.0 + c[i] * (p.p_avg - t * power[1 + i]) / t)
               for i, t in enumerate((t1, t2)))
    j = int(np.argmax(vals))
    got = float(p.weights @ rates_fd_si(tau[1:], power[1:], p, ch))
    assert got == pytest.approx(float(vals[j]), abs=1e-3)
    assert got >= float(vals[j]) - 1e-7
    assert tau[1] == pytest.approx(t1[j], abs=1e-3)


def test_subproblem_budget_and_certificate():
    p, ch = random_instance(4, k=4)
    power = np.array([0.0, 130.0, 170.0, 110.0, 190.0])
    ts = solve_time_subproblem(power, p, ch)
    assert ts.converged
    assert ts.tau[1:].sum() <= 1.0 + 1e-9
    assert float(ts.tau[1:] @ power[1:]) == pytest.approx(p.p_avg, abs=1e-6)
    assert ts.info["budget_residual"] <= 1e-5


def test_subproblem_rejects_low_powers():
    p, ch = random_instance(5)
    with pytest.raises(SubproblemInfeasible):
        solve_time_subproblem([0.0, 50.0, 60.0, 70.0], p, ch)


# power gradient

def test_gradient_zero_weight():
    p, ch = instance([0.02, 0.03], weights=[1.0, 0.0], gamma=1e-3)
    q = power_gradient([0.0, 0.3, 0.4], [0.0, 150.0, 100.0], p, ch)
    assert q[1] == 0.0 and q[0] < 0.0


def test_gradient_without_si():
    p, ch = random_instance(6, gamma=0.0)
    tau = np.array([0.0, 0.2, 0.3, 0.4])
    power = np.array([0.0, 120.0, 100.0, 60.0])
    q = power_gradient(tau, power, p, ch)
    t, pw, a = tau[1:], power[1:], ch.alpha
    expect = -p.weights * t / LN2 * a * t / (t + a * (p.p_avg - t * pw))
    assert np.allclose(q, expect, rtol=1e-13)
    assert np.all(q < 0.0)


@st.composite
def gradient_points(draw):
    k = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 10**6))
    gamma = draw(st.sampled_from([0.0, 1e-5, 1e-3, 1e-1]))
    rng = np.random.default_rng(seed)
    p, ch = random_instance(seed, k=k, gamma=gamma)
    tau = np.r_[0.0, rng.dirichlet(np.ones(k))]
    # keep tau_i (P_i +- h) inside the budget
    cap = np.minimum(p.p_peak, 0.95 * p.p_avg / np.maximum(tau[1:], 1e-12))
    power = np.r_[0.0, rng.uniform(0.05, 0.95, k) * cap]
    return p, ch, tau, power


@settings(max_examples=100)
@given(gradient_points())
def test_gradient_matches_central_differences(point):
    p, ch, tau, power = point
    q = power_gradient(tau, power, p, ch)
    h = 1e-5 * p.p_peak
    for i in range(p.num_users):
        def fn(x, i=i):
            return p.weights[i] * mp_rate_si(tau[1 + i], x, ch.alpha[i], p.si_gamma,
                                              p.sigma2, p.p_avg)
        fd = float(central_difference(fn, mpmath.mpf(power[1 + i]), h))
        assert q[i] == pytest.approx(fd, rel=1e-5, abs=1e-14)


# projection

def test_projection_idempotent():
    p, _ = random_instance(0, k=3)
    tau = np.array([0.0, 0.3, 0.3, 0.4])
    x = np.array([100.0, 150.0, 62.5])
    assert float(tau[1:] @ x) == pytest.approx(p.p_avg)
    assert np.allclose(project_power(x, tau, p), x, atol=1e-12)


def test_projection_single_user():
    p, _ = instance([0.02])
    for c in (-50.0, 0.0, 75.0, 1e4):
        assert project_power([c], [0.0, 0.5], p)[0] == pytest.approx(200.0)
    q, _ = instance([0.02], p_avg=50.0)
    assert project_power([7.0], [0.0, 0.5], q)[0] == pytest.approx(100.0)


def test_projection_rejects_overloaded_times():
    p, _ = instance([0.02, 0.01])
    with pytest.raises(ValueError):
        project_power([100.0, 100.0], [0.0, 0.2, 0.2], p)


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_projection_matches_active_set_oracle(seed):
    rng = np.random.default_rng(seed)
    p, _ = random_instance(seed, k=5)
    tau = np.r_[0.0, rng.dirichlet(np.ones(5))]
    if tau[1:].sum() * p.p_peak < p.p_avg:
        return
    x = rng.normal(100.0, 120.0, 5)
    got = project_power(x, tau, p)
    want = projection_active_set(x, tau[1:], p.p_avg, p.p_peak)
    assert np.allclose(got, want, atol=1e-7)
    assert float(tau[1:] @ got) == pytest.approx(p.p_avg, abs=1e-9)


# alternating solver

def test_reduces_to_perfect_sic():
    p, ch = random_instance(7, gamma=0.0)
    init = fd_perfect.solve(p, ch)
    res = solve(p, ch, init=init)
    assert res.wsr == pytest.approx(init.wsr, abs=1e-6)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.sampled_from([1e-4, 1e-3, 1e-2]))
def test_history_nondecreasing_and_below_perfect_sic(seed, gamma):
    p, ch = random_instance(seed, k=4, gamma=gamma)
    ref = fd_perfect.solve(p.replace(si_gamma=0.0), ch)
    res = solve(p, ch, init=ref)
    assert np.all(np.diff(res.history) >= 0.0)
    assert res.wsr == pytest.approx(max(res.history), abs=1e-12)
    assert res.wsr <= ref.wsr + 1e-9


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_iterates_feasible(seed):
    p, ch = random_instance(seed, k=4, gamma=1e-3)
    res = solve(p, ch)
    tau, power = res.allocation.tau, res.allocation.power
    assert tau.sum() <= 1.0 + 1e-7
    assert float(tau @ power) == pytest.approx(p.p_avg, abs=1e-6)
    assert np.all(power >= 0.0) and np.all(power <= p.p_peak + 1e-12)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.sampled_from([1e-5, 1e-4, 1e-3]))
def test_wsr_nonincreasing_in_gamma(seed, gamma):
    p, ch = random_instance(seed, k=3, gamma=gamma)
    init = fd_perfect.solve(p.replace(si_gamma=0.0), ch)
    a = solve(p, ch, init=init).wsr
    b = solve(p.replace(si_gamma=10.0 * gamma), ch, init=init).wsr
    assert b <= a + 1e-9


def test_single_user_stops_at_init():
    # one user cannot spend p_avg from its own slot when P_1 < p_avg
    p, ch = instance([0.02], gamma=1e-3)
    res = solve(p, ch)
    assert res.residuals["stop"] in ("subproblem infeasible", "converged")
    assert math.isfinite(res.wsr)


def test_step_config_defaults():
    s = StepConfig()
    assert s.initial_fraction == 0.1 and s.max_halvings == 20 and s.delta == 1.0
    assert s.tol_wsr == 1e-8 and s.max_outer == 200
