import dataclasses
import math

import numpy as np
import pytest

from optcon import scenarios
from optcon.controller import ExpSqSin, GainSchedule, ThetaSqSin
from optcon.costs import Quadratic, global_minimizer
from optcon.graph import build_digraph, fig1_graph, is_strongly_connected, is_weight_balanced
from optcon.plant import AgentDynamics
from optcon.sim import (
    BlowUpError,
    ClosedLoop,
    Disturbance,
    Event,
    InitialConditions,
    IsolateNode,
    RestoreGraph,
    Scenario,
    apply_event,
    closed_loop_derivative,
    rk4_step,
    run_generator,
    run_scenario,
)


def single_agent(y0=1.0, r0=None, order=1, nussbaum=None, t_end=1.0, b=1.0):
    return Scenario(
        graph=build_digraph(1, []),
        agents=(AgentDynamics(order, b),),
        costs=(Quadratic(1.0, 1.0),),
        init=InitialConditions(x=((y0,) + (0.0,) * (order - 1),), r=None if r0 is None else (r0,)),
        gains=GainSchedule(1.0, 1.0),
        nussbaum=nussbaum or ThetaSqSin(),
        t_end=t_end,
        h=1e-2,
        record_every=1,
    )


def test_rk4_exponential():
    x1 = rk4_step(lambda t, x: -x, 0.0, np.array([1.0]), 0.1)
    assert x1[0] == pytest.approx(0.9048375, abs=1e-7)
    assert abs(x1[0] - math.exp(-0.1)) < 1e-7


def test_rk4_trivial():
    x = np.array([1.5, -2.0])
    assert np.array_equal(rk4_step(lambda t, s: np.zeros(2), 0.0, x, 0.3), x)
    assert np.array_equal(rk4_step(lambda t, s: np.ones(2), 0.0, x, 0.5), x + 0.5)


def test_equilibrium_derivative_is_zero():
    sc = single_agent()
    loop = ClosedLoop(sc)
    assert not closed_loop_derivative(sc, 0.0, loop.pack()).any()


def test_equilibrium_run_is_flat():
    tr = run_scenario(single_agent())
    assert np.all(tr.y == 1.0) and np.all(tr.theta == 0.0) and np.all(tr.u == 0.0)
    assert len(tr.times) == 101


def test_zero_zeta_freezes_adaptation():
    sc = scenarios.example1().scenario
    loop = ClosedLoop(sc)
    s = loop.pack()
    s[loop.th_idx] = np.linspace(0.0, 3.0, 8)
    # at r = y and zero velocity every zeta vanishes
    d = loop.derivative(0.0, s)
    assert np.array_equal(d[loop.th_idx], np.zeros(8))


def test_example1_initial_generator_rate():
    sc = scenarios.example1().scenario
    loop = ClosedLoop(sc)
    d = loop.derivative(0.0, loop.pack())
    beta = sc.gains.beta
    # node 1 hears nodes 2 and 8: (-3 - -2) + (-3 - 5) = -9, gradients vanish at r = y(0)
    assert d[loop.r_idx[0]] == pytest.approx(9.0 * beta)
    assert d[loop.v_idx[0]] == pytest.approx(-9.0 * sc.gains.alpha * beta)
    y0 = np.array([-3, -2, 0, -1, 1, 4, 2, 5.0])
    lap = np.diag(fig1_graph().in_degrees()) - fig1_graph().weights
    assert np.allclose(d[loop.r_idx], -beta * lap @ y0)


def test_packed_layout():
    sc = scenarios.example2().scenario
    loop = ClosedLoop(sc)
    # blocks of (x_i, r_i, v_i, theta_i) for orders 1,2,3,4,1,2,3,4
    assert loop.dim == 2 * (1 + 2 + 3 + 4) + 8 * 3
    assert list(loop.y_idx[:4]) == [0, 4, 9, 15]
    assert list(loop.r_idx[:4]) == [1, 6, 12, 19]


def test_apply_event_pure(fig1):
    w = apply_event(fig1.weights, fig1.weights, IsolateNode(8))
    g = build_digraph(8, [])
    masked = type(g)(8, w)
    assert is_weight_balanced(masked)
    assert is_strongly_connected(masked.subgraph(range(1, 8)))
    restored = apply_event(w, fig1.weights, RestoreGraph())
    assert np.array_equal(restored, fig1.weights)


def test_disturbance_value():
    d = Disturbance(10.0, 1.0, 15.0, 30.0)
    assert d(20.0) == 10.0 * math.sin(20.0)


def test_disturbance_enters_before_gain():
    sc = dataclasses.replace(single_agent(b=-2.0), events=(Event(0.0, Disturbance(3.0, 1.0, 0.0, 1.0)),))
    loop = ClosedLoop(sc)
    loop.apply_event(sc.events[0].action, 0.0)
    d = loop.derivative(0.5, loop.pack())
    assert d[0] == pytest.approx(-2.0 * 3.0 * math.sin(0.5))


def test_blowup_reports_agent_time_theta():
    sc = single_agent(y0=1e4, r0=0.0, nussbaum=ExpSqSin(), t_end=5.0)
    with pytest.raises(BlowUpError) as info:
        run_scenario(sc)
    err = info.value
    assert err.agent == 1
    assert 0.0 <= err.t <= 5.0
    assert err.theta > 0
    assert err.trace is not None and len(err.trace.times) >= 1
    assert "agent 1" in str(err)


def test_scenario_validation():
    base = single_agent()
    with pytest.raises(ValueError, match="mode"):
        dataclasses.replace(base, mode="sideways")
    with pytest.raises(ValueError, match="positive"):
        dataclasses.replace(base, h=0.0)
    with pytest.raises(ValueError, match="outside"):
        dataclasses.replace(base, events=(Event(2.0, RestoreGraph()),))
    with pytest.raises(ValueError, match="initial state"):
        dataclasses.replace(base, init=InitialConditions(x=((1.0, 0.0),)))


def test_online_mixed_signs_warns(caplog):
    sc = dataclasses.replace(scenarios.example1().scenario, mode="online", t_end=0.01, events=())
    with caplog.at_level("WARNING"):
        run_scenario(sc)
    assert "share a sign" in caplog.text


def test_determinism():
    sc = dataclasses.replace(scenarios.example2().scenario, t_end=2.0, events=())
    a, b = run_scenario(sc), run_scenario(sc)
    for name in ("times", "y", "u", "theta", "r", "v", "zeta"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_event_snapping():
    sc = dataclasses.replace(scenarios.example1().scenario, t_end=0.1,
                             events=(Event(0.0304, IsolateNode(8)),))
    tr = run_scenario(sc)
    assert tr.event_times == [pytest.approx(0.030)]


def test_generator_only_decays(fig1):
    costs = [Quadratic(1.0, c) for c in (-3, -2, 0, -1, 1, 4, 2, 5)]
    gt = run_generator(fig1, costs, GainSchedule(2.0, 20.0), [c.center for c in costs], t_end=20.0)
    err = np.linalg.norm(gt.r - global_minimizer(costs), axis=1)
    assert err[-1] < 1e-3 * err[0]
    slope = np.polyfit(gt.times[len(err) // 2:], np.log(err[len(err) // 2:]), 1)[0]
    assert slope < 0


@pytest.mark.slow
def test_example1_invariants(example1_run):
    tr, _ = example1_run
    assert np.all(np.diff(tr.theta, axis=0) >= 0)
    bounds = [0.0] + tr.event_times + [tr.times[-1] + 1]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        seg = (tr.times >= lo) & (tr.times < hi)
        sums = tr.v[seg].sum(axis=1)
        assert np.max(np.abs(sums - sums[0])) <= 1e-6
    assert np.all(np.isfinite(tr.y))


@pytest.mark.slow
def test_example1_isolated_node_heads_to_local_optimum(example1_run):
    tr, _ = example1_run
    k = tr.at(29.99)
    assert abs(tr.y[k, 7] - 5.0) <= 0.1
    assert np.max(np.abs(tr.y[k, :7] - 1.0 / 7.0)) <= 0.05


@pytest.mark.slow
def test_example2_invariants(example2_run):
    tr, _ = example2_run
    assert np.all(np.diff(tr.theta, axis=0) >= 0)
    sums = tr.v.sum(axis=1)
    assert np.max(np.abs(sums - sums[0])) <= 1e-6
    assert all(x.shape == (len(tr.times), m) for x, m in zip(tr.x, (1, 2, 3, 4, 1, 2, 3, 4)))
