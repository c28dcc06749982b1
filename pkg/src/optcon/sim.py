"""Closed-loop simulation of agents, generators and Nussbaum adaptation.

The packed state holds one contiguous block per agent,
``(x_i[0..n_i-1], r_i, v_i, theta_i)``, and is integrated with fixed-step
RK4. Events are applied at the start of the grid step nearest to their time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from optcon import costs as costs_mod
from optcon.controller import (
    ExpSqSin,
    GainSchedule,
    NussbaumOverflow,
    ThetaSqSin,
    generator_derivative,
    lemma1_gains,
)
from optcon.graph import Digraph, laplacian, sym_spectrum
from optcon.plant import AgentDynamics, build_translation

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e9
OFFLINE = "offline"
ONLINE = "online"


@dataclass(frozen=True)
class IsolateNode:
    node: int


@dataclass(frozen=True)
class RestoreGraph:
    pass


@dataclass(frozen=True)
class Disturbance:
    """amplitude * sin(frequency * t) added to every u_i on [t_on, t_off]."""

    amplitude: float
    frequency: float
    t_on: float
    t_off: float

    def __call__(self, t: float) -> float:
        return self.amplitude * math.sin(self.frequency * t)


@dataclass(frozen=True)
class Event:
    time: float
    action: Union[IsolateNode, RestoreGraph, Disturbance]


@dataclass(frozen=True)
class InitialConditions:
    """Initial chain states; r, v and theta default to y(0), 0 and 0."""

    x: tuple[tuple[float, ...], ...]
    r: tuple[float, ...] | None = None
    v: tuple[float, ...] | None = None
    theta: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Scenario:
    graph: Digraph
    agents: tuple[AgentDynamics, ...]
    costs: tuple
    init: InitialConditions
    mode: str = OFFLINE
    eps: float = 1.0
    gains: GainSchedule | None = None  # None selects the generator gain bounds
    nussbaum: object = field(default_factory=ThetaSqSin)
    k: tuple[tuple[float, ...] | None, ...] | None = None
    t_end: float = 45.0
    h: float = 1e-3
    record_every: int = 10
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        n = self.graph.n
        if len(self.agents) != n or len(self.costs) != n:
            raise ValueError(f"graph has {n} nodes but {len(self.agents)} agents and {len(self.costs)} costs")
        if len(self.init.x) != n:
            raise ValueError(f"need {n} initial states, got {len(self.init.x)}")
        for i, (dyn, x0) in enumerate(zip(self.agents, self.init.x)):
            if len(x0) != dyn.order:
                raise ValueError(f"agent {i + 1}: initial state has length {len(x0)}, order is {dyn.order}")
        for name in ("r", "v", "theta"):
            vec = getattr(self.init, name)
            if vec is not None and len(vec) != n:
                raise ValueError(f"initial {name} must have length {n}")
        if self.k is not None and len(self.k) != n:
            raise ValueError(f"need {n} coefficient entries, got {len(self.k)}")
        if self.mode not in (OFFLINE, ONLINE):
            raise ValueError(f"mode must be {OFFLINE!r} or {ONLINE!r}, got {self.mode!r}")
        if not (self.h > 0 and self.t_end > 0 and self.eps > 0):
            raise ValueError("h, t_end and eps must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        for ev in self.events:
            if not 0 <= ev.time <= self.t_end:
                raise ValueError(f"event at t={ev.time} lies outside [0, {self.t_end}]")
            if isinstance(ev.action, IsolateNode) and not 1 <= ev.action.node <= n:
                raise ValueError(f"event isolates unknown node {ev.action.node}")

    def resolved_gains(self) -> GainSchedule:
        if self.gains is not None:
            return self.gains
        lu, lb = costs_mod.aggregate_params(self.costs)
        return lemma1_gains(lu, lb, sym_spectrum(self.graph))

    def coefficients(self, i: int):
        if self.k is None or self.k[i] is None:
            return None
        return self.k[i]


@dataclass
class Trace:
    times: np.ndarray
    y: np.ndarray       # (samples, N)
    x: list             # per agent, (samples, n_i) chain states
    u: np.ndarray       # controller output N(theta) zeta, without disturbance
    theta: np.ndarray
    r: np.ndarray
    v: np.ndarray
    zeta: np.ndarray
    event_times: list = field(default_factory=list)

    @property
    def n_agents(self) -> int:
        return self.y.shape[1]

    def at(self, t: float) -> int:
        """Index of the stored sample closest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)


class BlowUpError(RuntimeError):
    """The closed loop left the representable range; carries the partial trace."""

    def __init__(self, agent: int, t: float, theta: float, reason: str, trace: Trace | None = None):
        super().__init__(f"blow-up at t={t:.6g} s, agent {agent}, theta={theta:.6g}: {reason}")
        self.agent = agent
        self.t = t
        self.theta = theta
        self.reason = reason
        self.trace = trace


def rk4_step(f: Callable, t: float, state: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, state)
    k2 = f(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = f(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class ClosedLoop:
    """Precomputed index maps and the right-hand side for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.gains = scenario.resolved_gains()
        self.nussbaum = scenario.nussbaum
        self.online = scenario.mode == ONLINE
        self.grad_fns = [c.grad for c in scenario.costs]
        n = scenario.graph.n
        self.n = n
        orders = [a.order for a in scenario.agents]
        starts = np.cumsum([0] + [m + 3 for m in orders])
        self.dim = int(starts[-1])
        self.x_slices = [slice(int(s), int(s) + m) for s, m in zip(starts, orders)]
        self.y_idx = starts[:-1].copy()
        self.r_idx = self.y_idx + np.array(orders)
        self.v_idx = self.r_idx + 1
        self.th_idx = self.r_idx + 2
        self.top_idx = self.r_idx - 1
        src, dst = [], []
        for s, m in zip(starts, orders):
            dst.extend(range(s, s + m - 1))
            src.extend(range(s + 1, s + m))
        self.shift_src = np.array(src, dtype=int)
        self.shift_dst = np.array(dst, dtype=int)
        self.b = np.array([a.b for a in scenario.agents], dtype=float)

        self.translations = [build_translation(m, scenario.coefficients(i), scenario.eps)
                             for i, m in enumerate(orders)]
        # zeta = W @ state, with the reference entering through the r slot
        self.W = np.zeros((n, self.dim))
        for i, td in enumerate(self.translations):
            w = td.zeta_weights
            self.W[i, self.x_slices[i]] = w
            self.W[i, self.r_idx[i]] = -w[0]

        self.base_lap = laplacian(scenario.graph)
        self.lap = self.base_lap
        self.disturbance: Disturbance | None = None

    def pack(self) -> np.ndarray:
        init = self.scenario.init
        s = np.zeros(self.dim)
        for i, x0 in enumerate(init.x):
            s[self.x_slices[i]] = x0
        y0 = s[self.y_idx]
        s[self.r_idx] = y0 if init.r is None else init.r
        s[self.v_idx] = 0.0 if init.v is None else init.v
        s[self.th_idx] = 0.0 if init.theta is None else init.theta
        return s

    def gradients(self, points: np.ndarray) -> np.ndarray:
        return np.array([g(p) for g, p in zip(self.grad_fns, points)])

    def signals(self, t: float, s: np.ndarray):
        """(zeta, u) at a state; u excludes the disturbance."""
        zeta = self.W @ s
        theta = s[self.th_idx]
        try:
            gain = self.nussbaum(theta)
        except NussbaumOverflow as exc:
            i = int(np.argmax(np.abs(theta)))
            raise BlowUpError(i + 1, t, float(theta[i]), str(exc)) from None
        return zeta, gain * zeta

    def derivative(self, t: float, s: np.ndarray) -> np.ndarray:
        zeta, u = self.signals(t, s)
        big = np.abs(u) > BLOWUP_LIMIT
        if big.any() or not np.all(np.isfinite(u)):
            i = int(np.argmax(np.where(np.isfinite(u), np.abs(u), np.inf)))
            raise BlowUpError(i + 1, t, float(s[self.th_idx[i]]), f"|u| = {abs(u[i]):.3g} exceeds {BLOWUP_LIMIT:g}")
        if self.disturbance is not None:
            u = u + self.disturbance(t)
        r = s[self.r_idx]
        grads = self.gradients(s[self.y_idx] if self.online else r)
        r_dot, v_dot = generator_derivative(r, s[self.v_idx], grads, self.lap, self.gains)
        ds = np.empty_like(s)
        ds[self.shift_dst] = s[self.shift_src]
        ds[self.top_idx] = self.b * u
        ds[self.r_idx] = r_dot
        ds[self.v_idx] = v_dot
        ds[self.th_idx] = zeta * zeta
        return ds

    def apply_event(self, action, t: float):
        if isinstance(action, IsolateNode):
            lap_graph = self.scenario.graph.isolate(action.node)
            self.lap = laplacian(lap_graph)
        elif isinstance(action, RestoreGraph):
            self.lap = self.base_lap
        elif isinstance(action, Disturbance):
            self.disturbance = action
        else:
            raise TypeError(f"unknown event action {action!r}")
        log.info("t=%.4f applied %r", t, action)


def closed_loop_derivative(scenario: Scenario, t: float, packed_state, loop: ClosedLoop | None = None):
    """Right-hand side of the whole closed loop for the scenario's unmodified graph."""
    loop = loop or ClosedLoop(scenario)
    return loop.derivative(t, np.asarray(packed_state, dtype=float))


def apply_event(weights: np.ndarray, original: np.ndarray, action):
    """Working weight matrix after an event (pure version of the runner's handling)."""
    if isinstance(action, IsolateNode):
        w = np.array(weights, dtype=float)
        w[action.node - 1, :] = 0.0
        w[:, action.node - 1] = 0.0
        return w
    if isinstance(action, RestoreGraph):
        return np.array(original, dtype=float)
    return np.array(weights, dtype=float)


def same_sign(agents: Sequence[AgentDynamics]) -> bool:
    return all(a.b > 0 for a in agents) or all(a.b < 0 for a in agents)


def run_scenario(scenario: Scenario) -> Trace:
    """Integrate the closed loop from 0 to ``t_end``.

    Raises
    ------
    BlowUpError
        If a control input or state leaves the representable range. The
        exception's ``trace`` holds every sample recorded before the abort.
    """
    if scenario.mode == ONLINE and not same_sign(scenario.agents):
        log.warning("real-time gradient mode assumes all high-frequency gains share a sign")
    loop = ClosedLoop(scenario)
    h = scenario.h
    steps = int(round(scenario.t_end / h))
    schedule: dict[int, list] = {}
    for ev in scenario.events:
        schedule.setdefault(int(round(ev.time / h)), []).append(ev.action)
        if isinstance(ev.action, Disturbance):
            off = int(round(ev.action.t_off / h))
            schedule.setdefault(off, []).append(None)

    rec = _Recorder(loop)
    s = loop.pack()
    try:
        for k in range(steps + 1):
            t = k * h
            for action in schedule.get(k, ()):
                if action is None:
                    loop.disturbance = None
                    log.info("t=%.4f disturbance off", t)
                else:
                    loop.apply_event(action, t)
                    rec.event_times.append(t)
            if k % scenario.record_every == 0 or k == steps:
                rec.record(t, s)
            if k == steps:
                break
            s = rk4_step(loop.derivative, t, s, h)
            if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > BLOWUP_LIMIT:
                bad = np.where(np.isfinite(s), np.abs(s), np.inf)
                pos = int(np.argmax(bad))
                agent = int(np.searchsorted(loop.y_idx, pos, side="right"))
                theta = float(s[loop.th_idx[agent - 1]])
                raise BlowUpError(agent, t + h, theta, f"state magnitude exceeds {BLOWUP_LIMIT:g}")
    except BlowUpError as exc:
        exc.trace = rec.finish()
        raise
    return rec.finish()


class _Recorder:
    def __init__(self, loop: ClosedLoop):
        self.loop = loop
        self.times, self.states, self.zetas, self.us = [], [], [], []
        self.event_times: list[float] = []

    def record(self, t, s):
        zeta, u = self.loop.signals(t, s)
        self.times.append(t)
        self.states.append(s.copy())
        self.zetas.append(zeta)
        self.us.append(u)

    def finish(self) -> Trace:
        lp = self.loop
        if self.states:
            st = np.array(self.states)
        else:
            st = np.zeros((0, lp.dim))
        return Trace(
            times=np.array(self.times),
            y=st[:, lp.y_idx],
            x=[st[:, sl] for sl in lp.x_slices],
            u=np.array(self.us).reshape(len(self.times), lp.n),
            theta=st[:, lp.th_idx],
            r=st[:, lp.r_idx],
            v=st[:, lp.v_idx],
            zeta=np.array(self.zetas).reshape(len(self.times), lp.n),
            event_times=list(self.event_times),
        )


@dataclass
class GeneratorTrace:
    times: np.ndarray
    r: np.ndarray
    v: np.ndarray


def run_generator(graph: Digraph, costs: Sequence, gains: GainSchedule, r0, v0=None,
                  t_end: float = 5.0, h: float = 1e-3, record_every: int = 10) -> GeneratorTrace:
    """Generator alone, fed with gradients at its own estimates."""
    lap = laplacian(graph)
    n = graph.n
    grad_fns = [c.grad for c in costs]
    r0 = np.asarray(r0, dtype=float)
    v0 = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float)

    def f(t, s):
        r, v = s[:n], s[n:]
        grads = np.array([g(x) for g, x in zip(grad_fns, r)])
        r_dot, v_dot = generator_derivative(r, v, grads, lap, gains)
        return np.concatenate([r_dot, v_dot])

    s = np.concatenate([r0, v0])
    steps = int(round(t_end / h))
    times, rs, vs = [], [], []
    for k in range(steps + 1):
        if k % record_every == 0 or k == steps:
            times.append(k * h)
            rs.append(s[:n].copy())
            vs.append(s[n:].copy())
        if k == steps:
            break
        s = rk4_step(f, k * h, s, h)
        if not np.all(np.isfinite(s)):
            raise BlowUpError(0, (k + 1) * h, 0.0, "generator state is not finite")
    return GeneratorTrace(np.array(times), np.array(rs), np.array(vs))
