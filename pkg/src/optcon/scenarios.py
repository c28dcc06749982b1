"""Scenario files (JSON) and the two built-in reference scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from optcon.controller import ExpSqSin, GainSchedule, ThetaSqSin, nussbaum_from_name
from optcon.costs import Quadratic, cost_from_dict, cost_to_dict, example2_costs
from optcon.graph import FIG1_EDGES, build_digraph
from optcon.plant import AgentDynamics
from optcon.sim import (
    OFFLINE,
    ONLINE,
    Disturbance,
    Event,
    InitialConditions,
    IsolateNode,
    RestoreGraph,
    Scenario,
)


class ScenarioFileError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    name: str = ""
    description: str = ""
    output_dir: str | None = None


def _event_to_dict(ev: Event) -> dict:
    a = ev.action
    if isinstance(a, IsolateNode):
        return {"time": ev.time, "action": "isolate_node", "node": a.node}
    if isinstance(a, RestoreGraph):
        return {"time": ev.time, "action": "restore_graph"}
    return {"time": ev.time, "action": "disturbance", "amplitude": a.amplitude,
            "frequency": a.frequency, "t_on": a.t_on, "t_off": a.t_off}


def _event_from_dict(d: dict) -> Event:
    kind = d["action"]
    t = float(d["time"])
    if kind == "isolate_node":
        return Event(t, IsolateNode(int(d["node"])))
    if kind == "restore_graph":
        return Event(t, RestoreGraph())
    if kind == "disturbance":
        return Event(t, Disturbance(float(d["amplitude"]), float(d["frequency"]),
                                    float(d.get("t_on", t)), float(d["t_off"])))
    raise ValueError(f"unknown action {kind!r}")


def _opt_tuple(vec):
    return None if vec is None else tuple(float(x) for x in vec)


def to_dict(sf: ScenarioFile) -> dict:
    sc = sf.scenario
    return {
        "name": sf.name,
        "description": sf.description,
        "graph": {"n": sc.graph.n, "edges": [list(e) for e in sc.graph.edges()]},
        "agents": [{"order": a.order, "b": a.b} for a in sc.agents],
        "costs": [cost_to_dict(c) for c in sc.costs],
        "mode": sc.mode,
        "eps": sc.eps,
        "gains": "auto" if sc.gains is None else {"alpha": sc.gains.alpha, "beta": sc.gains.beta},
        "nussbaum": sc.nussbaum.name,
        "k": None if sc.k is None else [None if k is None else list(k) for k in sc.k],
        "t_end": sc.t_end,
        "h": sc.h,
        "init": {
            "x": [list(x) for x in sc.init.x],
            "r": None if sc.init.r is None else list(sc.init.r),
            "v": None if sc.init.v is None else list(sc.init.v),
            "theta": None if sc.init.theta is None else list(sc.init.theta),
        },
        "events": [_event_to_dict(e) for e in sc.events],
        "output": {"record_every": sc.record_every, "directory": sf.output_dir},
    }


def from_dict(d: dict) -> ScenarioFile:
    """Build a ScenarioFile, naming the offending field on failure."""
    field_name = "<root>"
    try:
        field_name = "graph"
        g = d["graph"]
        graph = build_digraph(int(g["n"]), [(int(a), int(b), float(w)) for a, b, w in g["edges"]])
        field_name = "agents"
        agents = tuple(AgentDynamics(int(a["order"]), float(a["b"])) for a in d["agents"])
        field_name = "costs"
        costs = tuple(cost_from_dict(c) for c in d["costs"])
        field_name = "gains"
        gains_raw = d.get("gains", "auto")
        gains = None if gains_raw in (None, "auto") else GainSchedule(float(gains_raw["alpha"]),
                                                                       float(gains_raw["beta"]))
        field_name = "nussbaum"
        nussbaum = nussbaum_from_name(d.get("nussbaum", ThetaSqSin.name))
        field_name = "k"
        k_raw = d.get("k")
        k = None if k_raw is None else tuple(None if c is None else tuple(float(x) for x in c)
                                             for c in k_raw)
        field_name = "init"
        ini = d["init"]
        init = InitialConditions(
            x=tuple(tuple(float(v) for v in x) for x in ini["x"]),
            r=_opt_tuple(ini.get("r")),
            v=_opt_tuple(ini.get("v")),
            theta=_opt_tuple(ini.get("theta")),
        )
        field_name = "events"
        events = tuple(_event_from_dict(e) for e in d.get("events", []))
        field_name = "output"
        out = d.get("output") or {}
        field_name = "<scenario>"
        sc = Scenario(
            graph=graph, agents=agents, costs=costs, init=init,
            mode=d.get("mode", OFFLINE), eps=float(d.get("eps", 1.0)), gains=gains,
            nussbaum=nussbaum, k=k, t_end=float(d.get("t_end", 45.0)), h=float(d.get("h", 1e-3)),
            record_every=int(out.get("record_every", 10)), events=events,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFileError(f"field {field_name!r}: {type(exc).__name__}: {exc}") from exc
    return ScenarioFile(sc, name=d.get("name", ""), description=d.get("description", ""),
                        output_dir=(d.get("output") or {}).get("directory"))


def loads(text: str) -> ScenarioFile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(d)


def dumps(sf: ScenarioFile) -> str:
    return json.dumps(to_dict(sf), indent=2) + "\n"


def load(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{path}: {exc.strerror}") from exc
    try:
        return loads(text)
    except ScenarioFileError as exc:
        raise ScenarioFileError(f"{path}: {exc}") from exc


def save(sf: ScenarioFile, path) -> Path:
    path = Path(path)
    path.write_text(dumps(sf))
    return path


# Gains for the built-in examples. The bounds from lemma1_gains are far
# larger (beta ~ 1e4 to 2e5) and would force h below 1e-4.
BUILTIN_GAINS = GainSchedule(alpha=2.0, beta=20.0)


def example1() -> ScenarioFile:
    y0 = (-3.0, -2.0, 0.0, -1.0, 1.0, 4.0, 2.0, 5.0)
    b = (-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0)
    sc = Scenario(
        graph=build_digraph(8, [(j, i, 1.0) for j, i in FIG1_EDGES]),
        agents=tuple(AgentDynamics(2, bi) for bi in b),
        costs=tuple(Quadratic(1.0, y) for y in y0),
        init=InitialConditions(x=tuple((y, 0.0) for y in y0)),
        mode=OFFLINE,
        eps=1.0,
        gains=BUILTIN_GAINS,
        nussbaum=ThetaSqSin(),
        k=((1.0,),) * 8,
        t_end=45.0,
        h=1e-3,
        record_every=10,
        events=(Event(15.0, IsolateNode(8)), Event(30.0, RestoreGraph())),
    )
    return ScenarioFile(sc, name="example1",
                        description="Average consensus of eight double integrators with mixed "
                                    "control directions; node 8 cut off on [15, 30) s.")


def example2() -> ScenarioFile:
    orders = (1, 2, 3, 4, 1, 2, 3, 4)
    k_by_order = {1: (), 2: (1.0,), 3: (1.0, 2.0), 4: (1.0, 3.0, 3.0)}
    sc = Scenario(
        graph=build_digraph(8, [(j, i, 1.0) for j, i in FIG1_EDGES]),
        agents=tuple(AgentDynamics(m, -1.0) for m in orders),
        costs=tuple(example2_costs()),
        init=InitialConditions(x=tuple((0.0,) * m for m in orders)),
        mode=ONLINE,
        eps=0.5,
        gains=BUILTIN_GAINS,
        nussbaum=ExpSqSin(),
        k=tuple(k_by_order[m] for m in orders),
        t_end=45.0,
        h=1e-3,
        record_every=10,
        events=(Event(15.0, Disturbance(10.0, 1.0, 15.0, 30.0)),),
    )
    return ScenarioFile(sc, name="example2",
                        description="Optimal consensus of heterogeneous chains (orders 1-4) with "
                                    "real-time gradients; 10 sin(t) input disturbance on [15, 30] s.")


BUILTIN = {1: example1, 2: example2}


def builtin(number: int) -> ScenarioFile:
    try:
        return BUILTIN[number]()
    except KeyError:
        raise ValueError(f"unknown example {number}; choose one of {sorted(BUILTIN)}") from None
