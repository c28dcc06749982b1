import csv
import time

import numpy as np
import pytest

from optcon import scenarios
from optcon.graph import fig1_graph
from optcon.sim import run_scenario

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fig1():
    return fig1_graph()


@pytest.fixture(scope="session")
def example1_run():
    sc = scenarios.example1().scenario
    t0 = time.perf_counter()
    trace = run_scenario(sc)
    return trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def example2_run():
    sc = scenarios.example2().scenario
    t0 = time.perf_counter()
    trace = run_scenario(sc)
    return trace, time.perf_counter() - t0


def read_trace_csv(path):
    """Test-side reader for the exported trace: dict of (samples, agents) arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_agents = max(int(r[1]) for r in body)
    data = np.array([[float(x) for x in r] for r in body])
    out = {"t": data[::n_agents, 0]}
    for col, name in enumerate(header):
        if name in ("t", "agent"):
            continue
        out[name] = data[:, col].reshape(-1, n_agents)
    return out
