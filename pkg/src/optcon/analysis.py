"""Metrics over simulation traces and trace export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from optcon.sim import Trace

CSV_HEADER = ("t", "agent", "y", "u", "theta", "r", "v", "zeta")


def consensus_error(trace: Trace) -> np.ndarray:
    """max_i |y_i - mean(y)| per sample."""
    y = trace.y
    return np.max(np.abs(y - y.mean(axis=1, keepdims=True)), axis=1)


def optimality_gap(trace: Trace, y_star: float) -> np.ndarray:
    """max_i |y_i - y_star| per sample."""
    return np.max(np.abs(trace.y - y_star), axis=1)


def fit_exponential_rate(times, values, floor: float = 1e-10) -> float:
    """Negated least-squares slope of log(values) against time.

    Points at or below ``floor`` are dropped before fitting.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 points above {floor:g} to fit a rate, got {int(keep.sum())}")
    slope, _ = np.polyfit(times[keep], np.log(values[keep]), 1)
    return float(-slope)


def default_fit_window(trace: Trace) -> tuple[float, float]:
    """Second half of the interval before the first event (or the whole run)."""
    later = [t for t in trace.event_times if t > trace.times[0]]
    end = min(later) if later else float(trace.times[-1])
    return 0.5 * end, end


@dataclass
class MetricsReport:
    y_star: float
    final_time: float
    final_values: list
    final_consensus_error: float
    final_optimality_gap: float
    max_optimality_gap: float
    fitted_rate: float | None
    fit_window: tuple
    max_abs_u: float
    max_theta: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def metrics(trace: Trace, y_star: float) -> MetricsReport:
    gap = optimality_gap(trace, y_star)
    t0, t1 = default_fit_window(trace)
    mask = trace.window(t0, t1)
    try:
        rate = fit_exponential_rate(trace.times[mask], gap[mask])
    except ValueError:
        rate = None
    return MetricsReport(
        y_star=float(y_star),
        final_time=float(trace.times[-1]),
        final_values=[float(v) for v in trace.y[-1]],
        final_consensus_error=float(consensus_error(trace)[-1]),
        final_optimality_gap=float(gap[-1]),
        max_optimality_gap=float(gap.max()),
        fitted_rate=rate,
        fit_window=(t0, t1),
        max_abs_u=float(np.max(np.abs(trace.u))),
        max_theta=float(np.max(trace.theta)),
    )


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def export_csv(trace: Trace, path) -> Path:
    """Write one row per (sample, agent), time-major, 17 significant digits."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for s, t in enumerate(trace.times):
                ts = _fmt(t)
                for i in range(trace.n_agents):
                    w.writerow((ts, i + 1, _fmt(trace.y[s, i]), _fmt(trace.u[s, i]),
                                _fmt(trace.theta[s, i]), _fmt(trace.r[s, i]),
                                _fmt(trace.v[s, i]), _fmt(trace.zeta[s, i])))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc.strerror}") from exc
    return path


def plot_script(csv_name: str, n_agents: int, title: str = "") -> str:
    """gnuplot script drawing y_i(t), u_i(t) and theta_i(t) from the trace CSV."""
    def series(col: str) -> str:
        c = CSV_HEADER.index(col) + 1
        parts = [f"'{csv_name}' skip 1 using 1:(column(2)=={i} ? column({c}) : 1/0) "
                 f"with lines title '{i}'" for i in range(1, n_agents + 1)]
        return "plot " + ", \\\n     ".join(parts)

    lines = [
        "# gnuplot script",
        "set datafile separator ','",
        "set terminal pngcairo size 900,1000",
        "set output 'trace.png'",
        "set multiplot layout 3,1" + (f" title '{title}'" if title else ""),
        "set xlabel 't (s)'",
        "set ylabel 'y_i'",
        series("y"),
        "set ylabel 'u_i'",
        series("u"),
        "set ylabel 'theta_i'",
        series("theta"),
        "unset multiplot",
    ]
    return "\n".join(lines) + "\n"
