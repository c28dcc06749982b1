"""Command-line front end: ``optcon check|run|oracle|scaffold``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from optcon import analysis, scenarios
from optcon.controller import lemma1_gains
from optcon.costs import aggregate_params, global_minimizer, grad_check
from optcon.graph import check_assumption2, sym_spectrum
from optcon.plant import default_hurwitz_coeffs, is_hurwitz
from optcon.sim import ONLINE, BlowUpError, run_scenario, same_sign

log = logging.getLogger("optcon")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BLOWUP = 3

GRAD_SAMPLES = np.linspace(-10.0, 10.0, 41)


@dataclass
class CheckReport:
    ok: bool = True
    lines: list[str] = field(default_factory=list)
    lambda2: float | None = None
    lambdaN: float | None = None

    def fail(self, msg: str):
        self.ok = False
        self.lines.append(f"FAIL  {msg}")

    def info(self, msg: str):
        self.lines.append(f"ok    {msg}")

    def warn(self, msg: str):
        self.lines.append(f"WARN  {msg}")


def check_scenario(sf: scenarios.ScenarioFile) -> CheckReport:
    sc = sf.scenario
    rep = CheckReport()

    failures = check_assumption2(sc.graph)
    if failures:
        for f in failures:
            rep.fail(f"graph is {f}")
    else:
        spec = sym_spectrum(sc.graph)
        rep.lambda2, rep.lambdaN = spec.lambda2, spec.lambdaN
        rep.info(f"graph weight-balanced and strongly connected; "
                 f"lambda2 = {spec.lambda2:.10g}, lambdaN = {spec.lambdaN:.10g}")

    for i, c in enumerate(sc.costs, start=1):
        if not (c.lipschitz >= c.mu > 0):
            rep.fail(f"cost {i}: need lipschitz >= mu > 0, got mu={c.mu}, lipschitz={c.lipschitz}")
        gc = grad_check(c, GRAD_SAMPLES)
        if not gc.ok:
            y, g, fd = gc.failures[0]
            rep.fail(f"cost {i}: gradient mismatch at y={y:g} (analytic {g:.6g}, difference {fd:.6g})")
    if rep.ok:
        rep.info(f"{len(sc.costs)} costs pass the gradient check")

    for i, dyn in enumerate(sc.agents, start=1):
        k = sc.coefficients(i - 1)
        k = default_hurwitz_coeffs(dyn.order) if k is None else k
        if len(k) != dyn.order - 1:
            rep.fail(f"agent {i}: order {dyn.order} needs {dyn.order - 1} coefficients, got {len(k)}")
        elif not is_hurwitz(k):
            rep.fail(f"agent {i}: coefficients {tuple(k)} are not Hurwitz")

    if sc.mode == ONLINE and not same_sign(sc.agents):
        rep.warn("real-time gradient mode with high-frequency gains of mixed sign")

    if rep.lambda2 is not None and rep.lambda2 > 0:
        lu, lb = aggregate_params(sc.costs)
        floor = lemma1_gains(lu, lb, sym_spectrum(sc.graph))
        rep.info(f"gain floor from convexity ({lu:g}, {lb:g}): alpha >= {floor.alpha:.6g}, "
                 f"beta >= {floor.beta:.6g}")
        if sc.gains is not None and (sc.gains.alpha < floor.alpha or sc.gains.beta < floor.beta):
            rep.warn(f"configured gains alpha={sc.gains.alpha:g}, beta={sc.gains.beta:g} are below "
                     f"the sufficient bound")
    return rep


def _load(path) -> scenarios.ScenarioFile | None:
    try:
        return scenarios.load(path)
    except scenarios.ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_check(args) -> int:
    sf = _load(args.file)
    if sf is None:
        return EXIT_FAIL
    rep = check_scenario(sf)
    for line in rep.lines:
        print(line)
    print("PASS" if rep.ok else "FAIL")
    return EXIT_OK if rep.ok else EXIT_FAIL


def run_file(path, out_dir, step=None, t_end=None) -> int:
    sf = _load(path)
    if sf is None:
        return EXIT_FAIL
    rep = check_scenario(sf)
    if not rep.ok:
        for line in rep.lines:
            print(line, file=sys.stderr)
        return EXIT_FAIL
    sc = sf.scenario
    changes = {}
    if step is not None:
        changes["h"] = step
        # keep the sampling period when the step changes
        changes["record_every"] = max(1, int(round(sc.record_every * sc.h / step)))
    if t_end is not None:
        changes["t_end"] = t_end
        changes["events"] = tuple(e for e in sc.events if e.time <= t_end)
    if changes:
        sc = dataclasses.replace(sc, **changes)

    out = Path(out_dir or sf.output_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    y_star = global_minimizer(sc.costs)
    status = EXIT_OK
    try:
        trace = run_scenario(sc)
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        trace = exc.trace
        status = EXIT_BLOWUP
    analysis.export_csv(trace, out / "trace.csv")
    (out / "plot.gp").write_text(analysis.plot_script("trace.csv", trace.n_agents, sf.name))
    if len(trace.times):
        report = analysis.metrics(trace, y_star)
        (out / "metrics.json").write_text(report.to_json())
        print(f"y* = {y_star:.10g}; final gap {report.final_optimality_gap:.3e}, "
              f"final consensus error {report.final_consensus_error:.3e}")
    print(f"wrote {out / 'trace.csv'}, {out / 'metrics.json'}, {out / 'plot.gp'}")
    return status


def cmd_run(args) -> int:
    target = Path(args.file)
    if target.is_dir():
        files = sorted(target.glob("*.json"))
        base = Path(args.out or "out")
        jobs = [(f, base / f.stem, args.step, args.t_end) for f in files]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
        return max(codes, default=EXIT_OK)
    return run_file(target, args.out, args.step, args.t_end)


def _run_job(job) -> int:
    return run_file(*job)


def cmd_oracle(args) -> int:
    sf = _load(args.file)
    if sf is None:
        return EXIT_FAIL
    costs = sf.scenario.costs
    try:
        y = global_minimizer(costs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    residual = sum(c.grad(y) for c in costs)
    print(f"y* = {y:.12g}")
    print(f"aggregate gradient residual = {residual:.3e}")
    return EXIT_OK


def cmd_scaffold(args) -> int:
    try:
        sf = scenarios.builtin(args.example)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        scenarios.save(sf, args.file)
    except OSError as exc:
        print(f"error: cannot write {args.file}: {exc.strerror}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wrote {args.file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optcon", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="validate a scenario file")
    c.add_argument("file")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="simulate a scenario file (or every *.json in a directory)")
    r.add_argument("file")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--step", type=float, default=None, help="integration step h in seconds")
    r.add_argument("--t-end", type=float, default=None, help="final time in seconds")
    r.add_argument("--jobs", type=int, default=1, help="parallel runs for a directory")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="print the minimiser of the summed costs")
    o.add_argument("file")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("scaffold", help="write a built-in example scenario")
    s.add_argument("example", type=int)
    s.add_argument("file")
    s.set_defaults(func=cmd_scaffold)
    return p


def main(argv=None) -> int:
    level = os.environ.get("OPTCON_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
