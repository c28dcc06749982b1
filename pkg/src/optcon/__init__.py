"""Distributed optimal consensus for integrator-chain agents with unknown control directions."""

from optcon.graph import Digraph, SpectralInfo, build_digraph, laplacian, sym_spectrum
from optcon.costs import (
    CostFunction,
    LogRatio,
    Quadratic,
    SoftPlusPair,
    SqrtRatio,
    global_minimizer,
)
from optcon.controller import ExpSqSin, GainSchedule, ThetaSqSin, lemma1_gains
from optcon.sim import BlowUpError, Scenario, Trace, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "CostFunction",
    "Digraph",
    "ExpSqSin",
    "GainSchedule",
    "LogRatio",
    "Quadratic",
    "Scenario",
    "SoftPlusPair",
    "SpectralInfo",
    "SqrtRatio",
    "ThetaSqSin",
    "Trace",
    "build_digraph",
    "global_minimizer",
    "laplacian",
    "lemma1_gains",
    "run_scenario",
    "sym_spectrum",
]
