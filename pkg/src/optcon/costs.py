"""Scalar strongly convex local costs with closed-form gradients.

Each cost carries the strong-convexity constant ``mu`` and the gradient
Lipschitz constant ``lipschitz`` it is declared with. For the three
non-quadratic families these are the conservative bounds (1, 3); their true
curvature lies in roughly [1.998, 2.1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence, runtime_checkable

import numpy as np
from scipy.optimize import brentq


@runtime_checkable
class CostFunction(Protocol):
    mu: float
    lipschitz: float

    def value(self, y: float) -> float: ...

    def grad(self, y: float) -> float: ...


def _finite(y: float) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise ValueError(f"cost evaluated at non-finite point {y!r}")
    return y


@dataclass(frozen=True)
class Quadratic:
    """c * (y - center)**2."""

    c: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"quadratic weight must be positive, got {self.c}")

    @property
    def mu(self) -> float:
        return 2.0 * self.c

    @property
    def lipschitz(self) -> float:
        return 2.0 * self.c

    def value(self, y):
        y = _finite(y)
        return self.c * (y - self.center) ** 2

    def grad(self, y):
        y = _finite(y)
        return 2.0 * self.c * (y - self.center)


@dataclass(frozen=True)
class SqrtRatio:
    """y**2 / (20 sqrt(y**2 + 1)) + y**2."""

    mu: float = 1.0
    lipschitz: float = 3.0

    def value(self, y):
        y = _finite(y)
        return y * y / (20.0 * math.sqrt(y * y + 1.0)) + y * y

    def grad(self, y):
        y = _finite(y)
        s2 = y * y + 1.0
        return y * (y * y + 2.0) / (20.0 * s2 * math.sqrt(s2)) + 2.0 * y


@dataclass(frozen=True)
class LogRatio:
    """y**2 / (80 ln(y**2 + 2)) + (y - 5)**2."""

    mu: float = 1.0
    lipschitz: float = 3.0

    def value(self, y):
        y = _finite(y)
        return y * y / (80.0 * math.log(y * y + 2.0)) + (y - 5.0) ** 2

    def grad(self, y):
        y = _finite(y)
        q = y * y + 2.0
        ell = math.log(q)
        return (2.0 * y / ell - 2.0 * y ** 3 / (q * ell * ell)) / 80.0 + 2.0 * (y - 5.0)


@dataclass(frozen=True)
class SoftPlusPair:
    """ln(exp(-0.05 y) + exp(0.05 y)) + y**2."""

    mu: float = 1.0
    lipschitz: float = 3.0

    def value(self, y):
        y = _finite(y)
        return float(np.logaddexp(-0.05 * y, 0.05 * y)) + y * y

    def grad(self, y):
        y = _finite(y)
        return 0.05 * math.tanh(0.05 * y) + 2.0 * y


CATALOG = {
    "quadratic": Quadratic,
    "sqrt_ratio": SqrtRatio,
    "log_ratio": LogRatio,
    "softplus_pair": SoftPlusPair,
}
_NAMES = {cls: name for name, cls in CATALOG.items()}


def cost_to_dict(entry) -> dict:
    out = {"type": _NAMES[type(entry)]}
    if isinstance(entry, Quadratic):
        out.update(c=entry.c, center=entry.center)
    return out


def cost_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in CATALOG:
        raise ValueError(f"unknown cost type {kind!r}; expected one of {sorted(CATALOG)}")
    return CATALOG[kind](**d)


def eval_cost(entry, y: float) -> float:
    return entry.value(y)


def eval_grad(entry, y: float) -> float:
    return entry.grad(y)


@dataclass
class GradCheckReport:
    checked: int = 0
    failures: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def grad_check(entry, samples: Iterable[float], step: float = 1e-5, tol: float = 1e-6,
               grad: Callable[[float], float] | None = None) -> GradCheckReport:
    """Compare the analytic gradient against a central difference.

    A sample fails when ``|analytic - fd| > tol * max(1, |analytic|)``.
    Failures are recorded as ``(y, analytic, fd)``. ``grad`` overrides the
    entry's own gradient, which is how tests inject a faulty one.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    grad = grad or entry.grad
    report = GradCheckReport()
    for y in samples:
        y = float(y)
        g = grad(y)
        fd = (entry.value(y + step) - entry.value(y - step)) / (2.0 * step)
        report.checked += 1
        if abs(g - fd) > tol * max(1.0, abs(g)):
            report.failures.append((y, g, fd))
    return report


class BracketError(ValueError):
    pass


def global_minimizer(entries: Sequence, search_limit: float = 1e8, tol: float = 1e-8) -> float:
    """Root of the aggregate gradient, found by bracketing then Brent's method.

    The bracket grows geometrically from [-1, 1] until the aggregate gradient
    changes sign or ``search_limit`` is exceeded.
    """
    if not entries:
        raise ValueError("need at least one cost")
    for e in entries:
        if not e.mu > 0:
            raise ValueError(f"cost {e!r} is not strongly convex")

    def total(y):
        return math.fsum(e.grad(y) for e in entries)

    lo, hi = -1.0, 1.0
    while total(lo) > 0 or total(hi) < 0:
        if hi >= search_limit:
            raise BracketError(f"no sign change of the aggregate gradient in [{-search_limit}, {search_limit}]")
        lo, hi = 2.0 * lo, 2.0 * hi
    if total(lo) == 0:
        return lo
    if total(hi) == 0:
        return hi
    y = brentq(total, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(total(y)) > tol:
        # brentq stops on the bracket width; finish with a few bisections on the residual
        a, b = lo, hi
        for _ in range(200):
            y = 0.5 * (a + b)
            g = total(y)
            if abs(g) <= tol:
                break
            a, b = (y, b) if g < 0 else (a, y)
    return y


def aggregate_params(entries: Sequence) -> tuple[float, float]:
    """(min mu, max lipschitz) over the entries."""
    if not entries:
        raise ValueError("need at least one cost")
    return min(e.mu for e in entries), max(e.lipschitz for e in entries)


def example2_costs() -> list:
    fams = [Quadratic(1.0, 8.0), SqrtRatio(), LogRatio(), SoftPlusPair()]
    return fams + fams
