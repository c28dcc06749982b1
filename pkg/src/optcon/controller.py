"""Optimal signal generator, gain bounds and Nussbaum-type adaptive laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from optcon.graph import Digraph, SpectralInfo, laplacian


@dataclass(frozen=True)
class GainSchedule:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"gains must be positive, got alpha={self.alpha}, beta={self.beta}")


def lemma1_gains(l_under: float, l_bar: float, spec: SpectralInfo) -> GainSchedule:
    """Smallest alpha, beta allowed by the generator convergence bounds.

        alpha = max(1, 1/l_under, 2 l_bar^2 / (l_under lambda2))
        beta  = max(1, 1/lambda2, 6 alpha^2 lambdaN^2 / lambda2^2)
    """
    if not spec.lambda2 > 0:
        raise ValueError(f"lambda2 = {spec.lambda2} <= 0: graph is not strongly connected and balanced")
    if not (l_bar >= l_under > 0):
        raise ValueError(f"need l_bar >= l_under > 0, got ({l_under}, {l_bar})")
    lam2, lamn = spec.lambda2, spec.lambdaN
    alpha = max(1.0, 1.0 / l_under, 2.0 * l_bar ** 2 / (l_under * lam2))
    beta = max(1.0, 1.0 / lam2, 6.0 * alpha ** 2 * lamn ** 2 / lam2 ** 2)
    return GainSchedule(alpha, beta)


def generator_derivative(r, v, grads, graph, gains: GainSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Primal-dual generator flow.

    ``graph`` may be a :class:`Digraph` or a precomputed Laplacian. ``grads``
    holds each agent's gradient at r_i (analytic mode) or at y_i (real-time
    mode).
    """
    lap = laplacian(graph) if isinstance(graph, Digraph) else np.asarray(graph)
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    grads = np.asarray(grads, dtype=float)
    n = lap.shape[0]
    if not (r.shape == v.shape == grads.shape == (n,)):
        raise ValueError(f"expected length-{n} vectors, got r{r.shape}, v{v.shape}, grads{grads.shape}")
    lr = lap @ r
    r_dot = -gains.alpha * grads - gains.beta * lr - lap @ v
    v_dot = gains.alpha * gains.beta * lr
    return r_dot, v_dot


class NussbaumOverflow(OverflowError):
    def __init__(self, theta):
        super().__init__(f"Nussbaum gain overflows at theta={theta!r}")
        self.theta = theta


class ThetaSqSin:
    """theta^2 sin(theta)."""

    name = "theta_sq_sin"

    def __call__(self, theta):
        return np.square(theta) * np.sin(theta)

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return "ThetaSqSin()"


class ExpSqSin:
    """exp(theta^2) sin(theta), guarded against overflow."""

    name = "exp_sq_sin"
    # theta^2 may not exceed half of ln(largest double)
    max_theta_sq = 0.5 * math.log(np.finfo(float).max)

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        sq = np.square(th)
        if np.any(sq > self.max_theta_sq):
            raise NussbaumOverflow(float(np.max(np.abs(th))))
        out = np.exp(sq) * np.sin(th)
        return out if out.ndim else float(out)

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return "ExpSqSin()"


NUSSBAUM = {ThetaSqSin.name: ThetaSqSin, ExpSqSin.name: ExpSqSin}


def nussbaum_from_name(name: str):
    try:
        return NUSSBAUM[name]()
    except KeyError:
        raise ValueError(f"unknown Nussbaum function {name!r}; expected one of {sorted(NUSSBAUM)}") from None


def nussbaum_eval(fn, theta: float) -> float:
    return float(fn(theta))


def control_law(zeta: float, theta: float, fn) -> tuple[float, float]:
    """u = N(theta) zeta and theta' = zeta^2."""
    return nussbaum_eval(fn, theta) * zeta, zeta * zeta


@dataclass
class NussbaumProbe:
    theta_max: float
    window_ends: np.ndarray
    window_max: np.ndarray
    window_min: np.ndarray
    avg_max: float
    avg_min: float
    plus_avg_tail_min: float
    minus_avg_tail_min: float
    plus_over_minus_max: float
    minus_over_plus_max: float
    threshold: float = 10.0
    notes: list[str] = field(default_factory=list)

    @property
    def passes_sign_switching(self) -> bool:
        """Finite-range stand-in for limsup = +inf and liminf = -inf of the running mean."""
        return self.avg_max > self.threshold and self.avg_min < -self.threshold

    @property
    def passes_strengthened(self) -> bool:
        """Stand-in for both one-sided means diverging and each side dominating the other."""
        t = self.threshold
        return (self.passes_sign_switching
                and self.plus_avg_tail_min > t and self.minus_avg_tail_min > t
                and self.plus_over_minus_max > t and self.minus_over_plus_max > t)


def probe_nussbaum_property(fn, theta_max: float, window_count: int = 8,
                            step: float = 1e-3, threshold: float = 10.0) -> NussbaumProbe:
    """Integrate ``fn`` on [0, theta_max] and summarise its running averages.

    The mean ``I(theta)/theta`` with ``I`` the running integral is tracked over
    the whole grid, and its extremes are reported per window. One-sided
    integrals of the positive and negative parts are judged on the second half
    of the range, where the limits they stand in for should already show.
    """
    if not theta_max > 0:
        raise ValueError("theta_max must be positive")
    if window_count < 4:
        raise ValueError("window_count must be >= 4")
    npts = max(int(math.ceil(theta_max / step)), 16 * window_count) + 1
    theta = np.linspace(0.0, theta_max, npts)
    vals = np.asarray(fn(theta), dtype=float)
    if vals.shape != theta.shape:
        vals = np.full_like(theta, vals)
    integral = cumulative_trapezoid(vals, theta, initial=0.0)
    plus = cumulative_trapezoid(np.maximum(vals, 0.0), theta, initial=0.0)
    minus = cumulative_trapezoid(np.maximum(-vals, 0.0), theta, initial=0.0)

    avg = np.zeros_like(theta)
    avg[1:] = integral[1:] / theta[1:]
    ends = np.arange(1, window_count + 1) * theta_max / window_count
    w_max, w_min = [], []
    lo = 1
    for e in ends:
        hi = int(np.searchsorted(theta, e, side="right"))
        seg = avg[lo:hi] if hi > lo else avg[hi - 1:hi]
        w_max.append(seg.max())
        w_min.append(seg.min())
        lo = hi

    tail = theta >= 0.5 * theta_max
    with np.errstate(divide="ignore", invalid="ignore"):
        both = tail & (plus > 0) & (minus > 0)
        p_over_m = float(np.max(plus[both] / minus[both])) if both.any() else 0.0
        m_over_p = float(np.max(minus[both] / plus[both])) if both.any() else 0.0
    return NussbaumProbe(
        theta_max=theta_max,
        window_ends=ends,
        window_max=np.array(w_max),
        window_min=np.array(w_min),
        avg_max=float(avg[1:].max()),
        avg_min=float(avg[1:].min()),
        plus_avg_tail_min=float(np.min(plus[tail] / theta[tail])),
        minus_avg_tail_min=float(np.min(minus[tail] / theta[tail])),
        plus_over_minus_max=p_over_m,
        minus_over_plus_max=m_over_p,
        threshold=threshold,
    )
