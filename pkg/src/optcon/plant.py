"""Integrator-chain agents and their Hurwitz-weighted error coordinates.

An agent of order ``n`` obeys ``y^(n) = b u`` with state
``x = (y, y', ..., y^(n-1))``. Given a reference ``r``, a scale ``eps > 0``
and coefficients ``k`` of a Hurwitz polynomial of degree ``n - 1``, the error
coordinates are

    z = (y - r, eps y', ..., eps^(n-2) y^(n-2))
    zeta = k . z + eps^(n-1) y^(n-1)

and they evolve as

    z'    = A1 z / eps + A2 zeta / eps + E1 r'
    zeta' = A3 z / eps + A4 zeta / eps + eps^(n-1) b u + E2 r'
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HURWITZ_MARGIN = 1e-9
LYAPUNOV_TOL = 1e-10


@dataclass(frozen=True)
class AgentDynamics:
    order: int
    b: float

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"chain order must be >= 1, got {self.order}")
        if self.b == 0 or not math.isfinite(self.b):
            raise ValueError(f"high-frequency gain must be finite and nonzero, got {self.b}")


def default_hurwitz_coeffs(n: int) -> tuple[float, ...]:
    """Coefficients k_1..k_{n-1} of (s + 1)^(n-1), lowest order first."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    m = n - 1
    return tuple(float(math.comb(m, j)) for j in range(m))


def companion(k) -> np.ndarray:
    """Companion matrix of s^m + k_m s^(m-1) + ... + k_1 (last row -k)."""
    k = np.asarray(k, dtype=float)
    m = k.size
    a = np.zeros((m, m))
    if m:
        a[:-1, 1:] = np.eye(m - 1)
        a[-1, :] = -k
    return a


def is_hurwitz(k) -> bool:
    k = np.asarray(k, dtype=float)
    if k.size == 0:
        return True
    roots = np.linalg.eigvals(companion(k))
    return bool(np.all(roots.real < -HURWITZ_MARGIN))


class LyapunovError(ValueError):
    pass


def solve_lyapunov(a: np.ndarray) -> np.ndarray:
    """Solve A^T P + P A = -2 I for symmetric positive definite P.

    The m*m unknowns are stacked column-wise and solved as one dense linear
    system built from Kronecker products.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m = a.shape[0]
    if a.shape != (m, m):
        raise LyapunovError(f"matrix must be square, got {a.shape}")
    if m == 0:
        return np.zeros((0, 0))
    if np.any(np.linalg.eigvals(a).real >= -HURWITZ_MARGIN):
        raise LyapunovError("matrix is not Hurwitz; no positive definite solution")
    eye = np.eye(m)
    op = np.kron(eye, a.T) + np.kron(a.T, eye)
    rhs = (-2.0 * eye).reshape(-1, order="F")
    try:
        p = np.linalg.solve(op, rhs).reshape(m, m, order="F")
    except np.linalg.LinAlgError as exc:
        raise LyapunovError(f"singular Lyapunov system: {exc}") from exc
    p = 0.5 * (p + p.T)
    if lyapunov_residual(a, p) > LYAPUNOV_TOL:
        raise LyapunovError(f"Lyapunov residual {lyapunov_residual(a, p):.3e} too large")
    if np.linalg.eigvalsh(p).min() <= 0:
        raise LyapunovError("solution is not positive definite")
    return p


def lyapunov_residual(a: np.ndarray, p: np.ndarray) -> float:
    m = a.shape[0]
    return float(np.max(np.abs(a.T @ p + p @ a + 2.0 * np.eye(m)))) if m else 0.0


@dataclass(frozen=True)
class TranslationData:
    n: int
    k: tuple[float, ...]
    eps: float
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: float
    E1: np.ndarray
    E2: float
    P: np.ndarray

    @property
    def zeta_weights(self) -> np.ndarray:
        """Row vector w with zeta = w . x - w[0] * r."""
        if self.n == 1:
            return np.ones(1)
        scales = self.eps ** np.arange(self.n)
        return np.append(self.k, 1.0) * scales


def build_translation(n: int, k=None, eps: float = 1.0) -> TranslationData:
    """Matrices of the error system for an order-``n`` agent.

    ``k`` defaults to the binomial coefficients of (s + 1)^(n-1).
    """
    if k is None:
        k = default_hurwitz_coeffs(n)
    k = tuple(float(c) for c in k)
    m = n - 1
    if len(k) != m:
        raise ValueError(f"order {n} needs {m} coefficients, got {len(k)}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not is_hurwitz(k):
        raise ValueError(f"coefficients {k} do not give a Hurwitz polynomial")
    if m == 0:
        empty = np.zeros((0, 0))
        return TranslationData(n, k, float(eps), empty, np.zeros((0, 1)), np.zeros((1, 0)),
                               0.0, np.zeros((0, 1)), -1.0, empty)
    kv = np.asarray(k)
    a1 = companion(kv)
    a2 = np.zeros((m, 1))
    a2[-1, 0] = 1.0
    km = kv[-1]
    a3 = np.empty((1, m))
    a3[0, 0] = -km * kv[0]
    a3[0, 1:] = kv[:-1] - km * kv[1:]
    # z_1 = y - r, so r' enters z_1' with a minus sign
    e1 = np.zeros((m, 1))
    e1[0, 0] = -1.0
    return TranslationData(n, k, float(eps), a1, a2, a3, float(km), e1, -float(kv[0]),
                           solve_lyapunov(a1))


def zeta(x, r: float, td: TranslationData) -> float:
    x = np.asarray(x, dtype=float)
    if x.size != td.n:
        raise ValueError(f"state length {x.size} does not match order {td.n}")
    w = td.zeta_weights
    return float(w @ x - w[0] * r)


def to_error_coords(x, r: float, td: TranslationData) -> tuple[np.ndarray, float]:
    """(z, zeta) from the chain state and the reference."""
    x = np.asarray(x, dtype=float)
    m = td.n - 1
    z = x[:m] * td.eps ** np.arange(m)
    if m:
        z[0] -= r
    return z, zeta(x, r, td)


def from_error_coords(z, zeta_value: float, r: float, td: TranslationData) -> np.ndarray:
    """Inverse of :func:`to_error_coords`."""
    z = np.asarray(z, dtype=float)
    m = td.n - 1
    if m == 0:
        return np.array([zeta_value + r])
    x = np.empty(td.n)
    x[:m] = z / td.eps ** np.arange(m)
    x[0] += r
    x[m] = (zeta_value - float(np.asarray(td.k) @ z)) / td.eps ** m
    return x


def error_coords_derivative(z, zeta_value: float, r_dot: float, b: float, u: float,
                            td: TranslationData) -> tuple[np.ndarray, float]:
    """Right-hand side of the error system in (z, zeta) form."""
    z = np.asarray(z, dtype=float)
    eps = td.eps
    drive = eps ** (td.n - 1) * b * u
    if td.n == 1:
        return np.zeros(0), drive - r_dot
    zd = (td.A1 @ z + td.A2[:, 0] * zeta_value) / eps + td.E1[:, 0] * r_dot
    zetad = float(td.A3[0] @ z + td.A4 * zeta_value) / eps + drive + td.E2 * r_dot
    return zd, zetad


def plant_derivative(x, dyn: AgentDynamics, u: float) -> np.ndarray:
    if not math.isfinite(u):
        raise ValueError(f"non-finite control input {u!r}")
    x = np.asarray(x, dtype=float)
    if x.size != dyn.order:
        raise ValueError(f"state length {x.size} does not match order {dyn.order}")
    xd = np.empty_like(x)
    xd[:-1] = x[1:]
    xd[-1] = dyn.b * u
    return xd
