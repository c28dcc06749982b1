"""Weighted digraphs, Laplacians and the spectrum of Sym(L).

Edges are written ``(j, i, w)`` meaning node ``i`` hears node ``j`` with
weight ``w``, which puts ``w`` at ``weights[i, j]``. Node labels are 1-based
at the API boundary and 0-based inside the arrays.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Raised for malformed edges or graphs that fail the topology checks."""


@dataclass(frozen=True, eq=False)
class Digraph:
    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.n < 1 or w.shape != (self.n, self.n):
            raise GraphError(f"weights must be {self.n}x{self.n}, got {w.shape}")
        if np.any(np.diag(w) != 0):
            raise GraphError("self-loops are not allowed (a_ii must be 0)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise GraphError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.n, self.weights.tobytes()))

    def edges(self) -> list[tuple[int, int, float]]:
        """Edge list ``(from, to, weight)`` with 1-based labels, sorted by (to, from)."""
        rows, cols = np.nonzero(self.weights)
        return [(int(j) + 1, int(i) + 1, float(self.weights[i, j])) for i, j in zip(rows, cols)]

    def in_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def out_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    def isolate(self, node: int) -> "Digraph":
        """Copy with every link touching ``node`` (1-based) removed."""
        if not 1 <= node <= self.n:
            raise GraphError(f"node {node} out of range 1..{self.n}")
        w = self.weights.copy()
        w[node - 1, :] = 0.0
        w[:, node - 1] = 0.0
        return Digraph(self.n, w)

    def subgraph(self, nodes: Iterable[int]) -> "Digraph":
        """Induced subgraph on the given 1-based nodes, relabelled in order."""
        idx = [k - 1 for k in nodes]
        return Digraph(len(idx), self.weights[np.ix_(idx, idx)])


@dataclass(frozen=True)
class SpectralInfo:
    lambda2: float
    lambdaN: float
    lambda1: float = 0.0


def build_digraph(n: int, edges: Iterable[tuple[int, int, float]]) -> Digraph:
    """Build a digraph on ``n`` nodes from ``(from, to, weight)`` triples.

    Repeated edges are rejected rather than summed, since a silent double
    weight would break weight balance.
    """
    if n < 1:
        raise GraphError(f"node count must be >= 1, got {n}")
    w = np.zeros((n, n))
    for edge in edges:
        src, dst, weight = edge
        if not (1 <= src <= n and 1 <= dst <= n):
            raise GraphError(f"edge {edge}: node index out of range 1..{n}")
        if src == dst:
            raise GraphError(f"edge {edge}: self-loop")
        if not weight > 0 or not np.isfinite(weight):
            raise GraphError(f"edge {edge}: weight must be positive and finite")
        if w[dst - 1, src - 1] != 0:
            raise GraphError(f"edge {edge}: duplicate edge")
        w[dst - 1, src - 1] = weight
    return Digraph(n, w)


def laplacian(g: Digraph) -> np.ndarray:
    """L = D_in - A. Row sums are zero by construction."""
    lap = -g.weights.copy()
    # diagonal of A is zero, so the row sum of -A is exactly -d_in
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def is_weight_balanced(g: Digraph, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(g.in_degrees() - g.out_degrees())) <= tol)


def _reachable(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        k = queue.popleft()
        for m in np.flatnonzero(adj[k]):
            m = int(m)
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def is_strongly_connected(g: Digraph) -> bool:
    """Forward and reverse reachability from the first node."""
    # weights[i, j] > 0 is a j -> i edge, so successors of j sit in column j
    succ = (g.weights.T > 0)
    pred = (g.weights > 0)
    everyone = set(range(g.n))
    return _reachable(succ, 0) == everyone and _reachable(pred, 0) == everyone


def check_assumption2(g: Digraph, tol: float = 1e-12) -> list[str]:
    """Names of the failed topology checks; empty when the graph qualifies."""
    failures = []
    if not is_weight_balanced(g, tol):
        failures.append("not weight-balanced")
    if not is_strongly_connected(g):
        failures.append("not strongly connected")
    return failures


def sym_spectrum(g: Digraph) -> SpectralInfo:
    """Second-smallest and largest eigenvalues of (L + L^T) / 2.

    Raises
    ------
    GraphError
        If the graph is not weight-balanced or not strongly connected.
    """
    failures = check_assumption2(g)
    if failures:
        raise GraphError("graph fails topology assumption: " + ", ".join(failures))
    lap = laplacian(g)
    eig = np.linalg.eigvalsh(0.5 * (lap + lap.T))
    if g.n == 1:
        return SpectralInfo(lambda2=0.0, lambdaN=0.0, lambda1=float(eig[0]))
    return SpectralInfo(lambda2=float(eig[1]), lambdaN=float(eig[-1]), lambda1=float(eig[0]))


# Interconnection graph used by both numerical examples, unit weights.
FIG1_EDGES: tuple[tuple[int, int], ...] = (
    (2, 1), (3, 2), (1, 3), (5, 3), (3, 4), (4, 5), (7, 5),
    (5, 6), (6, 7), (8, 7), (7, 8), (1, 8), (8, 1),
)


def fig1_graph() -> Digraph:
    return build_digraph(8, [(j, i, 1.0) for j, i in FIG1_EDGES])
