# -*- coding: utf-8 -*-
"""Second stage of the cycle pipeline: positions x from edge vectors y.

Solves x_tail - x_head = y_e for every edge and dimension. The system may
be overdetermined, but a y that satisfies the cycle rows makes it
consistent, so every mode then reaches zero residual. Each connected
component is anchored at the origin by its centroid; how components sit
relative to each other cannot be recovered from y.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from cycledgp.errors import RecoveryError
from cycledgp.graph import ArcSet, WeightedGraph, connected_components, incidence_matrix

log = logging.getLogger(__name__)

IRLS_SMOOTHING = 1e-8
IRLS_ITERATIONS = 50


class RecoveryMode(str, Enum):
    LEAST_SQUARES = "ls"
    L1 = "l1"
    LP = "lp"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class Realization:
    """n x K positions; row i is vertex i."""

    coords: np.ndarray
    components: int = 1
    mode: RecoveryMode = RecoveryMode.LEAST_SQUARES

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or not np.all(np.isfinite(coords)):
            raise RecoveryError("realization must be a finite n x K matrix")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def disconnected(self) -> bool:
        return self.components > 1

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def K(self) -> int:
        return self.coords.shape[1]


def _coords(x):
    return x.coords if isinstance(x, Realization) else np.asarray(x, dtype=float)


# ==================================================
# Per-component solvers
# ==================================================
def _anchored_solve(D, weights, rhs):
    """min sum_e w_e (D^T x - rhs)_e^2 subject to sum(x) = 0, all columns of rhs.

    Uses the bordered system [[D W D^T, 1], [1^T, 0]] so the Laplacian's
    constant null vector is removed by the centroid row.
    """
    size = D.shape[0]
    laplacian = D @ sparse.diags(weights) @ D.T
    ones = sparse.csr_matrix(np.ones((size, 1)))
    bordered = sparse.bmat([[laplacian, ones], [ones.T, None]], format="csc")
    right = np.vstack([np.asarray(D @ (weights[:, None] * rhs)), np.zeros((1, rhs.shape[1]))])
    solution = splu(bordered).solve(right)
    return solution[:size]


def _least_squares(D, Y):
    return _anchored_solve(D, np.ones(D.shape[1]), Y)


def _least_l1_irls(D, Y):
    X = _least_squares(D, Y)
    for k in range(Y.shape[1]):
        column = X[:, k]
        for _ in range(IRLS_ITERATIONS):
            residual = np.asarray(D.T @ column).ravel() - Y[:, k]
            weights = 1.0 / np.sqrt(residual ** 2 + IRLS_SMOOTHING ** 2)
            updated = _anchored_solve(D, weights, Y[:, [k]])[:, 0]
            change = np.abs(updated - column).max(initial=0.0)
            column = updated
            if change <= 1e-12:
                break
        X[:, k] = column
    return X


def _least_l1_lp(D, Y):
    """min sum |D^T x - y| as an LP in (x, t): -t <= D^T x - y <= t, sum x = 0."""
    size, edges = D.shape
    Dt = sparse.csr_matrix(D.T)
    identity = sparse.identity(edges, format="csr")
    A_ub = sparse.vstack([sparse.hstack([Dt, -identity]), sparse.hstack([-Dt, -identity])], format="csr")
    A_eq = sparse.hstack([sparse.csr_matrix(np.ones((1, size))), sparse.csr_matrix((1, edges))], format="csr")
    cost = np.concatenate([np.zeros(size), np.ones(edges)])
    bounds = [(None, None)] * size + [(0, None)] * edges
    X = np.zeros((size, Y.shape[1]))
    for k in range(Y.shape[1]):
        b_ub = np.concatenate([Y[:, k], -Y[:, k]])
        result = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[0.0], bounds=bounds, method="highs")
        if not result.success:
            raise RecoveryError("l1 recovery LP failed in dimension {}: {}".format(k, result.message))
        X[:, k] = result.x[:size]
    return X


_SOLVERS = {
    RecoveryMode.LEAST_SQUARES: _least_squares,
    RecoveryMode.L1: _least_l1_irls,
    RecoveryMode.LP: _least_l1_lp,
}


# ==================================================
# Public
# ==================================================
def recover_realization(g: WeightedGraph, a: ArcSet, y, mode="ls") -> Realization:
    mode = RecoveryMode(mode)
    y = np.asarray(y, dtype=float)
    if y.shape != (g.m, g.K):
        raise RecoveryError("y has shape {}, expected {}".format(y.shape, (g.m, g.K)))
    if not np.all(np.isfinite(y)):
        raise RecoveryError("y has non-finite entries")

    components, labels = connected_components(g)
    D = incidence_matrix(g, a).tocsc()
    coords = np.zeros((g.n, g.K))
    edge_labels = labels[a.tail]
    for c in range(components):
        vertices = np.flatnonzero(labels == c)
        edges = np.flatnonzero(edge_labels == c)
        if len(edges) == 0:
            continue
        block = D[:, edges][vertices, :]
        coords[vertices] = _SOLVERS[mode](block, y[edges])
    if components > 1:
        log.info("recovered %d components independently; relative placement is arbitrary", components)
    return Realization(coords, components, mode)


def residual_check(g: WeightedGraph, a: ArcSet, x, y) -> tuple[float, float]:
    """(max, mean) of |x_tail - x_head - y_e| over all edges and dimensions."""
    residual = np.abs(_coords(x)[a.tail] - _coords(x)[a.head] - np.asarray(y, dtype=float))
    if residual.size == 0:
        return 0.0, 0.0
    return float(residual.max()), float(residual.mean())
