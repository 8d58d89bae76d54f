# -*- coding: utf-8 -*-
"""The three benchmarked models as smooth objective + homogeneous rows + box.
________________________________________________________________
Description:

  edge   x (n x K)           sum_E (|x_i - x_j|^2 - d^2)^2, centroid rows
  cycle  y (m x K)           sum_E (|y_e|^2 - d^2)^2, one row per basis
                             cycle and dimension
  euler  x (n x K), y (m x K) same objective as cycle; per dimension the
                             aggregated Euler row, m coupling rows
                             x_tail - x_head - y_e = 0 and a centroid row

Variables live in one flat vector: the x block first (x[i, k] at
i*K + k), then the y block (y[e, k] at n*K + e*K + k). Every row acts on
one dimension with the same coefficients for all k, so the rows are
stored once per dimension (`row_block`) and the full matrix is
kron(row_block, I_K).
________________________________________________________________
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import sparse

from cycledgp.graph import (
    ArcSet,
    CycleBasis,
    EulerStructure,
    WeightedGraph,
    incidence_matrix,
    orient,
)

log = logging.getLogger(__name__)


class FormulationKind(str, Enum):
    EDGE = "edge"
    CYCLE = "cycle"
    EULER = "euler"

    def __str__(self):
        return self.value


# ==================================================
# Layout
# ==================================================
@dataclass(frozen=True)
class VariableLayout:
    n: int
    m: int
    K: int
    has_x: bool
    has_y: bool

    @property
    def x_count(self) -> int:
        return self.n * self.K if self.has_x else 0

    @property
    def y_offset(self) -> int:
        return self.x_count

    @property
    def size(self) -> int:
        return self.x_count + (self.m * self.K if self.has_y else 0)

    @property
    def columns(self) -> int:
        """Variables per dimension."""
        return self.size // self.K

    def x_index(self, i, k) -> int:
        return i * self.K + k

    def y_index(self, e, k) -> int:
        return self.y_offset + e * self.K + k

    def x_of(self, z) -> np.ndarray:
        if not self.has_x:
            raise ValueError("layout has no x block")
        return np.asarray(z)[: self.x_count].reshape(self.n, self.K)

    def y_of(self, z) -> np.ndarray:
        if not self.has_y:
            raise ValueError("layout has no y block")
        return np.asarray(z)[self.y_offset :].reshape(self.m, self.K)


@dataclass(frozen=True, eq=False)
class PointAssignment:
    """A flat variable vector together with the layout that reads it."""

    layout: VariableLayout
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != self.layout.size:
            raise ValueError(
                "point has {} values, layout needs {}".format(len(values), self.layout.size)
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_blocks(cls, layout: VariableLayout, x=None, y=None) -> "PointAssignment":
        values = np.zeros(layout.size)
        if layout.has_x:
            if x is None:
                raise ValueError("layout needs an x block")
            values[: layout.x_count] = np.asarray(x, dtype=float).reshape(-1)
        if layout.has_y:
            if y is None:
                raise ValueError("layout needs a y block")
            values[layout.y_offset :] = np.asarray(y, dtype=float).reshape(-1)
        return cls(layout, values)

    def __len__(self):
        return len(self.values)

    @property
    def x(self) -> np.ndarray:
        return self.layout.x_of(self.values)

    @property
    def y(self) -> np.ndarray:
        return self.layout.y_of(self.values)


# ==================================================
# Formulation
# ==================================================
@dataclass(frozen=True, eq=False)
class FormulationInstance:
    kind: FormulationKind
    graph: WeightedGraph
    arcs: ArcSet
    layout: VariableLayout
    row_block: sparse.csr_matrix
    projection_rows: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.layout.size

    @property
    def n_rows(self) -> int:
        return self.row_block.shape[0] * self.layout.K

    @cached_property
    def constraints(self) -> sparse.csr_matrix:
        """Full row matrix A with A z = 0; row r*K + k is row r in dimension k."""
        return sparse.kron(self.row_block, sparse.identity(self.layout.K), format="csr")

    @cached_property
    def _incidence(self) -> sparse.csr_matrix:
        return incidence_matrix(self.graph, self.arcs)

    def point(self, z) -> PointAssignment:
        return PointAssignment(self.layout, z)

    def residuals(self, z) -> np.ndarray:
        """Row values A z, ordered as `constraints`."""
        Z = np.asarray(z, dtype=float).reshape(self.layout.columns, self.layout.K)
        return np.asarray(self.row_block @ Z).ravel()

    def _edge_terms(self, z):
        d2 = self.graph.weights ** 2
        if self.kind is FormulationKind.EDGE:
            X = self.layout.x_of(z)
            diff = X[self.arcs.tail] - X[self.arcs.head]
        else:
            diff = self.layout.y_of(z)
        return diff, np.einsum("ek,ek->e", diff, diff) - d2

    def objective(self, z) -> float:
        _, r = self._edge_terms(z)
        return float(r @ r)

    def value_and_gradient(self, z) -> tuple[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        diff, r = self._edge_terms(z)
        scaled = 4.0 * r[:, None] * diff
        grad = np.zeros(self.size)
        if self.kind is FormulationKind.EDGE:
            grad[: self.layout.x_count] = np.asarray(self._incidence @ scaled).ravel()
        else:
            grad[self.layout.y_offset :] = scaled.ravel()
        return float(r @ r), grad

    def gradient(self, z) -> np.ndarray:
        return self.value_and_gradient(z)[1]


def _values(p):
    return p.values if isinstance(p, PointAssignment) else np.asarray(p, dtype=float)


def eval_objective(f: FormulationInstance, p) -> float:
    return f.objective(_values(p))


def eval_gradient(f: FormulationInstance, p) -> np.ndarray:
    return f.gradient(_values(p))


# ==================================================
# Builders
# ==================================================
def _x_bound(g: WeightedGraph) -> float:
    # a path laid out straight spans at most sum(d); centred, half of it
    return 0.5 * float(g.weights.sum())


def _y_bounds(g: WeightedGraph):
    upper = np.repeat(g.weights, g.K)
    return -upper, upper.copy()


def _frozen(*arrays):
    for array in arrays:
        array.setflags(write=False)


def build_edge(g: WeightedGraph) -> FormulationInstance:
    a = orient(g)
    layout = VariableLayout(g.n, g.m, g.K, has_x=True, has_y=False)
    rows = sparse.csr_matrix(np.ones((1, g.n)))
    bound = _x_bound(g)
    lower = np.full(layout.size, -bound)
    upper = np.full(layout.size, bound)
    mask = np.ones(1, dtype=bool)
    _frozen(lower, upper, mask)
    return FormulationInstance(FormulationKind.EDGE, g, a, layout, rows, mask, lower, upper)


def build_cycle(g: WeightedGraph, a: ArcSet, basis: CycleBasis) -> FormulationInstance:
    layout = VariableLayout(g.n, g.m, g.K, has_x=False, has_y=True)
    rows = basis.matrix(g.m)
    lower, upper = _y_bounds(g)
    mask = np.ones(rows.shape[0], dtype=bool)
    _frozen(lower, upper, mask)
    log.debug("cycle formulation: %d variables, %d rows", layout.size, rows.shape[0] * g.K)
    return FormulationInstance(FormulationKind.CYCLE, g, a, layout, rows, mask, lower, upper)


def build_euler(g: WeightedGraph, a: ArcSet, es: EulerStructure) -> FormulationInstance:
    """Per dimension: row 0 is the aggregated Euler row, rows 1..m couple x
    and y, the last row fixes the centroid."""
    n, m = g.n, g.m
    layout = VariableLayout(n, m, g.K, has_x=True, has_y=True)
    euler_row = sparse.hstack(
        [sparse.csr_matrix((1, n)), sparse.csr_matrix(np.asarray(es.net_coefficients, dtype=float)[None, :])]
    )
    coupling = sparse.hstack(
        [incidence_matrix(g, a).T, -sparse.identity(m)]
    )
    centroid = sparse.hstack([sparse.csr_matrix(np.ones((1, n))), sparse.csr_matrix((1, m))])
    rows = sparse.vstack([euler_row, coupling, centroid], format="csr")

    # the Euler row is a signed sum of coupling rows; the projector leaves it out
    mask = np.ones(rows.shape[0], dtype=bool)
    mask[0] = False

    bound = _x_bound(g)
    y_lower, y_upper = _y_bounds(g)
    lower = np.concatenate([np.full(layout.x_count, -bound), y_lower])
    upper = np.concatenate([np.full(layout.x_count, bound), y_upper])
    _frozen(lower, upper, mask)
    log.debug("euler formulation: %d variables, %d rows", layout.size, rows.shape[0] * g.K)
    return FormulationInstance(FormulationKind.EULER, g, a, layout, rows, mask, lower, upper)
