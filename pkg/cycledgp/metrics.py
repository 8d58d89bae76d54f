# -*- coding: utf-8 -*-
"""Mean and largest distance error of a realization.

Errors are on distances, |‖x_i - x_j‖ - d_ij|, not on the squared
distances the objectives use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cycledgp.graph import WeightedGraph
from cycledgp.recovery import Realization


def _coords(x):
    return x.coords if isinstance(x, Realization) else np.asarray(x, dtype=float)


def edge_errors(x, g: WeightedGraph) -> np.ndarray:
    X = _coords(x)
    if X.shape != (g.n, g.K):
        raise ValueError("realization has shape {}, expected {}".format(X.shape, (g.n, g.K)))
    lengths = np.linalg.norm(X[g.edges[:, 0]] - X[g.edges[:, 1]], axis=1)
    return np.abs(lengths - g.weights)


def mde(x, g: WeightedGraph) -> float:
    errors = edge_errors(x, g)
    return float(errors.mean()) if len(errors) else 0.0


def lde(x, g: WeightedGraph) -> float:
    errors = edge_errors(x, g)
    return float(errors.max()) if len(errors) else 0.0


@dataclass(frozen=True, eq=False)
class QualityReport:
    mde: float
    lde: float
    objective: float
    edge_errors: np.ndarray


def quality(x, g: WeightedGraph, objective=0.0) -> QualityReport:
    errors = edge_errors(x, g)
    largest = float(errors.max()) if len(errors) else 0.0
    # a mean of equal values can round one ulp above them
    mean = min(float(errors.mean()), largest) if len(errors) else 0.0
    assert largest >= mean >= 0.0
    errors.setflags(write=False)
    return QualityReport(mean, largest, float(objective), errors)
