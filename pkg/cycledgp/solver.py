# -*- coding: utf-8 -*-
"""Local minimization over {A z = 0} and the box, wrapped in MultiStart.
________________________________________________________________
Description:

  local_solve   projected limited-memory BFGS with Armijo backtracking.
                Every trial point goes through the feasibility map:
                affine projection, then clipping to the box, alternated
                until both hold; a radial shrink finishes the job when
                the alternation has not settled (rows are homogeneous and
                bounds symmetric, so shrinking keeps both).
  sample_start  uniform in the box, then projected onto the rows.
  multistart    seeded independent starts, optional joblib threads,
                best result by (objective, start index).

The constraint rows are never eliminated: the cycle model is solved in
y-space, with the rows enforced by orthogonal projection.
________________________________________________________________
"""
from __future__ import annotations

import logging
import threading
import time
import weakref
from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed, effective_n_jobs
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import sparse
from scipy.sparse.linalg import splu

from cycledgp.errors import SolverError
from cycledgp.formulations import FormulationInstance, PointAssignment

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


class SolverConfig(BaseModel):
    """MultiStart protocol parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    starts: int = Field(10, ge=1)
    max_iterations: int | None = Field(None, ge=1)
    gtol: float = Field(1e-8, gt=0)
    ftol: float = Field(1e-16, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    c1: float = Field(1e-4, gt=0, lt=1)
    backtrack: float = Field(0.5, gt=0, lt=1)
    max_backtracks: int = Field(40, ge=1)
    memory: int = Field(10, ge=1)
    n_jobs: int = 1
    projection: Literal["auto", "dense", "normal"] = "auto"
    dense_limit: int = Field(4_000_000, ge=0)

    @field_validator("n_jobs")
    @classmethod
    def _nonzero_jobs(cls, value):
        if value == 0:
            raise ValueError("n_jobs must be a positive count or negative (joblib style)")
        return value


@dataclass(frozen=True)
class StartRecord:
    index: int
    objective: float
    iterations: int
    converged: bool
    status: str
    message: str = ""


@dataclass(frozen=True, eq=False)
class LocalResult:
    point: PointAssignment
    objective: float
    iterations: int
    converged: bool
    status: str
    message: str = ""


@dataclass(frozen=True, eq=False)
class SolveResult:
    best_point: PointAssignment
    best_objective: float
    records: tuple[StartRecord, ...]
    wall_time: float
    target_reached: bool

    @property
    def starts_used(self) -> int:
        return len(self.records)


# ==================================================
# Projection
# ==================================================
class AffineProjector:
    """Orthogonal projector onto {Z : R Z = 0} for the per-dimension rows R.

    `dense` keeps an orthonormal basis of the row space from a pivoted QR
    (rank revealing, so dependent rows are harmless). `normal` solves
    R R^T lambda = R Z with a cached sparse LU and needs independent rows.

    `fixed` marks columns held at zero: they are zeroed and the rows are
    restricted to the remaining columns, which gives the projector onto
    {R Z = 0, Z[fixed] = 0}.
    """

    def __init__(self, rows, columns, K, method="auto", dense_limit=4_000_000, tol=1e-12, fixed=None):
        rows = sparse.csr_matrix(rows)
        self.fixed = np.zeros(columns, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
        if self.fixed.any():
            rows = (rows @ sparse.diags((~self.fixed).astype(float))).tocsr()
            rows.eliminate_zeros()
        rows = rows[np.flatnonzero(rows.getnnz(axis=1))]
        self.columns = columns
        self.K = K
        self._rows = rows
        self._basis = None
        self._solve = None
        if rows.shape[0] == 0:
            self.method = "identity"
        elif method == "dense" or (method == "auto" and rows.shape[0] * columns <= dense_limit):
            self._use_dense(tol)
        else:
            self.method = "normal"
            try:
                self._solve = splu((rows @ rows.T).tocsc()).solve
                accurate = self._self_check(tol)
            except RuntimeError:
                accurate = False
            if not accurate:
                log.warning("normal-equation projector inaccurate, switching to dense")
                self._use_dense(tol)

    def _use_dense(self, tol):
        q, r, _ = scipy.linalg.qr(self._rows.T.toarray(), mode="economic", pivoting=True)
        diagonal = np.abs(np.diag(r))
        scale = diagonal[0] if len(diagonal) else 0.0
        rank = int(np.count_nonzero(diagonal > tol * max(scale, 1.0)))
        self._basis = q[:, :rank]
        self.method = "dense"

    def _self_check(self, tol):
        sample = np.random.default_rng(0).standard_normal((self.columns, 1))
        projected = self._project(sample)
        residual = np.abs(self._rows @ projected).max()
        return residual <= max(tol * 1e3, 1e-10) * max(1.0, np.abs(sample).max())

    def _project(self, Z):
        pinned = self.fixed.any()
        if pinned:
            Z = np.where(self.fixed[:, None], 0.0, Z)
        if self.method == "identity":
            projected = Z.copy()
        elif self.method == "dense":
            projected = Z - self._basis @ (self._basis.T @ Z)
        else:
            multipliers = self._solve(np.asarray(self._rows @ Z))
            projected = Z - np.asarray(self._rows.T @ multipliers)
        if pinned:
            projected[self.fixed] = 0.0
        return projected

    def __call__(self, z) -> np.ndarray:
        Z = np.asarray(z, dtype=float).reshape(self.columns, self.K)
        return self._project(Z).ravel()


_projectors = weakref.WeakKeyDictionary()
_projectors_lock = threading.Lock()


def fixed_columns(f: FormulationInstance) -> np.ndarray:
    """Columns whose box is [0, 0] in every dimension (zero-length edges)."""
    shape = (f.layout.columns, f.layout.K)
    return np.all((f.lower.reshape(shape) >= 0) & (f.upper.reshape(shape) <= 0), axis=1)


def projector_for(f: FormulationInstance, method="auto", dense_limit=4_000_000, pin_fixed=False) -> AffineProjector:
    """Projector for f, built once per (formulation, method, limit, pinning).

    With `pin_fixed`, columns boxed to [0, 0] are held at zero as well.
    """
    fixed = fixed_columns(f) if pin_fixed else None
    if fixed is not None and not fixed.any():
        fixed = None
    key = (method, dense_limit, fixed is not None)
    with _projectors_lock:
        cached = _projectors.setdefault(f, {})
        if key not in cached:
            rows = f.row_block[np.flatnonzero(f.projection_rows)]
            cached[key] = AffineProjector(rows, f.layout.columns, f.layout.K, method, dense_limit, fixed=fixed)
            log.debug("%s projector for %s formulation (%d rows, %d fixed columns)", cached[key].method,
                      f.kind, rows.shape[0], 0 if fixed is None else int(fixed.sum()))
        return cached[key]


def _projector(f, cfg, pin_fixed=True):
    if cfg is None:
        return projector_for(f, pin_fixed=pin_fixed)
    return projector_for(f, cfg.projection, cfg.dense_limit, pin_fixed)


def project_affine(f: FormulationInstance, p, cfg: SolverConfig | None = None):
    """Euclidean projection of p onto {z : A z = 0}; same type as p."""
    project = _projector(f, cfg, pin_fixed=False)
    if isinstance(p, PointAssignment):
        return PointAssignment(p.layout, project(p.values))
    return project(p)


def _feasible(z, project, lower, upper, rounds=25, tol=1e-12):
    z = project(z)
    for _ in range(rounds):
        if np.all(z >= lower - tol) and np.all(z <= upper + tol):
            return z
        z = project(np.clip(z, lower, upper))
    # zero-width coordinates stay out of the shrink ratio
    free = upper > lower
    z = np.where(free, z, 0.0)
    magnitude = np.abs(z[free])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(magnitude > 0, upper[free] / magnitude, np.inf)
    return z * min(1.0, float(ratios.min(initial=np.inf)))


# ==================================================
# Local solver
# ==================================================
def _two_loop(gradient, s_history, y_history):
    q = gradient.copy()
    alphas = []
    for s, y in zip(reversed(s_history), reversed(y_history)):
        rho = 1.0 / (y @ s)
        alpha = rho * (s @ q)
        q -= alpha * y
        alphas.append((rho, alpha))
    if s_history:
        s, y = s_history[-1], y_history[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, alpha) in zip(zip(s_history, y_history), reversed(alphas)):
        beta = rho * (y @ q)
        q += (alpha - beta) * s
    return q


def local_solve(f: FormulationInstance, start, cfg: SolverConfig, trace=None) -> LocalResult:
    """Projected L-BFGS from `start`.

    Stops on objective <= ftol, projected-gradient infinity norm <= gtol,
    or max_iterations (default 5 * variable count). Accepted objective
    values never increase; when `trace` is a list they are appended to it.
    """
    project = _projector(f, cfg)
    lower, upper = f.lower, f.upper
    values = start.values if isinstance(start, PointAssignment) else np.asarray(start, dtype=float)
    max_iterations = cfg.max_iterations or 5 * f.size

    z = _feasible(values, project, lower, upper)
    value, grad = f.value_and_gradient(z)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        return LocalResult(f.point(z), float("inf"), 0, False, "aborted", "non-finite objective at start")
    if trace is not None:
        trace.append(value)
    pgrad = project(grad)
    s_history = deque(maxlen=cfg.memory)
    y_history = deque(maxlen=cfg.memory)

    status, message = "max-iterations", ""
    iterations = 0
    while iterations < max_iterations:
        if value <= cfg.ftol:
            status = "converged"
            break
        optimality = np.abs(z - np.clip(z - pgrad, lower, upper)).max(initial=0.0)
        if optimality <= cfg.gtol:
            status = "converged"
            break
        iterations += 1

        direction = -project(_two_loop(pgrad, s_history, y_history))
        slope = grad @ direction
        if not slope < 0:
            s_history.clear()
            y_history.clear()
            direction = -pgrad
            slope = grad @ direction
        step = 1.0 if s_history else min(1.0, 1.0 / max(np.linalg.norm(pgrad), 1e-300))

        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = _feasible(z + step * direction, project, lower, upper)
            trial_value, trial_grad = f.value_and_gradient(trial)
            if np.isfinite(trial_value) and trial_value <= value + cfg.c1 * (grad @ (trial - z)) \
                    and trial_value <= value:
                accepted = True
                break
            step *= cfg.backtrack

        if not accepted:
            if s_history:
                s_history.clear()
                y_history.clear()
                continue
            status = "stalled"
            break
        if not np.all(np.isfinite(trial_grad)):
            status, message = "aborted", "non-finite gradient at iteration {}".format(iterations)
            break

        trial_pgrad = project(trial_grad)
        s = trial - z
        y = trial_pgrad - pgrad
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_history.append(s)
            y_history.append(y)
        z, value, grad, pgrad = trial, trial_value, trial_grad, trial_pgrad
        if trace is not None:
            trace.append(value)

    if status == "aborted":
        return LocalResult(f.point(z), float("inf"), iterations, False, status, message)
    residual = np.abs(f.residuals(z)).max(initial=0.0)
    if residual > FEASIBILITY_TOL:
        log.warning("final iterate violates rows by %.2e, re-projecting", residual)
        z = _feasible(z, project, lower, upper)
        value = f.objective(z)
    return LocalResult(f.point(z), float(value), iterations, status == "converged", status, message)


def sample_start(f: FormulationInstance, rng: np.random.Generator, cfg: SolverConfig | None = None) -> PointAssignment:
    """Uniform in the box (standard normal where a bound is infinite), then
    projected onto the rows."""
    lower, upper = f.lower, f.upper
    finite = np.isfinite(lower) & np.isfinite(upper)
    low = np.where(finite, lower, 0.0)
    high = np.where(finite, upper, 0.0)
    raw = np.where(finite, rng.uniform(low, high), rng.standard_normal(f.size))
    return PointAssignment(f.layout, _projector(f, cfg)(raw))


# ==================================================
# MultiStart
# ==================================================
def _run_start(f, cfg, seed_sequence, index):
    rng = np.random.default_rng(seed_sequence)
    start = sample_start(f, rng, cfg)
    try:
        result = local_solve(f, start, cfg)
    except FloatingPointError as exc:
        result = LocalResult(start, float("inf"), 0, False, "aborted", str(exc))
    log.debug("start %d: objective %.3e after %d iterations (%s)",
              index, result.objective, result.iterations, result.status)
    return index, result


def multistart(f: FormulationInstance, cfg: SolverConfig) -> SolveResult:
    """cfg.starts local solves from seeded random starts, best kept.

    Start i always draws from the i-th child of SeedSequence(cfg.seed), and
    once a start reaches the objective target every later start is
    discarded, so the outcome does not depend on n_jobs.
    """
    began = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.starts)
    batch = max(1, effective_n_jobs(cfg.n_jobs))
    results = []
    with Parallel(n_jobs=cfg.n_jobs, prefer="threads") as parallel:
        for first in range(0, cfg.starts, batch):
            indices = range(first, min(first + batch, cfg.starts))
            if batch == 1:
                chunk = [_run_start(f, cfg, seeds[i], i) for i in indices]
            else:
                chunk = parallel(delayed(_run_start)(f, cfg, seeds[i], i) for i in indices)
            results.extend(sorted(chunk, key=lambda item: item[0]))
            hits = [i for i, r in results if r.status != "aborted" and r.objective <= cfg.ftol]
            if hits:
                results = [(i, r) for i, r in results if i <= hits[0]]
                break

    records = tuple(
        StartRecord(i, r.objective, r.iterations, r.converged, r.status, r.message) for i, r in results
    )
    usable = [(r.objective, i, r) for i, r in results if r.status != "aborted"]
    if not usable:
        raise SolverError(
            "all {} starts aborted: {}".format(len(records), "; ".join(sorted({r.message for r in records})))
        )
    best_objective, best_index, best = min(usable, key=lambda item: (item[0], item[1]))
    wall_time = time.perf_counter() - began
    log.info("%s multistart: best objective %.3e (start %d of %d) in %.2fs",
             f.kind, best_objective, best_index, len(records), wall_time)
    return SolveResult(best.point, best_objective, records, wall_time, best_objective <= cfg.ftol)
