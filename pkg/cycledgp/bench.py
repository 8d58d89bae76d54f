# -*- coding: utf-8 -*-
"""Experiment orchestration: instance generation, the three solve
pipelines, and wide MDE / LDE / CPU reports.
________________________________________________________________
Description:

  edge   multistart on the edge model, x read from the best point
  cycle  multistart on the cycle model, then x recovered from y
  euler  multistart on the Eulerian relaxation, x read from the best
         point; disconnected instances are skipped

With `decompose`, every block of the 1-decomposition is solved on its
own and the block realizations are glued by translation at the cut
vertices.

CPU is wall time of multistart (plus recovery for cycle); parsing,
graph constructions and reporting are not counted.
________________________________________________________________
"""
from __future__ import annotations

import logging
import time
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
import pydantic_core
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from cycledgp.errors import CycleDGPError, DisconnectedGraphError, ReportError
from cycledgp.formulations import FormulationKind, build_cycle, build_edge, build_euler
from cycledgp.graph import (
    WeightedGraph,
    connected_components,
    euler_structure,
    fundamental_cycle_basis,
    induced_differences,
    one_decomposition,
    orient,
    read_instance,
    spanning_forest,
    verify_cycle,
)
from cycledgp.metrics import quality
from cycledgp.recovery import Realization, RecoveryMode, recover_realization
from cycledgp.solver import SolverConfig, multistart

log = logging.getLogger(__name__)

FORMULATION_ORDER = (FormulationKind.CYCLE, FormulationKind.EULER, FormulationKind.EDGE)
RECORD_COLUMNS = [
    "instance", "m", "n", "formulation", "mde", "lde", "objective",
    "cpu", "starts", "seed", "status", "message",
]
SUMMARY_STATUS = "summary"
SUMMARY_LABELS = ("avg", "stdev", "|best|")
MEASURES = ("mde", "lde", "cpu")
TIE_TOL = 1e-12


class RecordStatus(str, Enum):
    OK = "ok"
    SKIPPED = "skipped-disconnected"
    FAILED = "failed"

    def __str__(self):
        return self.value


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON_LINES = "json-lines"


class GeneratorParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(ge=2)
    K: int = Field(3, ge=1)
    density: float = Field(0.5, gt=0, le=1)
    seed: int = Field(0, ge=0)
    name: str | None = None


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    instances: list[Path] = []
    generate: list[GeneratorParams] = []
    formulations: list[FormulationKind] = list(FORMULATION_ORDER)
    solver: SolverConfig = SolverConfig()
    recovery: RecoveryMode = RecoveryMode.LEAST_SQUARES
    decompose: bool = False
    n_jobs: int = 1
    output: Path | None = None
    format: ReportFormat = ReportFormat.CSV
    progress: bool = False


class BenchRecord(BaseModel):
    """One (instance, formulation) row: the MDE / LDE / CPU columns plus
    provenance. Metrics are None when the record was skipped or failed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    instance: str
    m: int
    n: int
    formulation: FormulationKind
    mde: float | None = None
    lde: float | None = None
    objective: float | None = None
    cpu: float | None = None
    starts: int = 0
    seed: int = 0
    status: RecordStatus = RecordStatus.OK
    message: str = ""


# ==================================================
# Instances
# ==================================================
def instance_name(params: GeneratorParams) -> str:
    if params.name:
        return params.name
    return "rand-n{}-K{}-p{:g}-s{}".format(params.n, params.K, params.density, params.seed)


def generate_instance(n, K, density, seed, name=None) -> WeightedGraph:
    """Random YES instance: points uniform in a cube of side n^(1/K), each
    pair an edge with probability `density`, plus a random spanning tree;
    weights are the exact distances, the points are kept as ground truth."""
    params = GeneratorParams(n=n, K=K, density=density, seed=seed, name=name)
    rng = np.random.default_rng(params.seed)
    points = rng.uniform(0.0, params.n ** (1.0 / params.K), size=(params.n, params.K))

    rows, cols = np.triu_indices(params.n, 1)
    keep = rng.random(len(rows)) < params.density
    pairs = set(zip(rows[keep].tolist(), cols[keep].tolist()))
    order = rng.permutation(params.n)
    for t in range(1, params.n):
        u, v = int(order[t]), int(order[rng.integers(0, t)])
        pairs.add((min(u, v), max(u, v)))

    edges = sorted(pairs)
    triples = [(u, v, float(np.linalg.norm(points[u] - points[v]))) for u, v in edges]
    return WeightedGraph.from_edges(params.n, params.K, triples, points, instance_name(params))


def _load_instances(spec: ExperimentSpec) -> list[WeightedGraph]:
    graphs = [read_instance(path) for path in spec.instances]
    graphs += [generate_instance(p.n, p.K, p.density, p.seed, p.name) for p in spec.generate]
    return graphs


# ==================================================
# Pipelines
# ==================================================
def _solve_pipeline(g: WeightedGraph, kind: FormulationKind, cfg: SolverConfig, recovery):
    """Returns (x, objective, cpu seconds, starts used)."""
    if kind is FormulationKind.EDGE:
        result = multistart(build_edge(g), cfg)
        return result.best_point.x, result.best_objective, result.wall_time, result.starts_used

    a = orient(g)
    if kind is FormulationKind.CYCLE:
        basis = fundamental_cycle_basis(g, a, spanning_forest(g))
        result = multistart(build_cycle(g, a, basis), cfg)
        began = time.perf_counter()
        realization = recover_realization(g, a, result.best_point.y, recovery)
        cpu = result.wall_time + time.perf_counter() - began
        return realization.coords, result.best_objective, cpu, result.starts_used

    result = multistart(build_euler(g, a, euler_structure(g, a)), cfg)
    return result.best_point.x, result.best_objective, result.wall_time, result.starts_used


def _solve_by_blocks(g: WeightedGraph, kind: FormulationKind, cfg: SolverConfig, recovery):
    """Solve every block alone, then translate blocks onto each other along
    the block-cut tree."""
    decomposition = one_decomposition(g)
    solved = []
    objective = cpu = 0.0
    starts = 0
    for block in decomposition.blocks:
        sub, vertices = g.subgraph(block.edges)
        x, block_objective, block_cpu, block_starts = _solve_pipeline(sub, kind, cfg, recovery)
        solved.append((vertices, x))
        objective += block_objective
        cpu += block_cpu
        starts += block_starts

    coords = np.zeros((g.n, g.K))
    placed = np.zeros(len(solved), dtype=bool)
    for root in range(len(solved)):
        if placed[root]:
            continue
        vertices, x = solved[root]
        coords[vertices] = x
        placed[root] = True
        queue = deque([root])
        while queue:
            b = queue.popleft()
            for cut in sorted(decomposition.blocks[b].vertices & decomposition.cut_vertices):
                for other in decomposition.blocks_at(cut):
                    if placed[other]:
                        continue
                    other_vertices, other_x = solved[other]
                    local = int(np.flatnonzero(other_vertices == cut)[0])
                    coords[other_vertices] = other_x + (coords[cut] - other_x[local])
                    placed[other] = True
                    queue.append(other)
    log.debug("glued %d blocks at %d cut vertices", len(solved), len(decomposition.cut_vertices))
    return coords, objective, cpu, starts


def solve_instance(g: WeightedGraph, kind, cfg: SolverConfig, recovery="ls", decompose=False):
    """Run one pipeline; returns (BenchRecord, Realization or None)."""
    kind = FormulationKind(kind)
    base = dict(instance=g.name or "unnamed", m=g.m, n=g.n, formulation=kind, seed=cfg.seed)
    pipeline = _solve_by_blocks if decompose else _solve_pipeline
    try:
        x, objective, cpu, starts = pipeline(g, kind, cfg, RecoveryMode(recovery))
        report = quality(x, g, objective)
    except DisconnectedGraphError as exc:
        status = RecordStatus.SKIPPED if kind is FormulationKind.EULER else RecordStatus.FAILED
        log.warning("%s / %s: %s (%s)", base["instance"], kind, status, exc)
        return BenchRecord(**base, status=status, message=str(exc)), None
    except CycleDGPError as exc:
        log.warning("%s / %s failed: %s", base["instance"], kind, exc)
        return BenchRecord(**base, status=RecordStatus.FAILED, message=str(exc)), None
    log.info("%s / %s: mde %.3e lde %.3e cpu %.2fs", base["instance"], kind, report.mde, report.lde, cpu)
    record = BenchRecord(
        **base, mde=report.mde, lde=report.lde, objective=report.objective, cpu=cpu, starts=starts
    )
    return record, Realization(x, connected_components(g)[0], RecoveryMode(recovery))


def _sort_key(record: BenchRecord):
    return record.instance, FORMULATION_ORDER.index(record.formulation)


def run_benchmark(spec: ExperimentSpec) -> list[BenchRecord]:
    graphs = _load_instances(spec)
    tasks = [(g, kind) for g in graphs for kind in spec.formulations]

    def run(task):
        g, kind = task
        return solve_instance(g, kind, spec.solver, spec.recovery, spec.decompose)[0]

    progress = tqdm(tasks, desc="solving", unit="run", disable=not spec.progress)
    if spec.n_jobs == 1:
        records = [run(task) for task in progress]
    else:
        records = Parallel(n_jobs=spec.n_jobs, prefer="threads")(delayed(run)(task) for task in progress)
    records = sorted(records, key=_sort_key)
    if spec.output is not None:
        write_report(records, spec.output, spec.format)
    return records


# ==================================================
# Reports
# ==================================================
def _usable(records):
    return [r for r in records if r.status is RecordStatus.OK]


def best_counts(records) -> dict[str, Counter]:
    """Per measure, how many instances each formulation was best on (ties
    credit every tied formulation)."""
    counts = {measure: Counter() for measure in MEASURES}
    by_instance = {}
    for record in _usable(records):
        by_instance.setdefault(record.instance, []).append(record)
    for group in by_instance.values():
        for measure in MEASURES:
            best = min(getattr(r, measure) for r in group)
            for r in group:
                if getattr(r, measure) <= best + TIE_TOL:
                    counts[measure][r.formulation.value] += 1
    return counts


def summary_rows(records) -> list[dict]:
    """avg / stdev / |best| rows per formulation (population stdev)."""
    usable = _usable(records)
    counts = best_counts(records)
    rows = []
    kinds = [k for k in FORMULATION_ORDER if any(r.formulation is k for r in records)]
    for label in SUMMARY_LABELS:
        for kind in kinds:
            group = [r for r in usable if r.formulation is kind]
            row = {column: None for column in RECORD_COLUMNS}
            row.update(instance=label, formulation=kind.value, status=SUMMARY_STATUS, message="")
            for measure in MEASURES:
                values = np.array([getattr(r, measure) for r in group], dtype=float)
                if label == "|best|":
                    row[measure] = counts[measure][kind.value]
                elif len(values):
                    row[measure] = float(values.mean() if label == "avg" else values.std())
            rows.append(row)
    return rows


def summary_table(records) -> pd.DataFrame:
    """Wide table: one row per instance plus avg / stdev / |best|, columns
    (measure, formulation)."""
    columns = pd.MultiIndex.from_tuples(
        [(measure.upper(), kind.value) for measure in MEASURES for kind in FORMULATION_ORDER]
    )
    cells = [
        (r.instance, r.formulation.value, {m: getattr(r, m) for m in MEASURES})
        for r in sorted(records, key=_sort_key)
    ]
    cells += [(row["instance"], row["formulation"], row) for row in summary_rows(records)]
    index = list(dict.fromkeys(label for label, _, _ in cells))
    table = pd.DataFrame(np.nan, index=index, columns=columns)
    for label, kind, values in cells:
        for measure in MEASURES:
            if values[measure] is not None:
                table.loc[label, (measure.upper(), kind)] = float(values[measure])
    return table.dropna(axis=1, how="all")


def write_report(records, path, format="csv") -> Path:
    path = Path(path)
    fmt = ReportFormat(format)
    records = sorted(records, key=_sort_key)
    rows = [record.model_dump(mode="json") for record in records] + summary_rows(records)
    try:
        if fmt is ReportFormat.CSV:
            frame = pd.DataFrame(rows, columns=RECORD_COLUMNS, dtype=object)
            frame.to_csv(path, index=False)
        else:
            with path.open("wb") as handle:
                for row in rows:
                    handle.write(pydantic_core.to_json({c: row[c] for c in RECORD_COLUMNS}) + b"\n")
    except OSError as exc:
        raise ReportError("cannot write report {}: {}".format(path, exc)) from exc
    log.info("wrote %d records to %s", len(records), path)
    return path


def read_report(path, format="csv") -> list[BenchRecord]:
    """Record rows of a report written by write_report (summary rows skipped)."""
    path = Path(path)
    fmt = ReportFormat(format)
    if fmt is ReportFormat.CSV:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        rows = frame.to_dict(orient="records")
        rows = [
            {k: (None if v == "" and k not in ("instance", "message") else v) for k, v in row.items()}
            for row in rows
        ]
    else:
        lines = path.read_text(encoding="utf-8").splitlines()
        rows = [pydantic_core.from_json(line) for line in lines if line.strip()]
    return [BenchRecord.model_validate(row) for row in rows if row["status"] != SUMMARY_STATUS]


# ==================================================
# Verification
# ==================================================
@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def verify_instance(g: WeightedGraph) -> list[Check]:
    """Structural checks on one instance: cycle basis, 1-decomposition,
    Euler machinery and (with ground truth) the y -> x round trip."""
    checks = []
    a = orient(g)
    components, _ = connected_components(g)
    basis = fundamental_cycle_basis(g, a, spanning_forest(g))
    expected = g.m - g.n + components
    detail = "{} cycles, m - n + gamma = {}".format(len(basis), expected)
    checks.append(Check("basis size", len(basis) == expected, detail))
    bad = [b for b, cycle in enumerate(basis) if not verify_cycle(g, a, cycle)]
    checks.append(Check("basis flow conservation", not bad, "violations: {}".format(bad) if bad else ""))
    if len(basis) and g.m <= 3000:
        rank = int(np.linalg.matrix_rank(basis.matrix(g.m).toarray()))
        checks.append(Check("basis independence", rank == len(basis), "rank {}".format(rank)))

    decomposition = one_decomposition(g)
    covered = set().union(*(block.edges for block in decomposition.blocks)) if len(decomposition) else set()
    overlaps_ok = all(
        len(p.vertices & q.vertices) <= 1 and (p.vertices & q.vertices) <= decomposition.cut_vertices
        for i, p in enumerate(decomposition.blocks)
        for q in decomposition.blocks[i + 1:]
    )
    checks.append(Check(
        "1-decomposition",
        covered == set(range(g.m)) and overlaps_ok,
        "{} blocks, {} cut vertices".format(len(decomposition), len(decomposition.cut_vertices)),
    ))

    if components == 1:
        es = euler_structure(g, a)
        even = bool(np.all(es.degrees(g) % 2 == 0))
        covers = Counter((t.edge, t.copy) for t in es.circuit) == Counter(
            {(e, h): 1 for e in range(g.m) for h in range(1, int(es.multiplicities[e]) + 1)}
        )
        checks.append(Check("eulerization parity", even))
        checks.append(Check("euler circuit", covers and es.is_closed(), "{} steps".format(len(es.circuit))))
        detail = "{} new vertices".format(len(es.added_vertices))
        checks.append(Check("2-path replacement simple", es.is_simple(), detail))
    else:
        checks.append(Check("euler machinery", True, "skipped: {} components".format(components)))

    if g.realization is not None:
        y = induced_differences(g, a, g.realization)
        recovered = recover_realization(g, a, y)
        error = quality(recovered.coords, g).mde
        checks.append(Check("round trip", error <= 1e-7, "mde {:.2e}".format(error)))
    return checks
