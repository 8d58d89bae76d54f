# -*- coding: utf-8 -*-
"""Edge-based, cycle-based and Eulerian-relaxation formulations of the
Euclidean distance geometry problem, with a MultiStart solver and MDE/LDE
benchmarking."""
from cycledgp.bench import BenchRecord, ExperimentSpec, generate_instance, run_benchmark, solve_instance
from cycledgp.errors import (
    CycleDGPError,
    DisconnectedGraphError,
    InstanceFormatError,
    InvalidGraphError,
    NotEulerianError,
    RecoveryError,
    ReportError,
    SolverError,
)
from cycledgp.formulations import FormulationKind, build_cycle, build_edge, build_euler
from cycledgp.graph import (
    WeightedGraph,
    euler_structure,
    fundamental_cycle_basis,
    one_decomposition,
    orient,
    parse_instance,
    read_instance,
    spanning_forest,
)
from cycledgp.metrics import lde, mde
from cycledgp.recovery import Realization, recover_realization
from cycledgp.solver import SolverConfig, local_solve, multistart, project_affine

__version__ = "0.1.0"
