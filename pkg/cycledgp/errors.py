# -*- coding: utf-8 -*-
"""Exceptions raised by cycledgp.

Numerical trouble inside a single local solve is not an exception: the
solver reports it as an aborted start and moves on.
"""


class CycleDGPError(Exception):
    """Base class for every error raised by this package."""


class InstanceFormatError(CycleDGPError, ValueError):
    """Instance text that does not follow the `n m K` / `u v d` format."""

    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__("line {}: {}".format(line, message))


class InvalidGraphError(CycleDGPError, ValueError):
    """A WeightedGraph built in code breaks one of its invariants."""


class DisconnectedGraphError(CycleDGPError):
    """The construction needs a connected graph."""

    def __init__(self, components, message=None):
        self.components = components
        super().__init__(
            message or "graph has {} connected components".format(components)
        )


class NotEulerianError(CycleDGPError):
    """A multigraph with odd-degree vertices was handed to euler_circuit."""

    def __init__(self, odd_vertices):
        self.odd_vertices = tuple(odd_vertices)
        super().__init__(
            "odd-degree vertices: {}".format(", ".join(map(str, self.odd_vertices)))
        )


class SolverError(CycleDGPError):
    """Every start of a multistart run aborted."""


class RecoveryError(CycleDGPError):
    """The y -> x recovery stage could not produce a realization."""


class ReportError(CycleDGPError, OSError):
    """A report file could not be written."""
