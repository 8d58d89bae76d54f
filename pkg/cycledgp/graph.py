# -*- coding: utf-8 -*-
"""Instance data model and the combinatorial constructions behind the
cycle-based formulations.
________________________________________________________________
Description:

  * WeightedGraph: the (K, G, d) instance, with the plain-text file format
    (`n m K`, then `u v d` lines, optional `realization` section).
  * orient / ArcSet: every edge {u, v} becomes the arc (min, max).
  * spanning_forest + fundamental_cycle_basis: one signed cycle per chord.
  * one_decomposition: biconnected blocks, bridges and cut vertices.
  * eulerize -> euler_circuit -> two_path_replacement: the Eulerian
    machinery used by the relaxation.

Vertex ids are 0-based in code and 1-based in instance files.
Everything returned here is immutable once built.
________________________________________________________________
"""
from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from cycledgp.errors import (
    DisconnectedGraphError,
    InstanceFormatError,
    InvalidGraphError,
    NotEulerianError,
)

log = logging.getLogger(__name__)

REALIZATION_MARKER = "realization"


# ==================================================
# Instance
# ==================================================
def _edge_problem(u, v, d, n, seen):
    """Return what is wrong with edge (u, v, d), or None."""
    if u == v:
        return "self-loop at vertex {}".format(u + 1)
    if not (0 <= u < n and 0 <= v < n):
        return "vertex id out of range 1..{}".format(n)
    if not np.isfinite(d):
        return "non-finite weight"
    if d < 0:
        return "negative weight {}".format(d)
    if (min(u, v), max(u, v)) in seen:
        return "duplicate edge {{{}, {}}}".format(u + 1, v + 1)
    return None


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Simple undirected graph with nonnegative edge weights, embedded in R^K.

    `edges` keeps the order it was given in; that order is the edge index
    used by every incidence vector in the package.
    """

    n: int
    K: int
    edges: np.ndarray
    weights: np.ndarray
    realization: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidGraphError("vertex count must be positive, got {}".format(self.n))
        if int(self.K) < 1:
            raise InvalidGraphError("dimension K must be positive, got {}".format(self.K))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(edges) != len(weights):
            raise InvalidGraphError(
                "{} edges but {} weights".format(len(edges), len(weights))
            )
        seen = set()
        for e, ((u, v), d) in enumerate(zip(edges.tolist(), weights.tolist())):
            problem = _edge_problem(u, v, d, int(self.n), seen)
            if problem:
                raise InvalidGraphError("edge {}: {}".format(e, problem))
            seen.add((min(u, v), max(u, v)))
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        if self.realization is not None:
            x = np.array(self.realization, dtype=float)
            if x.shape != (self.n, self.K):
                raise InvalidGraphError(
                    "realization has shape {}, expected {}".format(x.shape, (self.n, self.K))
                )
            x.setflags(write=False)
            object.__setattr__(self, "realization", x)

    @classmethod
    def from_edges(cls, n, K, triples: Iterable[Sequence], realization=None, name=""):
        """Build from (u, v, d) triples with 0-based vertex ids."""
        triples = list(triples)
        edges = [(int(u), int(v)) for u, v, _ in triples]
        weights = [float(d) for _, _, d in triples]
        return cls(n, K, np.array(edges, dtype=np.int64).reshape(-1, 2), weights, realization, name)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> Mapping[tuple[int, int], int]:
        """{(min, max): edge index}."""
        lookup = {(min(u, v), max(u, v)): e for e, (u, v) in enumerate(self.edges.tolist())}
        return MappingProxyType(lookup)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex, the sorted (neighbour, edge index) pairs."""
        lists = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(self.edges.tolist()):
            lists[u].append((v, e))
            lists[v].append((u, e))
        return tuple(tuple(sorted(items)) for items in lists)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edges.ravel(), minlength=self.n)
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency_matrix(self) -> sparse.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.m)
        matrix = sparse.csr_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(self.n, self.n)
        )
        matrix.sort_indices()
        return matrix

    def subgraph(self, edge_indices: Iterable[int]) -> tuple["WeightedGraph", np.ndarray]:
        """Edge-induced subgraph, relabelled to 0..n'-1.

        Returns the subgraph and the array mapping new vertex ids to old ones.
        """
        chosen = sorted(int(e) for e in edge_indices)
        vertices = np.unique(self.edges[chosen].ravel()) if chosen else np.zeros(0, dtype=np.int64)
        if len(vertices) == 0:
            raise InvalidGraphError("edge-induced subgraph of an empty edge set")
        relabel = {int(old): new for new, old in enumerate(vertices.tolist())}
        triples = [
            (relabel[int(self.edges[e, 0])], relabel[int(self.edges[e, 1])], self.weights[e])
            for e in chosen
        ]
        truth = None if self.realization is None else self.realization[vertices]
        name = "{}[{}]".format(self.name, len(chosen)) if self.name else ""
        return WeightedGraph.from_edges(len(vertices), self.K, triples, truth, name), vertices


def parse_instance(text: str, name: str = "") -> WeightedGraph:
    """Parse the plain-text instance format.

    Comment lines start with `#`; a leading `# name: <text>` names the
    instance and wins over `name`. Errors carry the 1-based line number
    they were found on.
    """
    rows = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if not rows and body.lower().startswith("name:"):
                name = body[5:].strip()
            continue
        rows.append((number, line.split()))
    if not rows:
        raise InstanceFormatError(1, "empty instance, expected header 'n m K'")

    number, header = rows[0]
    if len(header) != 3:
        raise InstanceFormatError(number, "header must be 'n m K', got {!r}".format(" ".join(header)))
    try:
        n, m, K = (int(token) for token in header)
    except ValueError:
        raise InstanceFormatError(number, "header values must be integers") from None
    if n < 1 or m < 0 or K < 1:
        raise InstanceFormatError(number, "header needs n >= 1, m >= 0, K >= 1")

    edges, weights, seen = [], [], set()
    cursor = 1
    for _ in range(m):
        if cursor >= len(rows):
            last = rows[-1][0]
            raise InstanceFormatError(last + 1, "expected {} edges, found {}".format(m, len(edges)))
        number, tokens = rows[cursor]
        cursor += 1
        if len(tokens) != 3:
            raise InstanceFormatError(number, "edge line must be 'u v d'")
        try:
            u, v, d = int(tokens[0]) - 1, int(tokens[1]) - 1, float(tokens[2])
        except ValueError:
            raise InstanceFormatError(number, "cannot read edge {!r}".format(" ".join(tokens))) from None
        problem = _edge_problem(u, v, d, n, seen)
        if problem:
            raise InstanceFormatError(number, problem)
        seen.add((min(u, v), max(u, v)))
        edges.append((u, v))
        weights.append(d)

    realization = None
    if cursor < len(rows):
        number, tokens = rows[cursor]
        if tokens != [REALIZATION_MARKER]:
            raise InstanceFormatError(number, "unexpected content after {} edges".format(m))
        cursor += 1
        coords = []
        for i in range(n):
            if cursor >= len(rows):
                raise InstanceFormatError(number + 1, "realization needs {} rows, found {}".format(n, i))
            number, tokens = rows[cursor]
            cursor += 1
            if len(tokens) != K:
                raise InstanceFormatError(number, "realization row needs {} values".format(K))
            try:
                coords.append([float(t) for t in tokens])
            except ValueError:
                raise InstanceFormatError(number, "cannot read realization row") from None
        realization = np.array(coords)
        if cursor < len(rows):
            raise InstanceFormatError(rows[cursor][0], "unexpected content after realization")

    return WeightedGraph(n, K, np.array(edges, dtype=np.int64).reshape(-1, 2), weights, realization, name)


def _number(value):
    return format(float(value), ".17g")


def format_instance(g: WeightedGraph) -> str:
    lines = []
    if g.name:
        lines.append("# name: {}".format(g.name))
    lines.append("{} {} {}".format(g.n, g.m, g.K))
    for (u, v), d in zip(g.edges.tolist(), g.weights.tolist()):
        lines.append("{} {} {}".format(u + 1, v + 1, _number(d)))
    if g.realization is not None:
        lines.append(REALIZATION_MARKER)
        for row in g.realization:
            lines.append(" ".join(_number(value) for value in row))
    return "\n".join(lines) + "\n"


def read_instance(path) -> WeightedGraph:
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data.count(b"\n", 0, exc.start) + 1
        raise InstanceFormatError(line, "not valid UTF-8 text (byte {:#04x})".format(data[exc.start])) from None
    return parse_instance(text, name=path.stem)


def write_instance(g: WeightedGraph, path) -> Path:
    path = Path(path)
    path.write_text(format_instance(g), encoding="utf-8")
    return path


def connected_components(g: WeightedGraph) -> tuple[int, np.ndarray]:
    """Number of components (the gamma of m - n + gamma) and vertex labels."""
    count, labels = csgraph.connected_components(g.adjacency_matrix, directed=False)
    return int(count), labels


# ==================================================
# Orientation and incidence
# ==================================================
@dataclass(frozen=True, eq=False)
class ArcSet:
    """Arc (tail[e], head[e]) for every edge index e."""

    tail: np.ndarray
    head: np.ndarray

    def __len__(self):
        return len(self.tail)

    def arc(self, e) -> tuple[int, int]:
        return int(self.tail[e]), int(self.head[e])

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.tail.tolist(), self.head.tolist()))

    def sign(self, e, source) -> int:
        """+1 when edge e is walked from its tail, -1 from its head."""
        return 1 if source == self.tail[e] else -1


def orient(g: WeightedGraph) -> ArcSet:
    tail = g.edges.min(axis=1)
    head = g.edges.max(axis=1)
    tail.setflags(write=False)
    head.setflags(write=False)
    return ArcSet(tail, head)


def incidence_matrix(g: WeightedGraph, a: ArcSet) -> sparse.csr_matrix:
    """n x m matrix, +1 at each arc's tail and -1 at its head.

    `incidence_matrix.T @ x` gives the differences x_tail - x_head and its
    kernel is the cycle space.
    """
    cols = np.arange(g.m)
    data = np.concatenate([np.ones(g.m), -np.ones(g.m)])
    rows = np.concatenate([a.tail, a.head])
    return sparse.csr_matrix((data, (rows, np.concatenate([cols, cols]))), shape=(g.n, g.m))


def induced_differences(g: WeightedGraph, a: ArcSet, x) -> np.ndarray:
    """y_e = x_tail - x_head, shape (m, K)."""
    x = np.asarray(x, dtype=float)
    return x[a.tail] - x[a.head]


# ==================================================
# Cycles
# ==================================================
@dataclass(frozen=True)
class SignedCycle:
    """Sparse cycle-space vector: (edge index, coefficient) pairs, no zeros.

    Members of a cycle basis carry coefficients in {-1, +1}; sums and
    multiples of them may carry any rational coefficient.
    """

    coefficients: tuple[tuple[int, object], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, object]) -> "SignedCycle":
        return cls(tuple(sorted((int(e), c) for e, c in mapping.items() if c != 0)))

    @classmethod
    def from_walk(cls, g: WeightedGraph, a: ArcSet, walk: Sequence[int]) -> "SignedCycle":
        """Signed vector of a closed vertex walk (the closing step is implied)."""
        walk = list(walk)
        if len(walk) > 1 and walk[0] == walk[-1]:
            walk = walk[:-1]
        mapping = Counter()
        for source, target in zip(walk, walk[1:] + walk[:1]):
            key = (min(source, target), max(source, target))
            if key not in g.edge_index:
                raise InvalidGraphError("walk uses non-edge {{{}, {}}}".format(source, target))
            e = g.edge_index[key]
            mapping[e] += a.sign(e, source)
        return cls.from_mapping(mapping)

    def as_dict(self) -> dict[int, object]:
        return dict(self.coefficients)

    @property
    def edges(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.coefficients)

    @property
    def is_simple(self) -> bool:
        return all(c in (1, -1) for _, c in self.coefficients)

    def __len__(self):
        return len(self.coefficients)

    def to_dense(self, m) -> np.ndarray:
        vector = np.zeros(m)
        for e, c in self.coefficients:
            vector[e] = float(c)
        return vector

    def __add__(self, other):
        merged = Counter(self.as_dict())
        for e, c in other.coefficients:
            merged[e] = merged.get(e, 0) + c
        return SignedCycle.from_mapping(merged)

    def __neg__(self):
        return SignedCycle(tuple((e, -c) for e, c in self.coefficients))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return SignedCycle.from_mapping({e: c * scalar for e, c in self.coefficients})

    __rmul__ = __mul__


@dataclass(frozen=True)
class CycleBasis:
    cycles: tuple[SignedCycle, ...]
    forest: frozenset[int]
    chords: tuple[int, ...]

    def __len__(self):
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def matrix(self, m) -> sparse.csr_matrix:
        """|B| x m coefficient matrix, one row per basis cycle."""
        rows, cols, data = [], [], []
        for b, cycle in enumerate(self.cycles):
            for e, c in cycle.coefficients:
                rows.append(b)
                cols.append(e)
                data.append(float(c))
        return sparse.csr_matrix((data, (rows, cols)), shape=(len(self.cycles), m))


def _bfs_forest(n, adjacency):
    """Breadth-first forest, each tree rooted at its component's smallest vertex.

    `adjacency[v]` is the sorted (neighbour, edge) list of v. Returns parent,
    parent edge and depth arrays (-1 parent for roots).
    """
    parent = np.full(n, -1, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    depth = np.full(n, -1, dtype=np.int64)
    for root in range(n):
        if depth[root] >= 0:
            continue
        depth[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w, e in adjacency[u]:
                if depth[w] < 0:
                    depth[w] = depth[u] + 1
                    parent[w] = u
                    parent_edge[w] = e
                    queue.append(w)
    return parent, parent_edge, depth


def spanning_forest(g: WeightedGraph) -> frozenset[int]:
    _, parent_edge, _ = _bfs_forest(g.n, g.adjacency)
    forest = frozenset(int(e) for e in parent_edge if e >= 0)
    log.debug("spanning forest: %d edges over %d vertices", len(forest), g.n)
    return forest


def fundamental_cycle_basis(g: WeightedGraph, a: ArcSet, forest: Iterable[int]) -> CycleBasis:
    """One signed cycle per chord: the chord walked tail -> head, then the
    tree path from its head back to its tail."""
    forest = frozenset(int(e) for e in forest)
    components, _ = connected_components(g)
    tree_adjacency = [[] for _ in range(g.n)]
    for e in sorted(forest):
        u, v = a.arc(e)
        tree_adjacency[u].append((v, e))
        tree_adjacency[v].append((u, e))
    parent, parent_edge, depth = _bfs_forest(g.n, [sorted(items) for items in tree_adjacency])
    reached = int(np.count_nonzero(parent_edge >= 0))
    if len(forest) != g.n - components or reached != len(forest):
        raise InvalidGraphError(
            "edge set of size {} is not a spanning forest ({} vertices, {} components)".format(
                len(forest), g.n, components
            )
        )

    cycles, chords = [], []
    for e in range(g.m):
        if e in forest:
            continue
        t, h = a.arc(e)
        coefficients = {e: 1}
        up, down = [], []
        u, w = h, t
        while depth[u] > depth[w]:
            up.append((u, int(parent_edge[u])))
            u = int(parent[u])
        while depth[w] > depth[u]:
            down.append((w, int(parent_edge[w])))
            w = int(parent[w])
        while u != w:
            up.append((u, int(parent_edge[u])))
            down.append((w, int(parent_edge[w])))
            u, w = int(parent[u]), int(parent[w])
        # head climbs to the meeting vertex, then descends to the tail
        for child, f in up:
            coefficients[f] = a.sign(f, child)
        for child, f in down:
            coefficients[f] = -a.sign(f, child)
        cycles.append(SignedCycle.from_mapping(coefficients))
        chords.append(e)

    log.debug("fundamental cycle basis: %d cycles (m=%d, n=%d, components=%d)",
              len(cycles), g.m, g.n, components)
    return CycleBasis(tuple(cycles), forest, tuple(chords))


def verify_cycle(g: WeightedGraph, a: ArcSet, c: SignedCycle, tol=1e-9) -> bool:
    """Flow conservation: at every vertex signed inflow equals signed outflow."""
    if any(not 0 <= e < g.m for e in c.edges):
        return False
    imbalance = incidence_matrix(g, a) @ c.to_dense(g.m)
    return bool(np.all(np.abs(imbalance) <= tol))


# ==================================================
# 1-decomposition
# ==================================================
@dataclass(frozen=True)
class Block:
    edges: frozenset[int]
    vertices: frozenset[int]
    biconnected: bool


@dataclass(frozen=True)
class BlockDecomposition:
    """Blocks (biconnected pieces and bridges) joined at cut vertices.

    `tree` lists the (block index, cut vertex) edges of the block-cut tree.
    """

    blocks: tuple[Block, ...]
    cut_vertices: frozenset[int]
    tree: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.blocks)

    def blocks_at(self, vertex) -> tuple[int, ...]:
        return tuple(b for b, block in enumerate(self.blocks) if vertex in block.vertices)


def _block_edge_sets(g: WeightedGraph):
    """Non-recursive Hopcroft-Tarjan search yielding the edge set of each block."""
    adjacency = g.adjacency
    discovery = np.full(g.n, -1, dtype=np.int64)
    low = np.zeros(g.n, dtype=np.int64)
    clock = 0
    for start in range(g.n):
        if discovery[start] >= 0 or not adjacency[start]:
            continue
        discovery[start] = low[start] = clock
        clock += 1
        edge_stack = []
        edge_position = {}
        stack = [(-1, start, iter(adjacency[start]))]
        while stack:
            via, vertex, children = stack[-1]
            step = next(children, None)
            if step is not None:
                child, e = step
                if e == via:
                    continue
                if discovery[child] >= 0:
                    if discovery[child] < discovery[vertex]:  # back edge
                        low[vertex] = min(low[vertex], discovery[child])
                        edge_stack.append(e)
                else:
                    discovery[child] = low[child] = clock
                    clock += 1
                    edge_position[e] = len(edge_stack)
                    edge_stack.append(e)
                    stack.append((e, child, iter(adjacency[child])))
                continue
            stack.pop()
            if not stack:
                break
            parent = stack[-1][1]
            if low[vertex] >= discovery[parent]:
                position = edge_position[via]
                yield frozenset(edge_stack[position:])
                del edge_stack[position:]
            low[parent] = min(low[parent], low[vertex])


def one_decomposition(g: WeightedGraph) -> BlockDecomposition:
    edge_sets = sorted(_block_edge_sets(g), key=min)
    blocks = []
    for edges in edge_sets:
        vertices = frozenset(int(v) for v in g.edges[sorted(edges)].ravel())
        blocks.append(Block(edges, vertices, biconnected=len(edges) > 1))
    membership = Counter(v for block in blocks for v in block.vertices)
    cut_vertices = frozenset(v for v, count in membership.items() if count > 1)
    tree = tuple(
        (b, v) for b, block in enumerate(blocks) for v in sorted(block.vertices & cut_vertices)
    )
    log.debug("1-decomposition: %d blocks, %d cut vertices", len(blocks), len(cut_vertices))
    return BlockDecomposition(tuple(blocks), cut_vertices, tree)


# ==================================================
# Eulerian machinery
# ==================================================
@dataclass(frozen=True)
class Traversal:
    """One step of an Euler circuit: copy `copy` (1-based) of edge `edge`
    walked from `source` to `target`."""

    edge: int
    copy: int
    source: int
    target: int


def _multigraph_degrees(g: WeightedGraph, H) -> np.ndarray:
    H = np.asarray(H)
    return np.bincount(g.edges[:, 0], weights=H, minlength=g.n).astype(np.int64) + np.bincount(
        g.edges[:, 1], weights=H, minlength=g.n
    ).astype(np.int64)


def _require_connected(g: WeightedGraph, purpose):
    components, _ = connected_components(g)
    if components > 1:
        raise DisconnectedGraphError(
            components, "{} needs a connected graph, found {} components".format(purpose, components)
        )


def _nearest_target(g: WeightedGraph, source, targets):
    """Breadth-first search from source to the closest vertex in targets.

    Returns that vertex and the edge indices of the path.
    """
    previous = {source: (-1, -1)}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u != source and u in targets:
            found, path = u, []
            while u != source:
                u, e = previous[u]
                path.append(e)
            return found, path
        for w, e in g.adjacency[u]:
            if w not in previous:
                previous[w] = (u, e)
                queue.append(w)
    raise DisconnectedGraphError(2, "no path from vertex {} to another odd vertex".format(source))


def eulerize(g: WeightedGraph) -> np.ndarray:
    """Edge multiplicities H (>= 1) giving every vertex even degree.

    Odd vertices are paired greedily, smallest id first, each with its
    breadth-first nearest odd partner; every edge on the pairing path gets
    one more copy. Only existing edges are ever duplicated.
    """
    _require_connected(g, "Eulerization")
    H = np.ones(g.m, dtype=np.int64)
    while True:
        odd = np.flatnonzero(_multigraph_degrees(g, H) % 2).tolist()
        if not odd:
            break
        remaining = set(odd)
        while remaining:
            u = min(remaining)
            remaining.discard(u)
            v, path = _nearest_target(g, u, remaining)
            remaining.discard(v)
            H[path] += 1
    log.debug("eulerize: %d extra edge copies", int(H.sum()) - g.m)
    H.setflags(write=False)
    return H


def euler_circuit(g: WeightedGraph, H) -> tuple[Traversal, ...]:
    """Hierholzer circuit over the multigraph with multiplicities H.

    Starts at the smallest vertex with edges and always leaves through the
    unused copy with the smallest head (then edge index, then copy).
    """
    H = np.asarray(H, dtype=np.int64)
    if H.shape != (g.m,) or np.any(H < 1):
        raise InvalidGraphError("multiplicities must be one integer >= 1 per edge")
    odd = np.flatnonzero(_multigraph_degrees(g, H) % 2)
    if len(odd):
        raise NotEulerianError(odd.tolist())
    _require_connected(g, "Euler circuit")
    if g.m == 0:
        return ()

    incident = [[] for _ in range(g.n)]
    for e, (u, v) in enumerate(g.edges.tolist()):
        for h in range(1, int(H[e]) + 1):
            incident[u].append((v, e, h))
            incident[v].append((u, e, h))
    for items in incident:
        items.sort()
    cursor = [0] * g.n
    used = set()

    start = int(np.flatnonzero(g.degrees)[0])
    stack = [(start, None)]
    circuit = []
    while stack:
        v, via = stack[-1]
        items = incident[v]
        i = cursor[v]
        while i < len(items) and items[i][1:] in used:
            i += 1
        cursor[v] = i
        if i < len(items):
            w, e, h = items[i]
            used.add((e, h))
            stack.append((w, Traversal(e, h, v, w)))
        else:
            stack.pop()
            if via is not None:
                circuit.append(via)
    circuit.reverse()
    return tuple(circuit)


@dataclass(frozen=True, eq=False)
class EulerStructure:
    """Eulerized multigraph, its circuit, and the de-parallelized digraph.

    `arcs` is the circuit after every copy h > 1 was replaced by a 2-path
    through the fresh vertex `added_vertices[(e, h)]`. `signs[e]` is the
    direction (relative to the ArcSet) in which the original copy of e is
    walked; `net_coefficients[e]` sums that direction over all copies of e.
    """

    multiplicities: np.ndarray
    circuit: tuple[Traversal, ...]
    arcs: tuple[tuple[int, int], ...]
    added_vertices: Mapping[tuple[int, int], int]
    signs: np.ndarray
    net_coefficients: np.ndarray
    n_vertices: int

    def degrees(self, g: WeightedGraph) -> np.ndarray:
        return _multigraph_degrees(g, self.multiplicities)

    def is_closed(self) -> bool:
        if not self.arcs:
            return True
        walk_ok = all(a[1] == b[0] for a, b in zip(self.arcs, self.arcs[1:]))
        return walk_ok and self.arcs[-1][1] == self.arcs[0][0]

    def is_simple(self) -> bool:
        """No two arcs join the same pair of vertices, in either direction."""
        pairs = set()
        for tail, head in self.arcs:
            key = frozenset((tail, head))
            if tail == head or key in pairs:
                return False
            pairs.add(key)
        return True


def two_path_replacement(g: WeightedGraph, a: ArcSet, H, circuit: Sequence[Traversal]) -> EulerStructure:
    H = np.array(H, dtype=np.int64)
    expected = Counter({(e, h): 1 for e in range(g.m) for h in range(1, int(H[e]) + 1)})
    if Counter((t.edge, t.copy) for t in circuit) != expected:
        raise InvalidGraphError("circuit does not walk every edge copy exactly once")

    added = {}
    for e, h in sorted(key for key in expected if key[1] > 1):
        added[(e, h)] = g.n + len(added)

    arcs = []
    signs = np.zeros(g.m, dtype=np.int64)
    net = np.zeros(g.m, dtype=np.int64)
    for t in circuit:
        direction = a.sign(t.edge, t.source)
        net[t.edge] += direction
        if t.copy == 1:
            signs[t.edge] = direction
            arcs.append((t.source, t.target))
        else:
            middle = added[(t.edge, t.copy)]
            arcs.append((t.source, middle))
            arcs.append((middle, t.target))
    for array in (H, signs, net):
        array.setflags(write=False)
    log.debug("2-path replacement: %d new vertices, %d arcs", len(added), len(arcs))
    return EulerStructure(
        multiplicities=H,
        circuit=tuple(circuit),
        arcs=tuple(arcs),
        added_vertices=MappingProxyType(added),
        signs=signs,
        net_coefficients=net,
        n_vertices=g.n + len(added),
    )


def euler_structure(g: WeightedGraph, a: ArcSet | None = None) -> EulerStructure:
    """eulerize, euler_circuit and two_path_replacement in one call."""
    a = orient(g) if a is None else a
    H = eulerize(g)
    return two_path_replacement(g, a, H, euler_circuit(g, H))
