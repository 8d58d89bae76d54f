import networkx as nx
import numpy as np
import pytest
from conftest import random_graphs, to_networkx

from cycledgp.bench import generate_instance
from cycledgp.errors import (
    DisconnectedGraphError,
    InstanceFormatError,
    InvalidGraphError,
    NotEulerianError,
)
from cycledgp.graph import (
    SignedCycle,
    WeightedGraph,
    connected_components,
    euler_circuit,
    euler_structure,
    eulerize,
    format_instance,
    fundamental_cycle_basis,
    incidence_matrix,
    one_decomposition,
    orient,
    parse_instance,
    read_instance,
    spanning_forest,
    two_path_replacement,
    verify_cycle,
    write_instance,
)


def _basis(g):
    a = orient(g)
    return a, fundamental_cycle_basis(g, a, spanning_forest(g))


# ==================================================
# Instance format
# ==================================================
def test_parse_triangle():
    g = parse_instance("3 3 2\n1 2 3\n2 3 4\n1 3 5\n")
    assert (g.n, g.m, g.K) == (3, 3, 2)
    assert g.edges.tolist() == [[0, 1], [1, 2], [0, 2]]
    assert g.weights.tolist() == [3.0, 4.0, 5.0]
    assert g.realization is None


def test_parse_skips_comments_and_reads_name():
    g = parse_instance("# name: tiny\n# a comment\n2 1 3\n\n1 2 0.5\n")
    assert g.name == "tiny"
    assert g.m == 1


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("2 1 1\n2 2 1.0\n", 2, "self-loop"),
        ("3 2 2\n1 2 1\n2 1 1\n", 3, "duplicate"),
        ("2 1 2\n1 2 -1\n", 2, "negative"),
        ("2 1 2\n1 3 1\n", 2, "out of range"),
        ("2 1 2\n1 2 nan\n", 2, "non-finite"),
        ("2 1 2\n1 2 inf\n", 2, "non-finite"),
        ("2 1\n1 2 1\n", 1, "header"),
        ("2 x 2\n", 1, "integers"),
        ("3 2 2\n1 2 1\n", 3, "expected 2 edges"),
        ("2 1 2\n1 2 1\nrealization\n0 0\n", 5, "realization needs 2 rows"),
        ("2 1 2\n1 2 1\n7\n", 3, "unexpected content"),
        ("", 1, "empty"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(InstanceFormatError) as info:
        parse_instance(text)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith("line {}:".format(line))


def test_read_instance_rejects_bad_bytes(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_bytes(b"2 1 2\n1 2 1\xff\n")
    with pytest.raises(InstanceFormatError) as info:
        read_instance(path)
    assert info.value.line == 2
    assert "UTF-8" in str(info.value)


def test_invalid_graph_in_code():
    with pytest.raises(InvalidGraphError):
        WeightedGraph.from_edges(2, 2, [(0, 0, 1.0)])
    with pytest.raises(InvalidGraphError):
        WeightedGraph.from_edges(2, 2, [(0, 1, 1.0)], realization=np.zeros((3, 2)))


def test_format_round_trip():
    for seed in range(100):
        g = generate_instance(10, 3, 0.4, seed)
        back = parse_instance(format_instance(g))
        assert back.name == g.name
        assert np.array_equal(back.edges, g.edges)
        assert np.array_equal(back.weights, g.weights)
        assert np.array_equal(back.realization, g.realization)


def test_read_write_instance(tmp_path, square):
    path = write_instance(square, tmp_path / "c4.txt")
    g = read_instance(path)
    assert g.name == "square"
    assert np.array_equal(g.edges, square.edges)

    unnamed = WeightedGraph.from_edges(2, 1, [(0, 1, 1.0)])
    g = read_instance(write_instance(unnamed, tmp_path / "edge.txt"))
    assert g.name == "edge"


def test_graph_is_immutable(square):
    with pytest.raises(ValueError):
        square.edges[0, 0] = 3
    with pytest.raises(AttributeError):
        square.n = 9


def test_subgraph_relabels(bowtie):
    sub, vertices = bowtie.subgraph([3, 4, 5])
    assert vertices.tolist() == [2, 3, 4]
    assert sub.edges.tolist() == [[0, 1], [1, 2], [0, 2]]
    assert np.array_equal(sub.realization, bowtie.realization[[2, 3, 4]])


# ==================================================
# Orientation
# ==================================================
def test_orient_smaller_id_is_tail():
    g = WeightedGraph.from_edges(2, 2, [(1, 0, 1.0)])
    assert orient(g).arc(0) == (0, 1)


def test_orient_triangle_deterministic(triangle):
    a = orient(triangle)
    assert a.pairs() == [(0, 1), (1, 2), (0, 2)]
    assert orient(triangle).pairs() == a.pairs()


def test_incidence_gives_differences(square):
    a = orient(square)
    D = incidence_matrix(square, a)
    y = D.T @ square.realization
    assert np.allclose(y, square.realization[a.tail] - square.realization[a.head])


# ==================================================
# Spanning forest and cycle basis
# ==================================================
def test_spanning_forest_of_tree_is_everything(path3):
    assert spanning_forest(path3) == frozenset(range(path3.m))


def test_spanning_forest_sizes(square, two_triangles):
    assert len(spanning_forest(square)) == 3
    forest = spanning_forest(two_triangles)
    assert len(forest) == 4
    G = to_networkx(two_triangles)
    chosen = nx.Graph([tuple(two_triangles.edges[e]) for e in forest])
    assert nx.is_forest(chosen)
    assert set(chosen.nodes) == set(G.nodes)


def test_basis_of_tree_is_empty(path3):
    _, basis = _basis(path3)
    assert len(basis) == 0
    assert basis.matrix(path3.m).shape == (0, 2)


def test_basis_of_c4(square):
    a, basis = _basis(square)
    assert len(basis) == 1
    assert set(basis.cycles[0].edges) == {0, 1, 2, 3}
    assert verify_cycle(square, a, basis.cycles[0])


def test_basis_of_k4_spans_every_simple_cycle(k4):
    a, basis = _basis(k4)
    assert len(basis) == 3
    B = basis.matrix(k4.m).toarray()
    assert np.linalg.matrix_rank(B) == 3
    cycles = list(nx.simple_cycles(to_networkx(k4)))
    assert len(cycles) == 7
    for walk in cycles:
        c = SignedCycle.from_walk(k4, a, walk).to_dense(k4.m)
        assert np.linalg.matrix_rank(np.vstack([B, c])) == 3


def test_chords_appear_in_exactly_one_basis_cycle(k4):
    _, basis = _basis(k4)
    for b, chord in enumerate(basis.chords):
        assert chord not in basis.forest
        assert abs(basis.cycles[b].as_dict()[chord]) == 1
        assert all(chord not in other.edges for i, other in enumerate(basis.cycles) if i != b)


def test_basis_size_is_cycle_rank():
    for g in random_graphs(30, (3, 25), density=0.3):
        _, basis = _basis(g)
        components, _ = connected_components(g)
        assert len(basis) == g.m - g.n + components


def test_basis_on_disconnected(two_triangles):
    a, basis = _basis(two_triangles)
    assert len(basis) == 2
    assert all(verify_cycle(two_triangles, a, c) for c in basis)


def test_non_forest_rejected(square):
    with pytest.raises(InvalidGraphError):
        fundamental_cycle_basis(square, orient(square), {0, 1})


def test_verify_cycle_flipped_sign(square):
    a, basis = _basis(square)
    cycle = basis.cycles[0].as_dict()
    cycle[0] = -cycle[0]
    assert not verify_cycle(square, a, SignedCycle.from_mapping(cycle))


def test_sum_of_k4_cycles_cancels_shared_edge(k4):
    a, basis = _basis(k4)
    first, second = basis.cycles[0], basis.cycles[1]
    shared = set(first.edges) & set(second.edges)
    assert shared
    combined = first + second if first.as_dict()[min(shared)] != second.as_dict()[min(shared)] else first - second
    assert min(shared) not in combined.edges
    assert verify_cycle(k4, a, combined)
    assert verify_cycle(k4, a, 2 * first)


def test_from_walk_rejects_non_edges(path3):
    with pytest.raises(InvalidGraphError):
        SignedCycle.from_walk(path3, orient(path3), [0, 1, 2])


def test_cycle_rows_vanish_on_induced_differences():
    rng = np.random.default_rng(11)
    for g in random_graphs(100, (3, 30), density=0.15, seed=1):
        a, basis = _basis(g)
        x = rng.standard_normal((g.n, g.K))
        y = x[a.tail] - x[a.head]
        assert np.abs(basis.matrix(g.m) @ y).max(initial=0.0) <= 1e-9
        for walk in nx.simple_cycles(to_networkx(g), length_bound=5):
            c = SignedCycle.from_walk(g, a, walk).to_dense(g.m)
            assert np.abs(c @ y).max() <= 1e-9


# ==================================================
# 1-decomposition
# ==================================================
def test_single_cycle_is_one_block(square):
    decomposition = one_decomposition(square)
    assert len(decomposition) == 1
    assert decomposition.cut_vertices == frozenset()
    assert decomposition.blocks[0].biconnected


def test_bowtie_blocks(bowtie):
    decomposition = one_decomposition(bowtie)
    assert len(decomposition) == 2
    assert decomposition.cut_vertices == frozenset({2})
    assert decomposition.blocks_at(2) == (0, 1)
    assert decomposition.tree == ((0, 2), (1, 2))


def test_bridges_are_blocks(path3):
    decomposition = one_decomposition(path3)
    assert [sorted(b.edges) for b in decomposition.blocks] == [[0], [1]]
    assert not any(b.biconnected for b in decomposition.blocks)
    assert decomposition.cut_vertices == frozenset({1})


def test_decomposition_matches_networkx():
    for g in random_graphs(20, (10, 30), density=0.12, seed=2):
        decomposition = one_decomposition(g)
        G = to_networkx(g)
        expected = {
            frozenset(G.edges[u, v]["index"] for u, v in component)
            for component in nx.biconnected_component_edges(G)
        }
        assert {b.edges for b in decomposition.blocks} == expected
        assert decomposition.cut_vertices == frozenset(nx.articulation_points(G))

        covered = set().union(*(b.edges for b in decomposition.blocks))
        assert covered == set(range(g.m))
        for i, p in enumerate(decomposition.blocks):
            for q in decomposition.blocks[i + 1:]:
                common = p.vertices & q.vertices
                assert len(common) <= 1
                assert common <= decomposition.cut_vertices


# ==================================================
# Eulerian machinery
# ==================================================
def test_eulerize_even_graph_unchanged(square):
    assert eulerize(square).tolist() == [1, 1, 1, 1]


def test_eulerize_path_doubles_both_edges(path3):
    assert eulerize(path3).tolist() == [2, 2]


def test_eulerize_k4_adds_a_matching(k4):
    H = eulerize(k4)
    doubled = [tuple(k4.edges[e]) for e in np.flatnonzero(H == 2)]
    assert len(doubled) == 2
    assert len({v for pair in doubled for v in pair}) == 4
    assert int(H.max()) == 2


def test_eulerize_refuses_disconnected(two_triangles):
    with pytest.raises(DisconnectedGraphError) as info:
        eulerize(two_triangles)
    assert info.value.components == 2


def test_circuit_of_c4(square):
    circuit = euler_circuit(square, eulerize(square))
    assert len(circuit) == 4
    assert sorted(t.edge for t in circuit) == [0, 1, 2, 3]
    assert circuit[0].source == circuit[-1].target == 0


def test_circuit_of_doubled_path(path3):
    circuit = euler_circuit(path3, eulerize(path3))
    assert [t.source for t in circuit] + [circuit[-1].target] == [0, 1, 2, 1, 0]


def test_circuit_of_eulerized_k4(k4):
    H = eulerize(k4)
    circuit = euler_circuit(k4, H)
    assert len(circuit) == int(H.sum()) == 8


def test_circuit_needs_even_degrees(k4):
    with pytest.raises(NotEulerianError) as info:
        euler_circuit(k4, np.ones(k4.m, dtype=int))
    assert info.value.odd_vertices == (0, 1, 2, 3)


def test_circuit_refuses_disconnected_even_graph(two_triangles):
    with pytest.raises(DisconnectedGraphError) as info:
        euler_circuit(two_triangles, np.ones(two_triangles.m, dtype=int))
    assert info.value.components == 2


def test_two_path_identity_on_even_graph(square):
    a = orient(square)
    es = euler_structure(square, a)
    assert len(es.added_vertices) == 0
    assert np.all(np.abs(es.signs) == 1)
    assert np.array_equal(es.signs, es.net_coefficients)
    assert es.n_vertices == square.n


def test_two_path_on_doubled_path(path3):
    es = euler_structure(path3)
    assert sorted(es.added_vertices) == [(0, 2), (1, 2)]
    assert sorted(es.added_vertices.values()) == [3, 4]
    assert es.is_simple()
    assert es.is_closed()
    # each edge is walked once in each direction
    assert es.net_coefficients.tolist() == [0, 0]


def test_two_path_on_k4(k4):
    a = orient(k4)
    H = eulerize(k4)
    circuit = euler_circuit(k4, H)
    es = two_path_replacement(k4, a, H, circuit)
    assert len(es.added_vertices) == 2
    assert len(es.arcs) == len(circuit) + 2
    assert es.is_simple()


def test_two_path_rejects_incomplete_circuit(square):
    H = eulerize(square)
    circuit = euler_circuit(square, H)
    with pytest.raises(InvalidGraphError):
        two_path_replacement(square, orient(square), H, circuit[:-1])


def test_euler_machinery_on_random_graphs():
    for g in random_graphs(50, (3, 20), density=0.3, seed=3):
        es = euler_structure(g)
        assert np.all(es.degrees(g) % 2 == 0)
        walked = sorted((t.edge, t.copy) for t in es.circuit)
        assert walked == sorted((e, h) for e in range(g.m) for h in range(1, int(es.multiplicities[e]) + 1))
        assert es.circuit[0].source == es.circuit[-1].target
        assert all(p.target == q.source for p, q in zip(es.circuit, es.circuit[1:]))
        assert es.is_simple()
        assert es.is_closed()
