import numpy as np
import pytest

from decsynth.graphs import (DirectedGraph, UndirectedGraph, chordal_extension,
                             clique_indices, extract, inflate, is_acyclic,
                             is_chordal, maximal_cliques, undirected_closure)
from decsynth.system import BlockPartition


def line(n):
    return UndirectedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def test_undirected_closure():
    gp = DirectedGraph.from_edges(3, [(0, 1), (1, 0), (2, 1)])
    gu = undirected_closure(gp)
    assert gu.edges == frozenset({(0, 1), (1, 2)})


def test_is_chordal():
    assert is_chordal(line(5))[0]
    cycle4 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert not is_chordal(cycle4)[0]
    chordal, order = is_chordal(line(3))
    assert chordal and sorted(order) == [0, 1, 2]


def test_chordal_extension_four_cycle():
    cycle4 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    ext = chordal_extension(cycle4)
    assert is_chordal(ext)[0]
    assert len(ext.edges - cycle4.edges) == 1
    # already-chordal graphs come back unchanged
    assert chordal_extension(line(4)) is line(4) or \
        chordal_extension(line(4)).edges == line(4).edges


def test_maximal_cliques_line():
    s = maximal_cliques(line(3))
    assert s.cliques == ((0, 1), (1, 2))
    assert s.overlap_nodes == (1,)
    assert s.overlap_edges == ()
    assert s.node_cliques[1] == (0, 1)


def test_maximal_cliques_eq42_pattern():
    g = UndirectedGraph.from_edges(
        4, [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)])
    s = maximal_cliques(g)
    assert s.cliques == ((0, 1, 3), (1, 2, 3))
    assert s.overlap_nodes == (1, 3)
    assert s.overlap_edges == ((1, 3),)
    assert s.edge_cliques[(1, 3)] == (0, 1)


def test_maximal_cliques_rejects_nonchordal_and_bad_order():
    cycle4 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    with pytest.raises(ValueError):
        maximal_cliques(cycle4)
    # eliminating the middle of a path first leaves its ends non-adjacent
    with pytest.raises(ValueError):
        maximal_cliques(line(3), order=(1, 0, 2))


def test_is_acyclic():
    ok, order = is_acyclic(DirectedGraph.from_edges(3, [(0, 1), (1, 2)]))
    assert ok and order == [0, 1, 2]
    bad, none = is_acyclic(DirectedGraph.from_edges(2, [(0, 1), (1, 0)]))
    assert not bad and none is None


def test_extract_inflate_roundtrip():
    part = BlockPartition((2, 1, 2), (1, 1, 1), (2, 1, 2))
    assert list(clique_indices((0, 2), part)) == [0, 1, 3, 4]
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 5))
    X = X + X.T
    sub = extract(X, (0, 2), part)
    back = inflate(sub, (0, 2), part)
    assert np.array_equal(extract(back, (0, 2), part), sub)
    with pytest.raises(ValueError):
        inflate(np.eye(3), (0, 2), part)
