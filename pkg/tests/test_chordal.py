import numpy as np
import pytest

from conftest import make_eq42
from decsynth.chordal import (CliqueSplit, build_F, build_F_dense,
                              clique_blocks, compose, decompose_psd)
from decsynth.graphs import UndirectedGraph, maximal_cliques
from decsynth.linalg import PsdClass, classify_psd
from decsynth.system import BlockPartition


def line_structure(n):
    g = UndirectedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    return maximal_cliques(g)


def scalar_partition(n):
    return BlockPartition((1,) * n, (1,) * n, (1,) * n)


def test_example_line3_exact():
    """The canonical 3-node split: overlap diagonal divided equally."""
    X = np.array([[2.0, 1, 0], [1, 1, 1], [0, 1, 2]])
    part = scalar_partition(3)
    split = decompose_psd(X, line_structure(3), part)
    assert np.array_equal(split.blocks[0], np.array([[2.0, 1], [1, 0.5]]))
    assert np.array_equal(split.blocks[1], np.array([[0.5, 1], [1, 2.0]]))
    assert np.array_equal(compose(split, line_structure(3), part), X)
    for b in split.blocks:
        assert classify_psd(b, tol=1e-7)[0] is not PsdClass.INDEFINITE


def random_structure(rng):
    """Line, star, or the 4-node two-triangle pattern, with block sizes."""
    kind = rng.integers(0, 3)
    if kind == 0:
        n = int(rng.integers(2, 6))
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == 1:
        n = int(rng.integers(3, 6))
        edges = [(0, i) for i in range(1, n)]
    else:
        n = 4
        edges = [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]
    g = UndirectedGraph.from_edges(n, edges)
    sizes = tuple(int(rng.integers(1, 3)) for _ in range(n))
    part = BlockPartition(sizes, (1,) * n, sizes)
    return maximal_cliques(g), part


def random_sparse_psd(rng, structure, part):
    """Sum of clique-supported PSD pieces: chordal-sparse and PSD."""
    from decsynth.graphs import clique_indices
    n = part.total_n
    X = np.zeros((n, n))
    for c in structure.cliques:
        idx = clique_indices(c, part)
        G = rng.normal(size=(idx.size, idx.size + 1))
        X[np.ix_(idx, idx)] += G @ G.T
    return X


def test_compose_decompose_identity_property():
    rng = np.random.default_rng(42)
    for _ in range(100):
        structure, part = random_structure(rng)
        X = random_sparse_psd(rng, structure, part)
        split = decompose_psd(X, structure, part)
        assert np.allclose(compose(split, structure, part), X, atol=1e-9)
        scale = max(1.0, np.abs(X).max())
        for b in split.blocks:
            cls, _ = classify_psd(b, tol=1e-7 * scale)
            assert cls is not PsdClass.INDEFINITE


def test_decompose_rejects_bad_input():
    part = scalar_partition(3)
    s = line_structure(3)
    with pytest.raises(ValueError):
        decompose_psd(np.diag([1.0, -1.0, 1.0]), s, part)
    dense = np.ones((3, 3)) + 2 * np.eye(3)  # support includes edge (0, 2)
    with pytest.raises(ValueError):
        decompose_psd(dense, s, part)


def test_completion_sweep_path():
    """An instance where the equal split has an indefinite block."""
    part = scalar_partition(3)
    s = line_structure(3)
    X = np.array([[1.0, 1.0, 0.0], [1.0, 1.1, 1.0], [0.0, 1.0, 10.0]])
    split = decompose_psd(X, s, part)
    assert np.allclose(compose(split, s, part), X, atol=1e-9)
    for b in split.blocks:
        assert classify_psd(b, tol=1e-7 * 10)[0] is not PsdClass.INDEFINITE


def test_build_F_simple_values(eq42):
    # A = -I, B = 0, M = 0, X = I  ->  F = 2I
    from decsynth.system import InterconnectedSystem, SubsystemModel
    part = scalar_partition(2)
    subs = tuple(SubsystemModel(A=-np.eye(1), B=np.zeros((1, 1)), M=np.zeros((1, 1)),
                                Q=np.eye(1), R=np.eye(1)) for _ in range(2))
    sys_ = InterconnectedSystem(part, subs)
    F = build_F(sys_, [np.eye(1)] * 2, [np.zeros((1, 1))] * 2)
    assert np.array_equal(F, 2 * np.eye(2))

    F42 = build_F(eq42, [np.eye(1)] * 4, [np.zeros((1, 1))] * 4)
    assert np.allclose(F42, build_F_dense(eq42, [np.eye(1)] * 4,
                                          [np.zeros((1, 1))] * 4))


def test_build_F_matches_dense_property():
    from decsynth.system import InterconnectedSystem, SubsystemModel
    rng = np.random.default_rng(9)
    for _ in range(100):
        N = int(rng.integers(2, 5))
        sizes = tuple(int(rng.integers(1, 3)) for _ in range(N))
        part = BlockPartition(sizes, sizes, sizes)
        subs = tuple(SubsystemModel(A=rng.normal(size=(sizes[i],) * 2),
                                    B=rng.normal(size=(sizes[i],) * 2),
                                    M=rng.normal(size=(sizes[i],) * 2),
                                    Q=np.eye(sizes[i]), R=np.eye(sizes[i]))
                     for i in range(N))
        coup = {}
        for i in range(N):
            for j in range(N):
                if i != j and rng.random() < 0.4:
                    coup[(i, j)] = rng.normal(size=(sizes[i], sizes[j]))
        sys_ = InterconnectedSystem(part, subs, coup)
        X = [rng.normal(size=(s, s)) for s in sizes]
        X = [x + x.T for x in X]
        Z = [rng.normal(size=(s, s)) for s in sizes]
        F = build_F(sys_, X, Z)
        assert np.allclose(F, build_F_dense(sys_, X, Z), atol=1e-12)


def test_lemma_inequality_property():
    """X^T W X + Y^T W^{-1} Y - X^T Y - Y^T X is PSD for PD W."""
    rng = np.random.default_rng(21)
    for _ in range(100):
        p = int(rng.integers(1, 5))
        q = int(rng.integers(1, 5))
        X = rng.normal(size=(p, q))
        Y = rng.normal(size=(p, q))
        G = rng.normal(size=(p, p + 1))
        W = G @ G.T + 0.1 * np.eye(p)
        S = X.T @ W @ X + Y.T @ np.linalg.solve(W, Y) - X.T @ Y - Y.T @ X
        scale = max(1.0, np.abs(S).max())
        cls, _ = classify_psd(0.5 * (S + S.T), tol=1e-8 * scale)
        assert cls is not PsdClass.INDEFINITE


def test_clique_blocks_ownership(eq42):
    from decsynth.admm import default_structure
    s = default_structure(eq42)
    layouts = clique_blocks(s, eq42.partition)
    assert layouts[0].exclusive_nodes == (0,)
    assert layouts[0].shared_nodes == (1, 3)
    assert layouts[0].shared_edges == ((1, 3),)
    assert (0, 1) in layouts[0].exclusive_edges
    assert layouts[1].exclusive_nodes == (2,)

    line_layouts = clique_blocks(line_structure(3), scalar_partition(3))
    assert line_layouts[0].exclusive_nodes == (0,)
    assert line_layouts[0].shared_nodes == (1,)
    assert line_layouts[0].exclusive_edges == ((0, 1),)
    assert line_layouts[0].shared_edges == ()
