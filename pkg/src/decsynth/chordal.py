"""Clique-based decomposition of sparse block PSD matrices and the
closed-loop certificate matrix F(X, Z) used by the synthesis paths.

A chordal-sparse PSD matrix equals a sum of PSD matrices supported on the
maximal cliques.  ``decompose_psd`` constructs one such split: overlap
blocks are first divided equally among their cliques (which reproduces the
canonical small examples exactly); if some clique block comes out
indefinite, an elimination-order completion sweep is used instead, which
is exact for any PSD input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import PsdClass, classify_psd, require_symmetric
from .graphs import clique_indices, inflate
from .system import assemble_global

PSD_TOL = 1e-7


@dataclass(frozen=True)
class CliqueSplit:
    """One dense symmetric matrix per maximal clique (block-weighted sizes)."""

    blocks: tuple


def compose(split, structure, partition):
    """Sum of clique-block inflations: ``sum_k E_k^T X_k E_k``."""
    if len(split.blocks) != len(structure.cliques):
        raise ValueError("clique block count does not match structure")
    n = partition.total_n
    X = np.zeros((n, n))
    for Xk, clique in zip(split.blocks, structure.cliques):
        X += inflate(Xk, clique, partition)
    return X


def _check_support(X, structure, partition, tol=0.0):
    off = partition.offsets()
    N = partition.N
    for i in range(N):
        for j in range(i + 1, N):
            if not structure.graph.has_edge(i, j):
                blk = X[off[i]:off[i + 1], off[j]:off[j + 1]]
                if np.abs(blk).max(initial=0.0) > tol:
                    raise ValueError(
                        f"matrix has support outside the chordal graph at block ({i},{j})")


def _equal_split(X, structure, partition):
    off = partition.offsets()
    blocks = []
    for clique in structure.cliques:
        idx = clique_indices(clique, partition)
        Xk = X[np.ix_(idx, idx)].copy()
        # local offsets of each block node inside the clique matrix
        loc = np.concatenate(([0], np.cumsum([partition.n[v] for v in clique]))).astype(int)
        for a, u in enumerate(clique):
            for b, v in enumerate(clique):
                if u == v:
                    share = len(structure.node_cliques[u])
                else:
                    e = (min(u, v), max(u, v))
                    share = len(structure.edge_cliques.get(e, (None,)))
                Xk[loc[a]:loc[a + 1], loc[b]:loc[b + 1]] /= share
        blocks.append(Xk)
    return blocks


def _completion_sweep(X, structure, partition):
    """Exact PSD split along the perfect elimination ordering.

    Each step peels off the minimal PSD piece supported on a node and its
    later neighbors (a clique of the graph), leaving a PSD remainder.
    """
    adj = structure.graph.adjacency()
    order = list(structure.elimination_order)
    pos = {v: i for i, v in enumerate(order)}
    R = X.copy()
    pieces = [np.zeros((clique_indices(c, partition).size,) * 2)
              for c in structure.cliques]
    for v in order:
        later = sorted(u for u in adj[v] if pos[u] > pos[v])
        support = [v] + later
        # lowest-index maximal clique containing this elimination clique
        k = next(i for i, c in enumerate(structure.cliques)
                 if set(support) <= set(c))
        idx_v = clique_indices((v,), partition)
        idx_u = clique_indices(tuple(later), partition) if later else np.array([], dtype=int)
        Svv = R[np.ix_(idx_v, idx_v)]
        Svu = R[np.ix_(idx_v, idx_u)]
        comp = Svu.T @ np.linalg.pinv(Svv, rcond=1e-12) @ Svu
        piece = np.zeros_like(R)
        piece[np.ix_(idx_v, idx_v)] = Svv
        piece[np.ix_(idx_v, idx_u)] = Svu
        piece[np.ix_(idx_u, idx_v)] = Svu.T
        piece[np.ix_(idx_u, idx_u)] = comp
        R = R - piece
        R[idx_v, :] = 0.0
        R[:, idx_v] = 0.0
        cidx = clique_indices(structure.cliques[k], partition)
        pieces[k] += piece[np.ix_(cidx, cidx)]
    return pieces


def decompose_psd(X, structure, partition, tol=PSD_TOL):
    """Split a chordal-sparse PSD matrix into PSD clique blocks.

    Returns a :class:`CliqueSplit` whose composition equals ``X``.  Raises
    on indefinite input, support outside the structure, or (for
    boundary-PSD inputs) when neither the equal split nor the completion
    sweep certifies PSD clique blocks within ``tol``.
    """
    X = require_symmetric(X)
    scale = max(1.0, float(np.abs(X).max(initial=0.0)))
    _check_support(X, structure, partition, tol=tol * scale)
    cls, lo = classify_psd(X, tol=tol * scale)
    if cls is PsdClass.INDEFINITE:
        raise ValueError(f"input is not PSD (min eigenvalue {lo:.3e})")

    blocks = _equal_split(X, structure, partition)
    if all(classify_psd(b, tol=tol * scale)[0] is not PsdClass.INDEFINITE
           for b in blocks):
        return CliqueSplit(blocks=tuple(blocks))

    blocks = _completion_sweep(X, structure, partition)
    for b in blocks:
        cls, lo = classify_psd(b, tol=tol * scale)
        if cls is PsdClass.INDEFINITE:
            raise ValueError(
                f"completion sweep failed to certify a PSD clique block (min eig {lo:.3e})")
    return CliqueSplit(blocks=tuple(blocks))


def build_F(sys, X_blocks, Z_blocks):
    """Certificate matrix ``F = -(AX - BZ) - (AX - BZ)^T - M M^T`` built
    block-wise from the couplings, with block-diagonal X and Z."""
    p = sys.partition
    if len(X_blocks) != p.N or len(Z_blocks) != p.N:
        raise ValueError("need one X and Z block per subsystem")
    off = p.offsets()
    F = np.zeros((p.total_n, p.total_n))
    for i, sub in enumerate(sys.subsystems):
        Xi = np.asarray(X_blocks[i], dtype=float)
        Zi = np.asarray(Z_blocks[i], dtype=float)
        if Xi.shape != (p.n[i], p.n[i]) or Zi.shape != (p.m[i], p.n[i]):
            raise ValueError(f"block {i}: X/Z dimensions do not match partition")
        G = sub.A @ Xi - sub.B @ Zi
        F[off[i]:off[i + 1], off[i]:off[i + 1]] = -G - G.T - sub.M @ sub.M.T
    for i in range(p.N):
        for j in range(i + 1, p.N):
            Aij = sys.coupling(i, j)
            Aji = sys.coupling(j, i)
            blk = -(Aij @ np.asarray(X_blocks[j], dtype=float)
                    + np.asarray(X_blocks[i], dtype=float) @ Aji.T)
            F[off[i]:off[i + 1], off[j]:off[j + 1]] = blk
            F[off[j]:off[j + 1], off[i]:off[i + 1]] = blk.T
    return F


def build_F_dense(sys, X_blocks, Z_blocks):
    """Reference computation of F via the assembled global matrices."""
    A, B, M, _, _ = assemble_global(sys)
    p = sys.partition
    n = p.total_n
    X = np.zeros((n, n))
    Z = np.zeros((int(sum(p.m)), n))
    off = p.offsets()
    mo = np.concatenate(([0], np.cumsum(p.m))).astype(int)
    for i in range(p.N):
        X[off[i]:off[i + 1], off[i]:off[i + 1]] = X_blocks[i]
        Z[mo[i]:mo[i + 1], off[i]:off[i + 1]] = Z_blocks[i]
    G = A @ X - B @ Z
    return -G - G.T - M @ M.T


@dataclass(frozen=True)
class CliqueBlockLayout:
    """Ownership of F's diagonal and edge blocks for one clique."""

    clique: tuple
    exclusive_nodes: tuple   # i in C_k \ N_0 (this clique owns X_i, Y_i, Z_i)
    shared_nodes: tuple      # i in C_k with |N_i| >= 2 (copies X_{i,k}, J_{ii,k})
    exclusive_edges: tuple   # edges of G_u inside C_k owned by this clique alone
    shared_edges: tuple      # edges in E_0 inside C_k (slack J_{ij,k})


def clique_blocks(structure, partition):
    """Per-clique ownership layout of the blocks of F."""
    layouts = []
    for k, clique in enumerate(structure.cliques):
        excl_nodes = tuple(v for v in clique if len(structure.node_cliques[v]) == 1)
        shared_nodes = tuple(v for v in clique if len(structure.node_cliques[v]) >= 2)
        excl_edges, shared_edges = [], []
        for a in range(len(clique)):
            for b in range(a + 1, len(clique)):
                e = (clique[a], clique[b])
                ks = structure.edge_cliques.get(e, ())
                if len(ks) >= 2:
                    shared_edges.append(e)
                elif ks == (k,):
                    excl_edges.append(e)
        layouts.append(CliqueBlockLayout(
            clique=clique, exclusive_nodes=excl_nodes, shared_nodes=shared_nodes,
            exclusive_edges=tuple(excl_edges), shared_edges=tuple(shared_edges)))
    return tuple(layouts)
