"""Plant graphs, chordality, maximal cliques, and overlap bookkeeping.

Nodes are 0-based integers throughout the library; the JSON/CLI surface is
1-based.  All orderings (maximum cardinality search, Kahn's topological
sort, min-degree fill) break ties by lowest node index so cliques, agent
ids, and ADMM variable layouts are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DirectedGraph:
    n_nodes: int
    edges: frozenset  # (source, target), no self-loops

    def __post_init__(self):
        for (u, v) in self.edges:
            if u == v:
                raise ValueError("self-loops are not stored")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"edge ({u},{v}) out of range")

    @staticmethod
    def from_edges(n_nodes, edges):
        return DirectedGraph(n_nodes, frozenset((int(u), int(v)) for u, v in edges))


@dataclass(frozen=True)
class UndirectedGraph:
    n_nodes: int
    edges: frozenset  # canonical (i, j) with i < j

    @staticmethod
    def from_edges(n_nodes, edges):
        canon = frozenset((min(int(u), int(v)), max(int(u), int(v)))
                          for u, v in edges if int(u) != int(v))
        return UndirectedGraph(n_nodes, canon)

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, u):
        out = set()
        for (a, b) in self.edges:
            if a == u:
                out.add(b)
            elif b == u:
                out.add(a)
        return out

    def adjacency(self):
        adj = {v: set() for v in range(self.n_nodes)}
        for (a, b) in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def undirected_closure(gp):
    """Symmetrize a directed plant graph: edge (i,j) iff (i,j) or (j,i) directed."""
    return UndirectedGraph.from_edges(gp.n_nodes, gp.edges)


def _mcs_order(g):
    """Maximum cardinality search visit order, lowest index on ties."""
    adj = g.adjacency()
    weight = [0] * g.n_nodes
    visited = [False] * g.n_nodes
    order = []
    for _ in range(g.n_nodes):
        best = max((w, -v) for v, w in enumerate(weight) if not visited[v])
        v = -best[1]
        visited[v] = True
        order.append(v)
        for u in adj[v]:
            if not visited[u]:
                weight[u] += 1
    return order


def _is_peo(g, order):
    """Check that ``order`` is a perfect elimination ordering of ``g``."""
    adj = g.adjacency()
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        for a in range(len(later)):
            for b in range(a + 1, len(later)):
                if later[b] not in adj[later[a]]:
                    return False
    return True


def is_chordal(g):
    """Chordality test via MCS; returns ``(chordal, elimination_order_or_None)``."""
    order = list(reversed(_mcs_order(g)))
    if _is_peo(g, order):
        return True, order
    return False, None


def chordal_extension(g):
    """Greedy min-degree fill; ties broken by lowest node index.

    Returns a chordal supergraph of ``g`` (identical when ``g`` is already
    chordal).
    """
    chordal, _ = is_chordal(g)
    if chordal:
        return g
    adj = g.adjacency()
    alive = set(range(g.n_nodes))
    fill = set()
    while alive:
        v = min(alive, key=lambda u: (len(adj[u] & alive), u))
        nbrs = sorted(adj[v] & alive)
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                x, y = nbrs[a], nbrs[b]
                if y not in adj[x]:
                    adj[x].add(y)
                    adj[y].add(x)
                    fill.add((x, y))
        alive.remove(v)
    return UndirectedGraph.from_edges(g.n_nodes, set(g.edges) | fill)


@dataclass(frozen=True)
class ChordalStructure:
    """Maximal cliques of a chordal graph plus overlap node/edge maps.

    ``cliques`` are ascending node tuples ordered by (smallest member,
    lexicographic).  ``node_cliques[i]`` lists the clique indices containing
    node ``i``; ``edge_cliques[(i,j)]`` likewise for each edge (i < j).
    ``overlap_nodes`` / ``overlap_edges`` are the members appearing in two
    or more cliques.
    """

    graph: UndirectedGraph
    elimination_order: tuple
    cliques: tuple
    node_cliques: dict = field(default_factory=dict)
    edge_cliques: dict = field(default_factory=dict)
    overlap_nodes: tuple = ()
    overlap_edges: tuple = ()


def maximal_cliques(g, order=None):
    """Build the :class:`ChordalStructure` of a chordal graph."""
    if order is None:
        chordal, order = is_chordal(g)
        if not chordal:
            raise ValueError("graph is not chordal; extend it first")
    elif not _is_peo(g, list(order)):
        raise ValueError("supplied order is not a perfect elimination ordering")
    adj = g.adjacency()
    pos = {v: i for i, v in enumerate(order)}
    candidates = []
    for v in order:
        c = tuple(sorted([v] + [u for u in adj[v] if pos[u] > pos[v]]))
        candidates.append(c)
    cliques = []
    for c in candidates:
        cs = set(c)
        if any(cs < set(o) for o in candidates):
            continue
        if any(set(o) == cs for o in cliques):
            continue
        cliques.append(c)
    cliques.sort(key=lambda c: (c[0], c))
    node_cliques = {v: tuple(k for k, c in enumerate(cliques) if v in c)
                    for v in range(g.n_nodes)}
    edge_cliques = {}
    for (a, b) in sorted(g.edges):
        ks = tuple(k for k, c in enumerate(cliques) if a in c and b in c)
        edge_cliques[(a, b)] = ks
    overlap_nodes = tuple(v for v in range(g.n_nodes) if len(node_cliques[v]) >= 2)
    overlap_edges = tuple(e for e in sorted(edge_cliques) if len(edge_cliques[e]) >= 2)
    return ChordalStructure(graph=g, elimination_order=tuple(order),
                            cliques=tuple(cliques), node_cliques=node_cliques,
                            edge_cliques=edge_cliques, overlap_nodes=overlap_nodes,
                            overlap_edges=overlap_edges)


def is_acyclic(gp):
    """Kahn's algorithm with min-index tie-break; returns (acyclic, order_or_None)."""
    indeg = [0] * gp.n_nodes
    out = {v: set() for v in range(gp.n_nodes)}
    for (u, v) in gp.edges:
        out[u].add(v)
        indeg[v] += 1
    ready = sorted(v for v in range(gp.n_nodes) if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        changed = False
        for u in sorted(out[v]):
            indeg[u] -= 1
            if indeg[u] == 0:
                ready.append(u)
                changed = True
        if changed:
            ready.sort()
    if len(order) == len(indeg):
        return True, order
    return False, None


def clique_indices(clique, partition):
    """Scalar row indices covered by the block nodes of a clique."""
    off = partition.offsets()
    idx = []
    for v in clique:
        idx.extend(range(int(off[v]), int(off[v + 1])))
    return np.asarray(idx, dtype=int)


def extract(X, clique, partition):
    """Principal submatrix of ``X`` on a clique's block rows/columns."""
    idx = clique_indices(clique, partition)
    X = np.asarray(X, dtype=float)
    return X[np.ix_(idx, idx)]


def inflate(Xk, clique, partition):
    """Place a clique-sized matrix at the clique's block positions, zero elsewhere."""
    idx = clique_indices(clique, partition)
    Xk = np.asarray(Xk, dtype=float)
    if Xk.shape != (idx.size, idx.size):
        raise ValueError(f"clique block has shape {Xk.shape}, expected ({idx.size},{idx.size})")
    n = partition.total_n
    X = np.zeros((n, n))
    X[np.ix_(idx, idx)] = Xk
    return X
