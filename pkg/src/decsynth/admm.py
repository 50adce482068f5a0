"""Consensus ADMM over the clique decomposition of the restriction SDP.

The global certificate LMI ``F(X, Z) >= 0`` is replaced by one PSD block
``J_k >= 0`` per maximal clique of (the chordal extension of) the
undirected plant graph.  Blocks of F that belong to a single clique are
written directly in that clique's model data; blocks shared between
cliques become slack variables tied together through coordinators:

* a node coordinator for each overlapping node ``i`` owns the consensus
  values ``X_i, Y_i, Z_i`` and the diagonal-slack splits ``J_hat_{ii,k}``
  bound by ``sum_k J_hat_{ii,k} = -(A_ii X_i - B_i Z_i) - (.)^T - M_i M_i^T``;
* an edge coordinator for each overlapping edge ``(u, v)`` owns copies of
  ``X_u`` and ``X_v`` plus the off-diagonal splits bound by
  ``sum_k J_hat_{uv,k} = -A_uv X_v - X_u A_vu^T`` (no cone constraints, so
  its update is a closed-form KKT solve).

Each scaled multiplier belongs to exactly one consensus equation, owned
by the coordinator on its y-side.  The x-, y- and lambda-updates are pure
functions of per-agent worker objects and per-equation value maps; the
monolithic driver here and the message-passing harness execute the same
functions in the same order, so their traces agree bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .graphs import chordal_extension, maximal_cliques, undirected_closure
from .linalg import NumericalFailure, is_hurwitz
from .stabilizability import plant_graph
from .synth import (SynthStatus, SynthesisResult, h2_norm, recover_gain,
                    schur_lmi, strictness_margin)
from .system import DecentralizedController


#: Largest dual step factor with a classical convergence guarantee
#: (Fortin & Glowinski: any step in (0, (1+sqrt(5))/2) works).
GOLDEN_STEP = 1.618


@dataclass
class AdmmOptions:
    rho: float = 5.0
    tol: float = 1e-3
    max_iter: int = 500
    dual_step: float = GOLDEN_STEP
    parallel: bool = False

    def __post_init__(self):
        if self.rho <= 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("require rho > 0, tol > 0, max_iter >= 1")
        if not 0.0 < self.dual_step < (1.0 + np.sqrt(5.0)) / 2.0:
            raise ValueError("dual_step must lie in (0, (1+sqrt(5))/2)")


def _sym(M):
    return 0.5 * (M + M.T)


def _mean(values):
    values = list(values)
    out = values[0].copy()
    for v in values[1:]:
        out = out + v
    return out / len(values)


@dataclass
class CliqueWorker:
    """One clique subproblem: local restriction blocks plus proximal copies."""

    k: int
    clique: tuple
    exclusive: tuple            # node ids whose X/Y/Z live here
    shared: tuple               # node ids with local copies Xc
    copy_eqs: dict              # local var name -> ordered tuple of equation ids
    compiled: sdp.CompiledSdp

    def init_values(self, part):
        vals = {}
        for i in self.exclusive:
            vals[f"X{i}"] = np.eye(part.n[i])
            vals[f"Y{i}"] = np.eye(part.m[i])
            vals[f"Z{i}"] = np.zeros((part.m[i], part.n[i]))
        for i in self.shared:
            vals[f"Xc{i}"] = np.eye(part.n[i])
            vals[f"Jn{i}"] = np.zeros((part.n[i], part.n[i]))
        for var, eqs in self.copy_eqs.items():
            if var.startswith("Je"):
                kind, e, _ = eqs[0]
                vals[var] = np.zeros((part.n[e[0]], part.n[e[1]]))
        return vals


@dataclass
class NodeWorker:
    """Coordinator for an overlapping node: consensus X/Y/Z and slack split."""

    i: int
    ks: tuple                   # cliques containing the node, ascending
    compiled: sdp.CompiledSdp

    def init_values(self, part):
        vals = {"X": np.eye(part.n[self.i]), "Y": np.eye(part.m[self.i]),
                "Z": np.zeros((part.m[self.i], part.n[self.i]))}
        for k in self.ks:
            vals[f"J{k}"] = np.zeros((part.n[self.i], part.n[self.i]))
        return vals


@dataclass
class EdgeWorker:
    """Coordinator for an overlapping edge: X copies and slack split.

    The update minimizes the proximal objective subject to one linear
    matrix equality, so it reduces to a linear solve in the multiplier
    Theta (KKT); ``solve_kkt`` inverts the positive definite operator
    ``m Theta + A_uv sym(A_uv^T Theta)/m + sym(Theta A_vu) A_vu^T / m``.
    """

    e: tuple                    # (u, v) with u < v
    ks: tuple
    Auv: np.ndarray
    Avu: np.ndarray
    kkt_inv: np.ndarray

    def init_values(self, part):
        u, v = self.e
        vals = {"Xu": np.eye(part.n[u]), "Xv": np.eye(part.n[v])}
        for k in self.ks:
            vals[f"J{k}"] = np.zeros((part.n[u], part.n[v]))
        return vals

    def solve_kkt(self, t_by_k, Tbar, Sbar):
        m = len(self.ks)
        Tbar, Sbar = _sym(Tbar), _sym(Sbar)
        C = sum(t_by_k.values()) + self.Auv @ Tbar + Sbar @ self.Avu.T
        theta = (self.kkt_inv @ C.ravel()).reshape(C.shape)
        vals = {"Xv": Tbar - _sym(self.Auv.T @ theta) / m,
                "Xu": Sbar - _sym(theta @ self.Avu) / m}
        for k in self.ks:
            vals[f"J{k}"] = t_by_k[k] - theta
        return vals


@dataclass
class ConsensusLayout:
    sys: object
    structure: object
    eps: float
    cliques: tuple              # CliqueWorker, in clique order
    nodes: tuple                # NodeWorker, ascending node id
    edges: tuple                # EdgeWorker, ascending edge
    equations: tuple            # all consensus equation ids, fixed order
    eq_shapes: dict             # equation id -> matrix shape

    @property
    def consensus_dim(self):
        return sum(s[0] * s[1] for s in self.eq_shapes.values())


def _owner_map(structure):
    """Node id -> clique index owning its exclusive variables (if any)."""
    return {i: ks[0] for i, ks in structure.node_cliques.items() if len(ks) == 1}


def _build_clique_worker(sys, structure, k, eps, opts, solver_opts):
    part = sys.partition
    clique = structure.cliques[k]
    overlap = set(structure.overlap_nodes)
    shared_e = set(structure.overlap_edges)
    exclusive = tuple(i for i in clique if i not in overlap)
    shared = tuple(i for i in clique if i in overlap)
    sizes = [part.n[i] for i in clique]
    off = np.concatenate(([0], np.cumsum(sizes))).astype(int)
    nk = int(off[-1])
    sel = {}
    for a, i in enumerate(clique):
        S = np.zeros((nk, part.n[i]))
        S[off[a]:off[a + 1], :] = np.eye(part.n[i])
        sel[i] = S
    variables, lmis, obj = [], [], {}
    terms = []
    const = np.zeros((nk, nk))
    for i in exclusive:
        sub = sys.subsystems[i]
        ni, mi = part.n[i], part.m[i]
        variables += [sdp.MatrixVar(f"X{i}", (ni, ni), "psd", lower=eps),
                      sdp.MatrixVar(f"Y{i}", (mi, mi), "sym"),
                      sdp.MatrixVar(f"Z{i}", (mi, ni), "free")]
        lmis.append(schur_lmi(f"Y{i}", f"Z{i}", f"X{i}", mi, ni))
        obj[f"X{i}"] = np.asarray(sub.Q, dtype=float)
        obj[f"Y{i}"] = np.asarray(sub.R, dtype=float)
        S = sel[i]
        terms += [sdp.Term(f"X{i}", left=-S @ sub.A, right=S.T),
                  sdp.Term(f"X{i}", left=-S, right=sub.A.T @ S.T),
                  sdp.Term(f"Z{i}", left=S @ sub.B, right=S.T),
                  sdp.Term(f"Z{i}", left=S, right=sub.B.T @ S.T, transpose=True)]
        const -= S @ (sub.M @ sub.M.T) @ S.T
    copy_eqs = {}
    for i in shared:
        ni = part.n[i]
        variables += [sdp.MatrixVar(f"Xc{i}", (ni, ni), "psd", lower=eps),
                      sdp.MatrixVar(f"Jn{i}", (ni, ni), "sym")]
        S = sel[i]
        terms.append(sdp.Term(f"Jn{i}", left=S, right=S.T))
        copy_eqs[f"Xc{i}"] = [("nX", i, k)]
        copy_eqs[f"Jn{i}"] = [("nJ", i, k)]
    xname = {i: (f"X{i}" if i in exclusive else f"Xc{i}") for i in clique}
    for a in range(len(clique)):
        for b in range(a + 1, len(clique)):
            u, v = clique[a], clique[b]
            Sa, Sb = sel[u], sel[v]
            if (u, v) in shared_e:
                name = f"Je{u}_{v}"
                variables.append(sdp.MatrixVar(name, (part.n[u], part.n[v]), "free"))
                terms += [sdp.Term(name, left=Sa, right=Sb.T),
                          sdp.Term(name, left=Sb, right=Sa.T, transpose=True)]
                copy_eqs[name] = [("eJ", (u, v), k)]
                copy_eqs[xname[u]].append(("eXu", (u, v), k))
                copy_eqs[xname[v]].append(("eXv", (u, v), k))
            else:
                Auv, Avu = sys.coupling(u, v), sys.coupling(v, u)
                terms += [
                    sdp.Term(xname[v], left=-Sa @ Auv, right=Sb.T),
                    sdp.Term(xname[u], left=-Sa, right=Avu.T @ Sb.T),
                    sdp.Term(xname[v], left=-Sb, right=Auv.T @ Sa.T),
                    sdp.Term(xname[u], left=-Sb @ Avu, right=Sa.T),
                ]
    lmis.append(sdp.MatAffine(terms=tuple(terms), const=const))
    copy_eqs = {name: tuple(eqs) for name, eqs in copy_eqs.items()}
    weights = {name: float(len(eqs)) for name, eqs in copy_eqs.items()}
    problem = sdp.SdpProblem(variables=variables, lmis=lmis, obj_linear=obj,
                             proximal=sorted(copy_eqs), rho=opts.rho,
                             prox_weights=weights)
    compiled = sdp.CompiledSdp(problem, solver_opts)
    return CliqueWorker(k=k, clique=clique, exclusive=exclusive, shared=shared,
                        copy_eqs=copy_eqs, compiled=compiled)


def _build_node_worker(sys, structure, i, eps, opts, solver_opts):
    part = sys.partition
    sub = sys.subsystems[i]
    ni, mi = part.n[i], part.m[i]
    ks = structure.node_cliques[i]
    variables = [sdp.MatrixVar("X", (ni, ni), "psd", lower=eps),
                 sdp.MatrixVar("Y", (mi, mi), "sym"),
                 sdp.MatrixVar("Z", (mi, ni), "free")]
    eq_terms = [sdp.Term("X", left=sub.A),
                sdp.Term("X", right=sub.A.T),
                sdp.Term("Z", left=-sub.B),
                sdp.Term("Z", right=-sub.B.T, transpose=True)]
    for k in ks:
        variables.append(sdp.MatrixVar(f"J{k}", (ni, ni), "sym"))
        eq_terms.append(sdp.Term(f"J{k}"))
    equality = sdp.MatAffine(terms=tuple(eq_terms), const=sub.M @ sub.M.T)
    obj = {"X": np.asarray(sub.Q, dtype=float), "Y": np.asarray(sub.R, dtype=float)}
    prox = ["X"] + [f"J{k}" for k in ks]
    weights = {"X": float(len(ks))}
    problem = sdp.SdpProblem(variables=variables, equalities=[equality],
                             lmis=[schur_lmi("Y", "Z", "X", mi, ni)],
                             obj_linear=obj, proximal=prox, rho=opts.rho,
                             prox_weights=weights)
    return NodeWorker(i=i, ks=tuple(ks), compiled=sdp.CompiledSdp(problem, solver_opts))


def _build_edge_worker(sys, structure, e):
    u, v = e
    part = sys.partition
    ks = structure.edge_cliques[e]
    Auv = np.asarray(sys.coupling(u, v), dtype=float)
    Avu = np.asarray(sys.coupling(v, u), dtype=float)
    m = len(ks)
    nu, nv = part.n[u], part.n[v]
    L = np.zeros((nu * nv, nu * nv))
    for col in range(nu * nv):
        E = np.zeros((nu, nv))
        E.flat[col] = 1.0
        img = m * E + (Auv @ _sym(Auv.T @ E)) / m + (_sym(E @ Avu) @ Avu.T) / m
        L[:, col] = img.ravel()
    return EdgeWorker(e=e, ks=tuple(ks), Auv=Auv, Avu=Avu,
                      kkt_inv=np.linalg.inv(L))


def build_layout(sys, structure, opts=None, solver_opts=None):
    """Compile all clique/coordinator subproblems for a chordal structure."""
    opts = opts or AdmmOptions()
    if solver_opts is None:
        # Inner solves run at interior-point accuracy; accept them when the
        # independent re-check certifies 1e-6 * scale, far below the 1e-3
        # consensus tolerance the iterates are driven to.
        solver_opts = sdp.SolveOptions(gap_tol=1e-6)
    eps = strictness_margin(sys)
    part = sys.partition
    cliques = tuple(_build_clique_worker(sys, structure, k, eps, opts, solver_opts)
                    for k in range(len(structure.cliques)))
    nodes = tuple(_build_node_worker(sys, structure, i, eps, opts, solver_opts)
                  for i in structure.overlap_nodes)
    edges = tuple(_build_edge_worker(sys, structure, e)
                  for e in structure.overlap_edges)
    equations, shapes = [], {}
    for i in structure.overlap_nodes:
        for k in structure.node_cliques[i]:
            equations += [("nX", i, k), ("nJ", i, k)]
            shapes[("nX", i, k)] = (part.n[i], part.n[i])
            shapes[("nJ", i, k)] = (part.n[i], part.n[i])
    for (u, v) in structure.overlap_edges:
        for k in structure.edge_cliques[(u, v)]:
            equations += [("eJ", (u, v), k), ("eXu", (u, v), k), ("eXv", (u, v), k)]
            shapes[("eJ", (u, v), k)] = (part.n[u], part.n[v])
            shapes[("eXu", (u, v), k)] = (part.n[u], part.n[u])
            shapes[("eXv", (u, v), k)] = (part.n[v], part.n[v])
    return ConsensusLayout(sys=sys, structure=structure, eps=eps,
                           cliques=cliques, nodes=nodes, edges=edges,
                           equations=tuple(equations), eq_shapes=shapes)


@dataclass
class AdmmState:
    h: int
    x: dict                     # clique index -> {var: value}
    y: dict                     # ("n", i) / ("e", (u,v)) -> {var: value}
    lam: dict                   # equation id -> multiplier
    history: list = field(default_factory=list)  # (primal, dual, objective)


def initialize(layout):
    """Deterministic start: X blocks identity, Y identity, Z and slacks zero."""
    part = layout.sys.partition
    x = {w.k: w.init_values(part) for w in layout.cliques}
    y = {}
    for w in layout.nodes:
        y[("n", w.i)] = w.init_values(part)
    for w in layout.edges:
        y[("e", w.e)] = w.init_values(part)
    lam = {eq: np.zeros(layout.eq_shapes[eq]) for eq in layout.equations}
    return AdmmState(h=0, x=x, y=y, lam=lam)


def _y_value(y, eq):
    kind, key, k = eq
    if kind == "nX":
        return y[("n", key)]["X"]
    if kind == "nJ":
        return y[("n", key)][f"J{k}"]
    if kind == "eJ":
        return y[("e", key)][f"J{k}"]
    if kind == "eXu":
        return y[("e", key)]["Xu"]
    if kind == "eXv":
        return y[("e", key)]["Xv"]
    raise KeyError(eq)


def _copy_value(layout, x, eq):
    kind, key, k = eq
    if kind == "nX":
        return x[k][f"Xc{key}"]
    if kind == "nJ":
        return x[k][f"Jn{key}"]
    if kind == "eJ":
        return x[k][f"Je{key[0]}_{key[1]}"]
    if kind == "eXu":
        return x[k][_clique_x_name(layout, key[0], k)]
    if kind == "eXv":
        return x[k][_clique_x_name(layout, key[1], k)]
    raise KeyError(eq)


def _clique_x_name(layout, i, k):
    worker = layout.cliques[k]
    return f"X{i}" if i in worker.exclusive else f"Xc{i}"


class SubproblemFailure(RuntimeError):
    def __init__(self, agent, status):
        super().__init__(f"{agent} subproblem returned {status.value}")
        self.agent = agent
        self.status = status


def x_update(worker, targets_by_eq):
    """Solve one clique subproblem; targets_by_eq maps eq -> (y - lambda)."""
    targets = {var: _mean(targets_by_eq[e] for e in eqs)
               for var, eqs in worker.copy_eqs.items()}
    sol = worker.compiled.solve(targets=targets)
    if not sol.optimal:
        raise SubproblemFailure(f"clique {worker.k}", sol.status)
    return sol.values


def y_update(worker, targets_by_eq):
    """Solve one node-coordinator subproblem; targets map eq -> (copy + lambda)."""
    targets = {"X": _mean(targets_by_eq[("nX", worker.i, k)] for k in worker.ks)}
    for k in worker.ks:
        targets[f"J{k}"] = targets_by_eq[("nJ", worker.i, k)]
    sol = worker.compiled.solve(targets=targets)
    if not sol.optimal:
        raise SubproblemFailure(f"node {worker.i}", sol.status)
    return sol.values


def y_update_edge(worker, targets_by_eq):
    """Closed-form edge-coordinator update; targets map eq -> (copy + lambda)."""
    e = worker.e
    t_by_k = {k: targets_by_eq[("eJ", e, k)] for k in worker.ks}
    Tbar = _mean(targets_by_eq[("eXv", e, k)] for k in worker.ks)
    Sbar = _mean(targets_by_eq[("eXu", e, k)] for k in worker.ks)
    return worker.solve_kkt(t_by_k, Tbar, Sbar)


def lambda_update(lam, gaps, step=1.0):
    """Scaled dual ascent: lambda += step * (copy - consensus value).

    ``step = 1`` is the textbook update; any step below the golden ratio
    keeps the convergence guarantee and larger steps shorten the slow
    multiplier ramp that dominates badly scaled instances.
    """
    return {eq: lam[eq] + step * gaps[eq] for eq in lam}


def x_targets(layout, state, worker):
    return {eq: _y_value(state.y, eq) - state.lam[eq]
            for eqs in worker.copy_eqs.values() for eq in eqs}


def y_targets(layout, x_new, lam, eqs):
    return {eq: _copy_value(layout, x_new, eq) + lam[eq] for eq in eqs}


def _node_eqs(worker):
    return [(kind, worker.i, k) for k in worker.ks for kind in ("nX", "nJ")]


def _edge_eqs(worker):
    return [(kind, worker.e, k) for k in worker.ks
            for kind in ("eJ", "eXu", "eXv")]


def objective_value(layout, x, y):
    """Global restriction objective at the current (x, y) iterate."""
    total = 0.0
    for w in layout.cliques:
        for i in w.exclusive:
            sub = layout.sys.subsystems[i]
            total += float(np.trace(sub.Q @ x[w.k][f"X{i}"]))
            total += float(np.trace(sub.R @ x[w.k][f"Y{i}"]))
    for w in layout.nodes:
        sub = layout.sys.subsystems[w.i]
        total += float(np.trace(sub.Q @ y[("n", w.i)]["X"]))
        total += float(np.trace(sub.R @ y[("n", w.i)]["Y"]))
    return total


def residuals(layout, state, y_prev, rho):
    """(primal, dual): consensus-gap norm and rho-scaled y-step norm."""
    p2 = 0.0
    d2 = 0.0
    for eq in layout.equations:
        gap = _copy_value(layout, state.x, eq) - _y_value(state.y, eq)
        p2 += float(np.sum(gap * gap))
        dy = _y_value(state.y, eq) - _y_value(y_prev, eq)
        d2 += float(np.sum(dy * dy))
    return float(np.sqrt(p2)), float(rho * np.sqrt(d2))


def stop_thresholds(layout, state, opts):
    """Absolute-plus-relative tolerances for the two residuals.

    Standard consensus-form criterion: the absolute part is
    ``tol * sqrt(consensus dimension)``; the relative part scales the
    primal tolerance by the larger of the stacked copy/consensus norms
    and the dual tolerance by the norm of the (unscaled) multipliers.
    """
    nx = ny = nl = 0.0
    for eq in layout.equations:
        cv = _copy_value(layout, state.x, eq)
        yv = _y_value(state.y, eq)
        lv = state.lam[eq]
        nx += float(np.sum(cv * cv))
        ny += float(np.sum(yv * yv))
        nl += float(np.sum(lv * lv))
    absolute = opts.tol * np.sqrt(max(layout.consensus_dim, 1))
    eps_pri = absolute + opts.tol * max(np.sqrt(nx), np.sqrt(ny))
    eps_dual = absolute + opts.tol * opts.rho * np.sqrt(nl)
    return float(eps_pri), float(eps_dual)


def step(layout, state, opts, pool=None):
    """One full iteration: x-phase, y-phase, residuals, lambda-phase."""
    if pool is not None:
        jobs = [(w, x_targets(layout, state, w)) for w in layout.cliques]
        results = list(pool.map(lambda job: x_update(*job), jobs))
        x_new = {w.k: vals for w, vals in zip(layout.cliques, results)}
    else:
        x_new = {w.k: x_update(w, x_targets(layout, state, w))
                 for w in layout.cliques}
    y_new = dict(state.y)
    for w in layout.nodes:
        tgt = y_targets(layout, x_new, state.lam, _node_eqs(w))
        y_new[("n", w.i)] = y_update(w, tgt)
    for w in layout.edges:
        tgt = y_targets(layout, x_new, state.lam, _edge_eqs(w))
        y_new[("e", w.e)] = y_update_edge(w, tgt)
    nxt = AdmmState(h=state.h + 1, x=x_new, y=y_new, lam=state.lam,
                    history=state.history)
    primal, dual = residuals(layout, nxt, state.y, opts.rho)
    nxt.history.append((primal, dual, objective_value(layout, x_new, y_new)))
    gaps = {eq: _copy_value(layout, x_new, eq) - _y_value(y_new, eq)
            for eq in layout.equations}
    nxt.lam = lambda_update(state.lam, gaps, opts.dual_step)
    return nxt


def recover_controller(layout, state):
    """Assemble gains: exclusive nodes from their clique, shared from coordinators."""
    owner = _owner_map(layout.structure)
    gains = []
    for i in range(layout.sys.N):
        if i in owner:
            vals = state.x[owner[i]]
            X, Z = vals[f"X{i}"], vals[f"Z{i}"]
        else:
            vals = state.y[("n", i)]
            X, Z = vals["X"], vals["Z"]
        gains.append(recover_gain(X, Z))
    return DecentralizedController(gains=tuple(gains))


def default_structure(sys):
    gu = undirected_closure(plant_graph(sys))
    return maximal_cliques(chordal_extension(gu))


def run(sys, structure=None, opts=None, solver_opts=None):
    """Full consensus-ADMM synthesis; returns (SynthesisResult, AdmmState)."""
    opts = opts or AdmmOptions()
    structure = structure or default_structure(sys)
    layout = build_layout(sys, structure, opts, solver_opts)
    state = initialize(layout)
    pool = None
    if opts.parallel and len(layout.cliques) > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=len(layout.cliques))
    converged = False
    try:
        while state.h < opts.max_iter:
            try:
                state = step(layout, state, opts, pool)
            except SubproblemFailure as exc:
                status = (SynthStatus.INFEASIBLE
                          if exc.status is sdp.SolveStatus.INFEASIBLE and state.h == 0
                          else SynthStatus.NUMERICAL_LIMIT)
                return SynthesisResult(status=status, method="admm",
                                       iterations=state.h, message=str(exc)), state
            primal, dual, _ = state.history[-1]
            eps_pri, eps_dual = stop_thresholds(layout, state, opts)
            if not layout.equations or (primal <= eps_pri and dual <= eps_dual):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    return finalize(layout, state, converged), state


def finalize(layout, state, converged):
    from .system import closed_loop

    try:
        ctrl = recover_controller(layout, state)
    except NumericalFailure as exc:
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT, method="admm",
                               iterations=state.h, message=str(exc))
    objective = state.history[-1][2] if state.history else None
    if not converged:
        # Best iterate is still reported; a stabilizing one carries its
        # certified performance so callers can count it Table-I style.
        h2 = (h2_norm(layout.sys, ctrl)
              if is_hurwitz(closed_loop(layout.sys, ctrl)) else None)
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT, method="admm",
                               controller=ctrl, objective=objective,
                               iterations=state.h, h2=h2,
                               message="max iterations reached before tolerance")
    if not is_hurwitz(closed_loop(layout.sys, ctrl)):
        return SynthesisResult(status=SynthStatus.UNSTABLE, method="admm",
                               controller=ctrl, objective=objective,
                               iterations=state.h,
                               message="converged iterate is not stabilizing")
    return SynthesisResult(status=SynthStatus.SUCCESS, method="admm",
                           controller=ctrl, objective=objective,
                           iterations=state.h,
                           h2=h2_norm(layout.sys, ctrl))


def write_trace(state, path):
    """Residual trace CSV: iteration, primal_residual, dual_residual, objective."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "primal_residual", "dual_residual", "objective"])
        for h, (p, d, obj) in enumerate(state.history, start=1):
            w.writerow([h, repr(p), repr(d), repr(obj)])
