"""Round-synchronous message-passing simulation of the clique-distributed
synthesis, with a privacy auditor.

Agents are the clique solvers plus one coordinator per overlapping node
and per overlapping edge.  Each round has three barrier-separated phases:

* **A** — coordinators broadcast their consensus values and multipliers
  to the cliques that share them;
* **B** — cliques solve their proximal subproblems and send the shared
  variable copies back;
* **C** — coordinators run their own updates, step the multipliers, and
  jointly decide whether to stop (each owns the residual contributions of
  its consensus equations).

The phases call the exact same pure update functions as the monolithic
driver in :mod:`.admm`, on the exact same worker objects, with scalars
reduced in the same canonical order — so the residual trace and the final
gains agree bit for bit.

Privacy is enforced structurally: a :class:`Message` payload carries one
tagged iterate value, and the tag set is closed over iterate kinds, so
model matrices have no representable wire format.  ``audit_privacy``
re-checks the closed tag set and the clique/coordinator adjacency of
every logged message as defense in depth.  Agents hold only their model
shards; the global system object is not retained by the deployment.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from . import admm
from .linalg import NumericalFailure, is_hurwitz
from .synth import SynthStatus, SynthesisResult, h2_norm, recover_gain
from .system import DecentralizedController, closed_loop

#: The closed payload-tag set.  "consensus" and "multiplier" flow
#: coordinator -> clique, "copy" flows clique -> coordinator, "stop" is
#: the coordinators' joint halt token.  Nothing else is representable.
ITERATE_TAGS = frozenset({"consensus", "multiplier", "copy", "stop"})


@dataclass(frozen=True, order=True)
class AgentId:
    """Identity of one agent.

    ``kind`` is ``"clique"`` (key = member node tuple), ``"node"``
    (key = (i,)) or ``"edge"`` (key = (u, v)); node ids are 0-based
    internally and rendered 1-based.
    """

    kind: str
    key: tuple

    def __post_init__(self):
        if self.kind not in ("clique", "node", "edge"):
            raise ValueError(f"unknown agent kind {self.kind!r}")

    @property
    def label(self):
        members = ",".join(str(v + 1) for v in self.key)
        return f"{self.kind}({members})"


@dataclass(frozen=True)
class ModelShard:
    """The model data one agent is entitled to hold.

    Keys are 1-based: ``A_i``/``B_i``/``M_i``/``Q_i``/``R_i`` for
    subsystem data, ``A_i_j`` for coupling blocks.
    """

    owner: AgentId
    matrices: dict


@dataclass(frozen=True)
class Message:
    round: int
    sender: AgentId
    receiver: AgentId
    tag: str
    eq: tuple = None            # consensus equation the value belongs to
    value: object = None


class TranscriptLog:
    """Append-only message log; immutable once the run freezes it."""

    def __init__(self):
        self._messages = []
        self._frozen = False

    def append(self, msg):
        if self._frozen:
            raise RuntimeError("transcript is frozen")
        self._messages.append(msg)

    def extend(self, msgs):
        for m in msgs:
            self.append(m)

    def freeze(self):
        self._frozen = True

    @property
    def messages(self):
        return tuple(self._messages)

    def __len__(self):
        return len(self._messages)

    def __iter__(self):
        return iter(self._messages)


@dataclass
class CliqueAgent:
    id: AgentId
    k: int
    worker: object              # admm.CliqueWorker
    shard: ModelShard
    subsystems: dict            # node id -> SubsystemModel (entitled data)
    x: dict = None

    def objective_terms(self):
        """Ordered (trace(Q X), trace(R Y)) pairs over exclusive nodes."""
        out = []
        for i in self.worker.exclusive:
            sub = self.subsystems[i]
            out.append((float(np.trace(sub.Q @ self.x[f"X{i}"])),
                        float(np.trace(sub.R @ self.x[f"Y{i}"]))))
        return out


@dataclass
class CoordinatorAgent:
    id: AgentId
    worker: object              # admm.NodeWorker or admm.EdgeWorker
    shard: ModelShard
    eqs: tuple                  # consensus equations owned, canonical order
    subsystem: object = None    # node coordinators only
    y: dict = None
    lam: dict = None

    def y_value(self, eq):
        kind, _, k = eq
        if kind == "nX":
            return self.y["X"]
        if kind in ("nJ", "eJ"):
            return self.y[f"J{k}"]
        if kind == "eXu":
            return self.y["Xu"]
        if kind == "eXv":
            return self.y["Xv"]
        raise KeyError(eq)

    def update(self, targets):
        if self.id.kind == "node":
            return admm.y_update(self.worker, targets)
        return admm.y_update_edge(self.worker, targets)

    def objective_terms(self):
        sub = self.subsystem
        return (float(np.trace(sub.Q @ self.y["X"])),
                float(np.trace(sub.R @ self.y["Y"])))


@dataclass
class Deployment:
    """Agent set plus the structural (model-free) bookkeeping of a layout."""

    partition: object
    structure: object
    opts: object
    cliques: tuple              # CliqueAgent, clique order
    coordinators: tuple         # CoordinatorAgent, nodes then edges
    equations: tuple
    eq_shapes: dict
    consensus_dim: int

    @property
    def agents(self):
        return self.cliques + self.coordinators

    def clique_for(self, k):
        return self.cliques[k]

    def messages_per_round(self):
        """Phase A sends two messages per equation, phase B one."""
        return 3 * len(self.equations)


def _clique_shard(sys, structure, k):
    clique = structure.cliques[k]
    mats = {}
    for i in clique:
        sub = sys.subsystems[i]
        mats[f"A_{i + 1}"] = sub.A
        mats[f"B_{i + 1}"] = sub.B
        mats[f"M_{i + 1}"] = sub.M
        mats[f"Q_{i + 1}"] = sub.Q
        mats[f"R_{i + 1}"] = sub.R
    for (i, j), Aij in sorted(sys.couplings.items()):
        if i in clique and j in clique:
            mats[f"A_{i + 1}_{j + 1}"] = Aij
    return ModelShard(owner=AgentId("clique", tuple(clique)), matrices=mats)


def _node_shard(sys, i):
    sub = sys.subsystems[i]
    mats = {f"A_{i + 1}": sub.A, f"B_{i + 1}": sub.B, f"M_{i + 1}": sub.M,
            f"Q_{i + 1}": sub.Q, f"R_{i + 1}": sub.R}
    return ModelShard(owner=AgentId("node", (i,)), matrices=mats)


def _edge_shard(sys, e):
    u, v = e
    mats = {}
    if (u, v) in sys.couplings:
        mats[f"A_{u + 1}_{v + 1}"] = sys.couplings[(u, v)]
    if (v, u) in sys.couplings:
        mats[f"A_{v + 1}_{u + 1}"] = sys.couplings[(v, u)]
    return ModelShard(owner=AgentId("edge", e), matrices=mats)


def deploy(sys, structure=None, opts=None, solver_opts=None):
    """Compile the clique layout and split it into sharded agents.

    The returned :class:`Deployment` holds no reference to ``sys``; each
    agent carries only the model data its shard entitles it to.
    """
    opts = opts or admm.AdmmOptions()
    structure = structure or admm.default_structure(sys)
    layout = admm.build_layout(sys, structure, opts, solver_opts)
    cliques = tuple(
        CliqueAgent(id=AgentId("clique", tuple(structure.cliques[w.k])),
                    k=w.k, worker=w, shard=_clique_shard(sys, structure, w.k),
                    subsystems={i: sys.subsystems[i] for i in w.clique})
        for w in layout.cliques)
    coordinators = []
    for w in layout.nodes:
        eqs = tuple((kind, w.i, k) for k in w.ks for kind in ("nX", "nJ"))
        coordinators.append(CoordinatorAgent(
            id=AgentId("node", (w.i,)), worker=w, shard=_node_shard(sys, w.i),
            eqs=eqs, subsystem=sys.subsystems[w.i]))
    for w in layout.edges:
        eqs = tuple((kind, w.e, k) for k in w.ks
                    for kind in ("eJ", "eXu", "eXv"))
        coordinators.append(CoordinatorAgent(
            id=AgentId("edge", w.e), worker=w, shard=_edge_shard(sys, w.e),
            eqs=eqs))
    return Deployment(partition=sys.partition, structure=structure, opts=opts,
                      cliques=cliques, coordinators=tuple(coordinators),
                      equations=layout.equations, eq_shapes=layout.eq_shapes,
                      consensus_dim=layout.consensus_dim)


@dataclass
class DistributedRun:
    """Raw outcome of the rounds: gains, trace, and failure bookkeeping."""

    converged: bool
    iterations: int
    history: list               # (primal, dual, objective) per round
    xz: tuple = None            # per-node (X, Z) from the owning agent
    objective: float = None
    failed_agent: str = None
    failure: str = None


def _sorted_batch(msgs, eq_index):
    return sorted(msgs, key=lambda m: (eq_index[m.eq], m.tag))


def run_distributed(deployment, opts=None, schedule_seed=None):
    """Execute the rounds; returns (:class:`DistributedRun`, transcript).

    ``schedule_seed`` permutes the within-phase agent processing order;
    barrier semantics make the result independent of it (the transcript is
    logged in canonical equation order either way).  ``opts`` may override
    the deploy-time tolerances but not ``rho``, which is compiled into the
    subproblems.
    """
    opts = opts or deployment.opts
    if opts.rho != deployment.opts.rho:
        raise ValueError("rho is fixed at deploy time; redeploy to change it")
    rng = random.Random(schedule_seed) if schedule_seed is not None else None

    def ordered(agents):
        agents = list(agents)
        if rng is not None:
            rng.shuffle(agents)
        return agents

    part = deployment.partition
    eq_index = {eq: idx for idx, eq in enumerate(deployment.equations)}
    owner = {eq: c for c in deployment.coordinators for eq in c.eqs}
    for a in deployment.cliques:
        a.x = a.worker.init_values(part)
    for c in deployment.coordinators:
        c.y = c.worker.init_values(part)
        c.lam = {eq: np.zeros(deployment.eq_shapes[eq]) for eq in c.eqs}

    log = TranscriptLog()
    history = []
    h = 0
    converged = False
    failed = None
    while h < opts.max_iter:
        h += 1
        # phase A: coordinators broadcast (consensus value, multiplier)
        batch = []
        for c in ordered(deployment.coordinators):
            for eq in c.eqs:
                to = deployment.clique_for(eq[2]).id
                batch.append(Message(h, c.id, to, "consensus", eq, c.y_value(eq)))
                batch.append(Message(h, c.id, to, "multiplier", eq, c.lam[eq]))
        log.extend(_sorted_batch(batch, eq_index))
        inbox = {(m.receiver, m.eq, m.tag): m.value for m in batch}

        # phase B: cliques solve locally, return the shared copies
        batch = []
        try:
            for a in ordered(deployment.cliques):
                targets = {}
                for eqs in a.worker.copy_eqs.values():
                    for eq in eqs:
                        targets[eq] = (inbox[(a.id, eq, "consensus")]
                                       - inbox[(a.id, eq, "multiplier")])
                a.x = admm.x_update(a.worker, targets)
                for var, eqs in a.worker.copy_eqs.items():
                    for eq in eqs:
                        batch.append(Message(h, a.id, owner[eq].id, "copy",
                                             eq, a.x[var]))
        except admm.SubproblemFailure as exc:
            failed = exc
            break
        log.extend(_sorted_batch(batch, eq_index))
        copies = {m.eq: m.value for m in batch}

        # phase C: coordinator updates, residual contributions, multipliers
        p2 = {}
        d2 = {}
        norms = {}
        try:
            for c in ordered(deployment.coordinators):
                targets = {eq: copies[eq] + c.lam[eq] for eq in c.eqs}
                y_prev = c.y
                prev_vals = {eq: c.y_value(eq) for eq in c.eqs}
                c.y = c.update(targets)
                gaps = {}
                for eq in c.eqs:
                    gap = copies[eq] - c.y_value(eq)
                    dy = c.y_value(eq) - prev_vals[eq]
                    gaps[eq] = gap
                    p2[eq] = float(np.sum(gap * gap))
                    d2[eq] = float(np.sum(dy * dy))
                c.lam = admm.lambda_update(c.lam, gaps, opts.dual_step)
                for eq in c.eqs:
                    cv, yv, lv = copies[eq], c.y_value(eq), c.lam[eq]
                    norms[eq] = (float(np.sum(cv * cv)),
                                 float(np.sum(yv * yv)),
                                 float(np.sum(lv * lv)))
                del y_prev
        except admm.SubproblemFailure as exc:
            failed = exc
            break

        # joint stop decision: reduce the logged per-equation scalars in
        # canonical order (bitwise the monolithic reduction)
        ps = ds = 0.0
        nx = ny = nl = 0.0
        for eq in deployment.equations:
            ps += p2[eq]
            ds += d2[eq]
        for eq in deployment.equations:
            a, b, c_ = norms[eq]
            nx += a
            ny += b
            nl += c_
        primal = float(np.sqrt(ps))
        dual = float(opts.rho * np.sqrt(ds))
        obj = 0.0
        for a in deployment.cliques:
            for tq, tr in a.objective_terms():
                obj += tq
                obj += tr
        for c in deployment.coordinators:
            if c.id.kind == "node":
                tq, tr = c.objective_terms()
                obj += tq
                obj += tr
        history.append((primal, dual, obj))
        absolute = opts.tol * np.sqrt(max(deployment.consensus_dim, 1))
        eps_pri = absolute + opts.tol * max(np.sqrt(nx), np.sqrt(ny))
        eps_dual = absolute + opts.tol * opts.rho * np.sqrt(nl)
        if not deployment.equations or (primal <= eps_pri and dual <= eps_dual):
            converged = True
            batch = []
            for c in deployment.coordinators:
                for k in sorted(set(eq[2] for eq in c.eqs)):
                    batch.append(Message(h, c.id, deployment.clique_for(k).id,
                                         "stop"))
            log.extend(batch)
            break

    log.freeze()
    if failed is not None:
        return DistributedRun(converged=False, iterations=h - 1,
                              history=history, failed_agent=failed.agent,
                              failure=str(failed)), log

    node_cliques = deployment.structure.node_cliques
    coord = {c.id.key[0]: c for c in deployment.coordinators
             if c.id.kind == "node"}
    xz = []
    for i in range(part.N):
        ks = node_cliques[i]
        if len(ks) == 1:
            vals = deployment.cliques[ks[0]].x
            xz.append((vals[f"X{i}"], vals[f"Z{i}"]))
        else:
            vals = coord[i].y
            xz.append((vals["X"], vals["Z"]))
    objective = history[-1][2] if history else None
    return DistributedRun(converged=converged, iterations=h, history=history,
                          xz=tuple(xz), objective=objective), log


def certify(outcome, sys):
    """Turn a :class:`DistributedRun` into a :class:`SynthesisResult`.

    Certification (gain recovery, stability, performance) needs the full
    model, so it runs on the operator's side, outside the agent network.
    """
    if outcome.failure is not None:
        infeasible = (outcome.iterations == 0
                      and "infeasible" in outcome.failure)
        status = SynthStatus.INFEASIBLE if infeasible else SynthStatus.NUMERICAL_LIMIT
        return SynthesisResult(status=status, method="distributed",
                               iterations=outcome.iterations,
                               message=outcome.failure)
    try:
        ctrl = DecentralizedController(
            gains=tuple(recover_gain(X, Z) for X, Z in outcome.xz))
    except NumericalFailure as exc:
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT,
                               method="distributed",
                               iterations=outcome.iterations, message=str(exc))
    if not outcome.converged:
        h2 = (h2_norm(sys, ctrl)
              if is_hurwitz(closed_loop(sys, ctrl)) else None)
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT,
                               method="distributed", controller=ctrl,
                               objective=outcome.objective,
                               iterations=outcome.iterations, h2=h2,
                               message="max iterations reached before tolerance")
    if not is_hurwitz(closed_loop(sys, ctrl)):
        return SynthesisResult(status=SynthStatus.UNSTABLE, method="distributed",
                               controller=ctrl, objective=outcome.objective,
                               iterations=outcome.iterations,
                               message="converged iterate is not stabilizing")
    return SynthesisResult(status=SynthStatus.SUCCESS, method="distributed",
                           controller=ctrl, objective=outcome.objective,
                           iterations=outcome.iterations,
                           h2=h2_norm(sys, ctrl))


def synthesize(sys, structure=None, opts=None, solver_opts=None,
               schedule_seed=None):
    """Deploy, run the rounds, certify.  Returns (result, transcript, run)."""
    deployment = deploy(sys, structure, opts, solver_opts)
    outcome, log = run_distributed(deployment, schedule_seed=schedule_seed)
    return certify(outcome, sys), log, outcome


@dataclass
class AuditReport:
    passed: bool
    violations: list
    entries: list               # (round, from, to, tag) for every message

    def __str__(self):
        head = "PASS" if self.passed else "FAIL"
        lines = [f"privacy audit: {head} ({len(self.entries)} messages)"]
        lines += [f"  VIOLATION: {v}" for v in self.violations]
        return "\n".join(lines)


def audit_privacy(log):
    """Structural privacy audit of a transcript.

    Passes iff every payload tag belongs to the closed iterate-tag set and
    every message travels between a clique and a coordinator whose node or
    edge is contained in that clique.  Model matrices are unrepresentable
    under these tags, so a passing audit certifies that no model data of
    any subsystem left its cliques.
    """
    violations = []
    entries = []
    for idx, m in enumerate(log):
        entries.append((m.round, m.sender.label, m.receiver.label, m.tag))
        if m.tag not in ITERATE_TAGS:
            violations.append(
                f"message {idx} ({m.sender.label} -> {m.receiver.label}) "
                f"tagged {m.tag!r}, not an iterate kind")
            continue
        ends = {m.sender, m.receiver}
        clique = next((a for a in ends if a.kind == "clique"), None)
        coord = next((a for a in ends if a.kind != "clique"), None)
        if clique is None or coord is None:
            violations.append(
                f"message {idx} does not cross a clique/coordinator boundary "
                f"({m.sender.label} -> {m.receiver.label})")
            continue
        if not set(coord.key) <= set(clique.key):
            violations.append(
                f"message {idx}: {coord.label} is not part of {clique.label}")
    return AuditReport(passed=not violations, violations=violations,
                       entries=entries)


def write_transcript(log, path, include_values=False):
    """Export as JSON lines: {round, from, to, tag, shape} per message."""
    with open(path, "w") as fh:
        for m in log:
            rec = {"round": m.round, "from": m.sender.label,
                   "to": m.receiver.label, "tag": m.tag,
                   "shape": list(np.shape(m.value)) if m.value is not None else None}
            if include_values and m.value is not None:
                rec["value"] = np.asarray(m.value).tolist()
            fh.write(json.dumps(rec) + "\n")
