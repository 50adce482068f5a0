"""Certificates and classifiers for decentralized stabilizability.

Three sufficient routes to a block-diagonal Lyapunov certificate are
implemented: full actuation (exact local cancellation plus diagonal
dominance), acyclic plant graphs with locally stabilizable subsystems,
and the weak-dynamic-coupling LMI with a-priori fixed positive definite
weights.  The restriction SDP itself doubles as a certificate since its
feasibility is exactly strong decentralized stabilizability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp, synth
from .graphs import DirectedGraph, is_acyclic
from .linalg import is_hurwitz, svd, sym_sqrt
from .system import DecentralizedController, closed_loop


def check_fully_actuated(sys, rank_tol=1e-9):
    """True iff every B_i has full row rank (relative singular-value test)."""
    for sub in sys.subsystems:
        s = np.linalg.svd(sub.B, compute_uv=False)
        if sub.B.shape[0] > sub.B.shape[1]:
            return False
        if s.size == 0 or s[min(sub.B.shape) - 1] <= rank_tol * max(1.0, s[0]):
            return False
    return True


def fully_actuated_gain(sys, margin=1.0):
    """Cancellation gains K_ii with closed-loop diagonal blocks -alpha_i I.

    alpha_i is the stated margin plus the worst row sum of the incoming
    coupling blocks, which makes the closed loop strictly diagonally
    dominant with negative diagonal, hence diagonally stable.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if not check_fully_actuated(sys):
        raise ValueError("system is not fully actuated")
    gains = []
    for i, sub in enumerate(sys.subsystems):
        ni = sys.partition.n[i]
        rowsum = np.zeros(ni)
        for (ti, j), Aij in sys.couplings.items():
            if ti == i:
                rowsum += np.abs(Aij).sum(axis=1)
        alpha = margin + float(rowsum.max(initial=0.0))
        U, s, Vt = svd(sub.B)
        # B_i = U [Gamma 0] V^T with Gamma invertible (full row rank)
        pinv = Vt.T[:, :ni] @ np.diag(1.0 / s[:ni]) @ U.T
        gains.append(pinv @ (sub.A + alpha * np.eye(ni)))
    return DecentralizedController(gains=tuple(gains))


def check_stabilizable_lmi(A, B, opts=None):
    """Stabilizability of (A, B) via the homogeneous LMI.

    Feasibility of ``A X + X A^T - B Z - Z^T B^T <= -I, X >= I`` is an
    exact characterization.  Returns True/False, or None when the solver
    hits its numerical limit (indeterminate, never coerced).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = A.shape[0], B.shape[1]
    variables = [sdp.MatrixVar("X", (n, n), "psd", lower=1.0),
                 sdp.MatrixVar("Z", (m, n), "free")]
    lmi = sdp.MatAffine(terms=(
        sdp.Term("X", left=-A),
        sdp.Term("X", right=-A.T),
        sdp.Term("Z", left=B),
        sdp.Term("Z", right=B.T, transpose=True),
    ), const=-np.eye(n))
    problem = sdp.SdpProblem(variables=variables, lmis=[lmi])
    sol = sdp.solve(problem, opts)
    if sol.optimal:
        return True
    if sol.status is sdp.SolveStatus.INFEASIBLE:
        return False
    return None


def stabilizing_gain_lmi(A, B, opts=None):
    """A stabilizing gain K = Z X^{-1} from the stabilizability LMI, or None."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = A.shape[0], B.shape[1]
    variables = [sdp.MatrixVar("X", (n, n), "psd", lower=1.0),
                 sdp.MatrixVar("Z", (m, n), "free")]
    lmi = sdp.MatAffine(terms=(
        sdp.Term("X", left=-A),
        sdp.Term("X", right=-A.T),
        sdp.Term("Z", left=B),
        sdp.Term("Z", right=B.T, transpose=True),
    ), const=-np.eye(n))
    # Keep the feasible point bounded and well-conditioned.
    obj = {"X": np.eye(n)}
    sol = sdp.solve(sdp.SdpProblem(variables=variables, lmis=[lmi], obj_linear=obj), opts)
    if not sol.optimal:
        return None
    return synth.recover_gain(sol.values["X"], sol.values["Z"])


def plant_graph(sys):
    return DirectedGraph.from_edges(sys.N, sys.plant_edges())


def check_topologically_weak(sys, opts=None):
    """(acyclic?, per-subsystem stabilizability flags)."""
    acyclic, _ = is_acyclic(plant_graph(sys))
    local = [check_stabilizable_lmi(sub.A, sub.B, opts) for sub in sys.subsystems]
    return acyclic, local


def identity_weights(sys):
    """Default PD weights: W_ij = I for every coupling edge."""
    return {(i, j): np.eye(sys.partition.n[j]) for (i, j) in sys.couplings}


@dataclass(frozen=True)
class NodeCertificate:
    gain: np.ndarray       # K_ii
    lyapunov: np.ndarray   # P_i = X_i^{-1}


def check_dynamically_weak(sys, weights=None, opts=None, delta=1e-8):
    """Per-node weak-dynamic-coupling LMIs with fixed PD weights.

    For each node, feasibility (in X_i = P_i^{-1}, Z_i = K_ii X_i) of::

        [[A_ii X - B_i Z + (.)^T + sum_j A_ij W_ij^{-1} A_ij^T,  X W_hat],
         [W_hat X,                                               -I     ]]  < 0

    with ``W_hat = (sum over outgoing edges of W_ji)^{1/2}``.  Returns a
    dict of per-node :class:`NodeCertificate` on success, else None (the
    condition is sufficient only).
    """
    weights = identity_weights(sys) if weights is None else weights
    for key, W in weights.items():
        d = np.linalg.eigvalsh(np.asarray(W, dtype=float))
        if d[0] <= 0:
            raise ValueError(f"weight W_{key} is not positive definite")
    certs = {}
    for i, sub in enumerate(sys.subsystems):
        ni, mi = sys.partition.n[i], sys.partition.m[i]
        C = np.zeros((ni, ni))
        for (ti, j), Aij in sys.couplings.items():
            if ti == i:
                C += Aij @ np.linalg.solve(np.asarray(weights[(i, j)], dtype=float), Aij.T)
        Wout = np.zeros((ni, ni))
        for (j, si), _ in sys.couplings.items():
            if si == i:
                Wout += np.asarray(weights[(j, i)], dtype=float)
        What = sym_sqrt(Wout)
        S1 = np.vstack([np.eye(ni), np.zeros((ni, ni))])
        S2 = np.vstack([np.zeros((ni, ni)), np.eye(ni)])
        # negate the block LMI so the constraint reads ">= delta*I" after closure
        terms = (
            sdp.Term("X", left=-S1 @ sub.A, right=S1.T),
            sdp.Term("X", left=-S1, right=sub.A.T @ S1.T),
            sdp.Term("Z", left=S1 @ sub.B, right=S1.T),
            sdp.Term("Z", left=S1, right=sub.B.T @ S1.T, transpose=True),
            sdp.Term("X", left=-S1, right=What @ S2.T),
            sdp.Term("X", left=-S2 @ What, right=S1.T),
        )
        const = (-S1 @ C @ S1.T + S2 @ np.eye(ni) @ S2.T
                 - delta * np.eye(2 * ni))
        variables = [sdp.MatrixVar("X", (ni, ni), "psd", lower=1e-6),
                     sdp.MatrixVar("Z", (mi, ni), "free")]
        problem = sdp.SdpProblem(variables=variables,
                                 lmis=[sdp.MatAffine(terms=terms, const=const)])
        sol = sdp.solve(problem, opts)
        if not sol.optimal:
            return None
        X = sol.values["X"]
        K = synth.recover_gain(X, sol.values["Z"])
        certs[i] = NodeCertificate(gain=K, lyapunov=np.linalg.inv(X))
    return certs


def block_diag_lyapunov_feasible(Acl, partition, opts=None):
    """Feasibility of a block-diagonal Lyapunov certificate for a fixed
    closed-loop matrix: block-diag P >= I with Acl^T P + P Acl <= -I."""
    Acl = np.asarray(Acl, dtype=float)
    n = partition.total_n
    variables = [sdp.MatrixVar(f"P{i}", (partition.n[i],) * 2, "psd", lower=1.0)
                 for i in range(partition.N)]
    terms = []
    for i in range(partition.N):
        Pi = np.zeros((partition.n[i], n))
        Pi[:, partition.state_slice(i)] = np.eye(partition.n[i])
        terms += [
            sdp.Term(f"P{i}", left=-Acl.T @ Pi.T, right=Pi),
            sdp.Term(f"P{i}", left=-Pi.T, right=Pi @ Acl),
        ]
    lmi = sdp.MatAffine(terms=tuple(terms), const=-np.eye(n))
    sol = sdp.solve(sdp.SdpProblem(variables=variables, lmis=[lmi]), opts)
    if sol.optimal:
        return True
    if sol.status is sdp.SolveStatus.INFEASIBLE:
        return False
    return None


@dataclass
class StabilizabilityReport:
    fully_actuated: bool
    acyclic: bool
    local_stabilizable: list
    dynamically_weak: dict = None
    sigma0: bool = None
    sigma2_certified: bool = False
    restriction: synth.SynthesisResult = None
    constructed_gain: DecentralizedController = None
    gain_provenance: str = None
    notes: list = field(default_factory=list)


def classify(sys, opts=None):
    """Run every certificate and assemble a report.

    The constructed gain comes from the first succeeding certificate in
    the order restriction, dynamically-weak, acyclic, fully-actuated; the
    restriction is preferred because it also optimizes the H2 bound.
    """
    from .system import assemble_global

    fully = check_fully_actuated(sys)
    acyclic, local = check_topologically_weak(sys, opts)
    dyn = check_dynamically_weak(sys, opts=opts)
    A, B, _, _, _ = assemble_global(sys)
    sigma0 = check_stabilizable_lmi(A, B, opts)
    restriction = synth.solve_restriction(sys, opts)
    report = StabilizabilityReport(
        fully_actuated=fully, acyclic=acyclic, local_stabilizable=local,
        dynamically_weak=dyn, sigma0=sigma0, restriction=restriction)
    topo_ok = acyclic and all(v is True for v in local)
    report.sigma2_certified = bool(restriction.success or dyn is not None
                                   or topo_ok or fully)
    if restriction.success:
        report.constructed_gain = restriction.controller
        report.gain_provenance = "restriction"
    elif dyn is not None:
        report.constructed_gain = DecentralizedController(
            gains=tuple(dyn[i].gain for i in range(sys.N)))
        report.gain_provenance = "dynamically_weak"
    elif topo_ok:
        gains = [stabilizing_gain_lmi(sub.A, sub.B, opts) for sub in sys.subsystems]
        if all(g is not None for g in gains):
            report.constructed_gain = DecentralizedController(gains=tuple(gains))
            report.gain_provenance = "acyclic"
        else:
            report.notes.append("acyclic certificate held but a local gain solve failed")
    elif fully:
        report.constructed_gain = fully_actuated_gain(sys)
        report.gain_provenance = "fully_actuated"
    if report.constructed_gain is not None:
        if not is_hurwitz(closed_loop(sys, report.constructed_gain)):
            report.notes.append("constructed gain failed the Hurwitz re-check")
            report.constructed_gain = None
            report.gain_provenance = None
    return report
