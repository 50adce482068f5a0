"""Centralized synthesis paths: the block-diagonal convex restriction,
closed-loop performance certification via the Gramian, and the two
LQR-style baselines (localized and truncated).

All paths share the same SDP layer; baselines use the unstructured
state-feedback formulation rather than Riccati equations so no
nonsymmetric eigensolver is needed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .linalg import NumericalFailure, is_hurwitz, solve_lyapunov
from .system import DecentralizedController, assemble_global, closed_loop


class SynthStatus(enum.Enum):
    SUCCESS = "success"
    INFEASIBLE = "infeasible"
    NUMERICAL_LIMIT = "numerical_limit"
    UNSTABLE = "unstable"


@dataclass
class SynthesisResult:
    status: SynthStatus
    method: str
    controller: object = None          # DecentralizedController or dense ndarray
    lyapunov_blocks: tuple = ()
    aux_Y: tuple = ()
    aux_Z: tuple = ()
    objective: float = None            # upper bound on ||T_zd||^2
    h2: float = None                   # certified via Gramian recomputation
    iterations: int = None
    message: str = ""

    @property
    def success(self):
        return self.status is SynthStatus.SUCCESS


def strictness_margin(sys):
    """Closure margin for the strict inequalities, scaled by the data norm."""
    A, B, M, _, _ = assemble_global(sys)
    scale = max(1.0, np.linalg.norm(A), np.linalg.norm(B), np.linalg.norm(M))
    return 1e-6 * scale


def _selector(partition, i):
    """Row-selection matrix P_i with P_i x = x_i (shape n_i x n)."""
    n = partition.total_n
    P = np.zeros((partition.n[i], n))
    P[:, partition.state_slice(i)] = np.eye(partition.n[i])
    return P


def schur_lmi(name_Y, name_Z, name_X, m, n):
    """LMI [[Y, Z], [Z^T, X]] >= 0 as a MatAffine over the three variables."""
    S1 = np.vstack([np.eye(m), np.zeros((n, m))])
    S2 = np.vstack([np.zeros((m, n)), np.eye(n)])
    terms = (
        sdp.Term(name_Y, left=S1, right=S1.T),
        sdp.Term(name_Z, left=S1, right=S2.T),
        sdp.Term(name_Z, left=S2, right=S1.T, transpose=True),
        sdp.Term(name_X, left=S2, right=S2.T),
    )
    return sdp.MatAffine(terms=terms, const=np.zeros((m + n, m + n)))


def restriction_problem(sys, eps=None, with_objective=True):
    """The block-diagonal restriction as an SdpProblem.

    Variables per subsystem: X_i (PSD, >= eps I), Y_i, Z_i with the Schur
    coupling block; one global LMI F(X, Z) >= 0.
    """
    p = sys.partition
    A, B, M, _, _ = assemble_global(sys)
    eps = strictness_margin(sys) if eps is None else eps
    mo = np.concatenate(([0], np.cumsum(p.m))).astype(int)
    variables, lmis, obj = [], [], {}
    f_terms = []
    for i, sub in enumerate(sys.subsystems):
        ni, mi = p.n[i], p.m[i]
        variables += [
            sdp.MatrixVar(f"X{i}", (ni, ni), "psd", lower=eps),
            sdp.MatrixVar(f"Y{i}", (mi, mi), "sym"),
            sdp.MatrixVar(f"Z{i}", (mi, ni), "free"),
        ]
        lmis.append(schur_lmi(f"Y{i}", f"Z{i}", f"X{i}", mi, ni))
        if with_objective:
            obj[f"X{i}"] = np.asarray(sub.Q, dtype=float)
            obj[f"Y{i}"] = np.asarray(sub.R, dtype=float)
        Pi = _selector(p, i)
        Ai = A[:, p.state_slice(i)]
        Bi = B[:, mo[i]:mo[i + 1]]
        f_terms += [
            sdp.Term(f"X{i}", left=-Ai, right=Pi),
            sdp.Term(f"X{i}", left=-Pi.T, right=Ai.T),
            sdp.Term(f"Z{i}", left=Bi, right=Pi),
            sdp.Term(f"Z{i}", left=Pi.T, right=Bi.T, transpose=True),
        ]
    lmis.append(sdp.MatAffine(terms=tuple(f_terms), const=-(M @ M.T)))
    return sdp.SdpProblem(variables=variables, lmis=lmis, obj_linear=obj)


def recover_gain(X, Z, cond_limit=1e-10):
    """K = Z X^{-1} by factorization; reject badly conditioned X."""
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] < cond_limit * max(1.0, s[0]):
        raise NumericalFailure(f"Lyapunov block nearly singular (sigma_min {s[-1]:.3e})")
    return np.linalg.solve(X.T, Z.T).T


def _status_from(sol):
    return {
        sdp.SolveStatus.INFEASIBLE: SynthStatus.INFEASIBLE,
        sdp.SolveStatus.UNBOUNDED: SynthStatus.NUMERICAL_LIMIT,
        sdp.SolveStatus.NUMERICAL_LIMIT: SynthStatus.NUMERICAL_LIMIT,
    }[sol.status]


def solve_restriction(sys, opts=None):
    """Solve the block-diagonal restriction and recover decentralized gains."""
    problem = restriction_problem(sys)
    sol = sdp.solve(problem, opts)
    if not sol.optimal:
        msg = ("not certified strongly decentralized stabilizable with this restriction"
               if sol.status is sdp.SolveStatus.INFEASIBLE else "SDP solve failed")
        return SynthesisResult(status=_status_from(sol), method="centralized", message=msg)
    N = sys.partition.N
    Xs = tuple(sol.values[f"X{i}"] for i in range(N))
    Ys = tuple(sol.values[f"Y{i}"] for i in range(N))
    Zs = tuple(sol.values[f"Z{i}"] for i in range(N))
    try:
        gains = tuple(recover_gain(Xs[i], Zs[i]) for i in range(N))
    except NumericalFailure as exc:
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT, method="centralized",
                               message=str(exc))
    K = DecentralizedController(gains=gains)
    h2 = h2_norm(sys, K)
    return SynthesisResult(status=SynthStatus.SUCCESS, method="centralized",
                           controller=K, lyapunov_blocks=Xs, aux_Y=Ys, aux_Z=Zs,
                           objective=sol.primal_objective, h2=h2)


def h2_norm(sys, controller):
    """Closed-loop H2 norm via the controllability Gramian.

    Solves ``(A-BK) W + W (A-BK)^T + M M^T = 0`` and returns
    ``sqrt(Tr(Q W) + Tr(K^T R K W))``; raises on a non-Hurwitz closed loop.
    """
    A, B, M, Q, R = assemble_global(sys)
    if isinstance(controller, DecentralizedController):
        K = controller.block_diag(sys.partition)
    else:
        K = np.asarray(controller, dtype=float)
    Acl = A - B @ K
    if not is_hurwitz(Acl):
        raise ValueError("closed loop is not Hurwitz; H2 norm undefined")
    W = solve_lyapunov(Acl, M @ M.T)
    val = float(np.trace(Q @ W) + np.trace(K.T @ R @ K @ W))
    return float(np.sqrt(max(val, 0.0)))


def unstructured_problem(A, B, M, Q, R, eps):
    """H2 state feedback without the block-diagonal restriction."""
    n, m = A.shape[0], B.shape[1]
    variables = [
        sdp.MatrixVar("X", (n, n), "psd", lower=eps),
        sdp.MatrixVar("Y", (m, m), "sym"),
        sdp.MatrixVar("Z", (m, n), "free"),
    ]
    lmis = [
        schur_lmi("Y", "Z", "X", m, n),
        sdp.MatAffine(terms=(
            sdp.Term("X", left=-A),
            sdp.Term("X", right=-A.T),
            sdp.Term("Z", left=B),
            sdp.Term("Z", right=B.T, transpose=True),
        ), const=-(M @ M.T)),
    ]
    obj = {"X": np.asarray(Q, dtype=float), "Y": np.asarray(R, dtype=float)}
    return sdp.SdpProblem(variables=variables, lmis=lmis, obj_linear=obj)


def solve_unstructured_h2(sys, opts=None):
    """Dense (centralized LQR-equivalent) H2 state feedback."""
    A, B, M, Q, R = assemble_global(sys)
    sol = sdp.solve(unstructured_problem(A, B, M, Q, R, strictness_margin(sys)), opts)
    if not sol.optimal:
        msg = "not stabilizable" if sol.status is sdp.SolveStatus.INFEASIBLE else "SDP solve failed"
        return SynthesisResult(status=_status_from(sol), method="unstructured", message=msg)
    try:
        K = recover_gain(sol.values["X"], sol.values["Z"])
    except NumericalFailure as exc:
        return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT, method="unstructured",
                               message=str(exc))
    h2 = h2_norm(sys, K)
    return SynthesisResult(status=SynthStatus.SUCCESS, method="unstructured",
                           controller=K, lyapunov_blocks=(sol.values["X"],),
                           aux_Y=(sol.values["Y"],), aux_Z=(sol.values["Z"],),
                           objective=sol.primal_objective, h2=h2)


def truncated_lqr(sys, opts=None):
    """Keep only the diagonal blocks of the centralized H2-optimal gain."""
    dense = solve_unstructured_h2(sys, opts)
    if not dense.success:
        return SynthesisResult(status=dense.status, method="truncated-lqr",
                               message=dense.message)
    p = sys.partition
    K = dense.controller
    mo = np.concatenate(([0], np.cumsum(p.m))).astype(int)
    gains = tuple(K[mo[i]:mo[i + 1], p.state_slice(i)] for i in range(p.N))
    ctrl = DecentralizedController(gains=gains)
    if not is_hurwitz(closed_loop(sys, ctrl)):
        return SynthesisResult(status=SynthStatus.UNSTABLE, method="truncated-lqr",
                               controller=ctrl, message="destabilizing truncation")
    return SynthesisResult(status=SynthStatus.SUCCESS, method="truncated-lqr",
                           controller=ctrl, h2=h2_norm(sys, ctrl))


def localized_lqr(sys, opts=None):
    """Per-subsystem H2 design ignoring the couplings, then a global check."""
    gains = []
    for i, sub in enumerate(sys.subsystems):
        eps = 1e-6 * max(1.0, np.linalg.norm(sub.A), np.linalg.norm(sub.B),
                         np.linalg.norm(sub.M))
        sol = sdp.solve(unstructured_problem(sub.A, sub.B, sub.M, sub.Q, sub.R, eps), opts)
        if not sol.optimal:
            return SynthesisResult(status=_status_from(sol), method="localized-lqr",
                                   message=f"subsystem {i + 1} local design failed")
        try:
            gains.append(recover_gain(sol.values["X"], sol.values["Z"]))
        except NumericalFailure as exc:
            return SynthesisResult(status=SynthStatus.NUMERICAL_LIMIT,
                                   method="localized-lqr", message=str(exc))
    ctrl = DecentralizedController(gains=tuple(gains))
    if not is_hurwitz(closed_loop(sys, ctrl)):
        return SynthesisResult(status=SynthStatus.UNSTABLE, method="localized-lqr",
                               controller=ctrl,
                               message="local gains destabilize the coupled system")
    return SynthesisResult(status=SynthStatus.SUCCESS, method="localized-lqr",
                           controller=ctrl, h2=h2_norm(sys, ctrl))
