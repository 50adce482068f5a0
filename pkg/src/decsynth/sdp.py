"""Small dense SDP layer used by every synthesis path.

Problems are stated declaratively (matrix variables, affine matrix
equalities/LMIs, linear trace objective plus optional proximal quadratic
terms) and solved with Clarabel, a deterministic primal-dual interior-point
solver.  Every optimal solution is re-validated post hoc (equality
residuals, PSD classification, complementary-slackness gap) independently
of solver internals; validation failure downgrades the status to
``NUMERICAL_LIMIT`` and callers treat that as failure.

:class:`CompiledSdp` caches the canonicalized problem with the proximal
targets as parameters, so the ADMM engine can re-solve the same subproblem
every iteration without recompilation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .linalg import sym_eigen


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_LIMIT = "numerical_limit"


@dataclass(frozen=True)
class MatrixVar:
    """A matrix decision variable.

    ``cone`` is ``"psd"`` (symmetric, ``V >= lower * I``), ``"sym"``
    (symmetric, unconstrained) or ``"free"`` (rectangular).
    """

    name: str
    shape: tuple
    cone: str = "free"
    lower: float = 0.0

    def __post_init__(self):
        if self.cone not in ("psd", "sym", "free"):
            raise ValueError(f"unknown cone {self.cone!r}")
        if self.cone in ("psd", "sym") and self.shape[0] != self.shape[1]:
            raise ValueError("psd/sym variables must be square")


@dataclass(frozen=True)
class Term:
    """Affine term ``L @ V @ R`` (``V.T`` when ``transpose``); L/R optional."""

    var: str
    left: np.ndarray = None
    right: np.ndarray = None
    transpose: bool = False


@dataclass(frozen=True)
class MatAffine:
    """Affine matrix expression ``sum(terms) + const``."""

    terms: tuple
    const: np.ndarray


@dataclass
class SdpProblem:
    variables: list
    equalities: list = field(default_factory=list)  # MatAffine == 0
    lmis: list = field(default_factory=list)        # MatAffine >> 0
    obj_linear: dict = field(default_factory=dict)  # var -> C, adds Tr(C.T V)
    proximal: list = field(default_factory=list)    # var names with targets
    rho: float = 0.0
    prox_weights: dict = field(default_factory=dict)  # var -> multiplicity w


@dataclass
class SolveOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 100


@dataclass
class SdpSolution:
    status: SolveStatus
    values: dict
    primal_objective: float = None
    iterations: int = 0
    gap: float = None
    max_equality_residual: float = None
    min_psd_margin: float = None

    @property
    def optimal(self):
        return self.status is SolveStatus.OPTIMAL


def _term_expr(term, cvx_vars):
    V = cvx_vars[term.var]
    e = V.T if term.transpose else V
    if term.left is not None:
        e = np.asarray(term.left, dtype=float) @ e
    if term.right is not None:
        e = e @ np.asarray(term.right, dtype=float)
    return e


def _term_value(term, values):
    V = values[term.var]
    e = V.T if term.transpose else V
    if term.left is not None:
        e = np.asarray(term.left, dtype=float) @ e
    if term.right is not None:
        e = e @ np.asarray(term.right, dtype=float)
    return e


def affine_value(aff, values):
    out = np.array(aff.const, dtype=float, copy=True)
    for t in aff.terms:
        out = out + _term_value(t, values)
    return out


class CompiledSdp:
    """A canonicalized problem whose proximal targets can be re-assigned."""

    def __init__(self, problem, opts=None):
        self.problem = problem
        self.opts = opts or SolveOptions()
        self._vars = {}
        self._params = {}
        self._psd_cons = {}
        constraints = []
        for mv in problem.variables:
            if mv.cone == "free":
                V = cp.Variable(mv.shape, name=mv.name)
            else:
                V = cp.Variable(mv.shape, name=mv.name, symmetric=True)
            self._vars[mv.name] = V
            if mv.cone == "psd":
                con = V - mv.lower * np.eye(mv.shape[0]) >> 0
                constraints.append(con)
                self._psd_cons[mv.name] = (con, mv.lower)
        for aff in problem.equalities:
            expr = np.asarray(aff.const, dtype=float)
            lhs = sum((_term_expr(t, self._vars) for t in aff.terms), start=expr)
            constraints.append(lhs == 0)
        for aff in problem.lmis:
            expr = np.asarray(aff.const, dtype=float)
            lhs = sum((_term_expr(t, self._vars) for t in aff.terms), start=expr)
            constraints.append(0.5 * (lhs + lhs.T) >> 0)
        obj = 0
        for name, C in problem.obj_linear.items():
            obj = obj + cp.trace(np.asarray(C, dtype=float).T @ self._vars[name])
        for name in problem.proximal:
            P = cp.Parameter(self._var_shape(name), name=f"target_{name}")
            self._params[name] = P
            w = float(problem.prox_weights.get(name, 1.0))
            # weight w stands for w identical-strength targets collapsed to their mean
            obj = obj + (w * problem.rho / 2.0) * cp.sum_squares(self._vars[name] - P)
        self._cvx = cp.Problem(cp.Minimize(obj), constraints)

    def _var_shape(self, name):
        for mv in self.problem.variables:
            if mv.name == name:
                return mv.shape
        raise KeyError(name)

    def solve(self, targets=None, initial=None):
        """Solve, optionally assigning proximal targets first.

        ``initial`` is accepted for interface symmetry (warm-start
        injection); Clarabel ignores externally supplied starting points.
        """
        targets = targets or {}
        for name, P in self._params.items():
            if name not in targets:
                raise ValueError(f"missing proximal target for {name!r}")
            P.value = np.asarray(targets[name], dtype=float)
        opts = self.opts
        try:
            self._cvx.solve(
                solver=cp.CLARABEL,
                max_iter=max(opts.max_iter, 50),
                tol_gap_abs=min(opts.gap_tol, 1e-9),
                tol_gap_rel=min(opts.gap_tol, 1e-9),
                tol_feas=min(opts.feas_tol, 1e-9),
            )
        except cp.error.SolverError:
            return SdpSolution(status=SolveStatus.NUMERICAL_LIMIT, values={})
        # "inaccurate" optima are kept as candidates: the post-hoc checks
        # below decide acceptance independently of the solver's own verdict.
        status = {
            cp.OPTIMAL: SolveStatus.OPTIMAL,
            cp.OPTIMAL_INACCURATE: SolveStatus.OPTIMAL,
            cp.INFEASIBLE: SolveStatus.INFEASIBLE,
            cp.UNBOUNDED: SolveStatus.UNBOUNDED,
        }.get(self._cvx.status, SolveStatus.NUMERICAL_LIMIT)
        iters = getattr(self._cvx.solver_stats, "num_iters", 0) or 0
        if status is not SolveStatus.OPTIMAL or self._cvx.value is None:
            return SdpSolution(status=status, values={}, iterations=iters)
        values = {}
        for mv in self.problem.variables:
            val = np.asarray(self._vars[mv.name].value, dtype=float)
            if mv.cone in ("psd", "sym"):
                val = 0.5 * (val + val.T)
            values[mv.name] = val
        sol = SdpSolution(status=SolveStatus.OPTIMAL, values=values,
                          primal_objective=float(self._cvx.value), iterations=iters)
        self._validate(sol, targets)
        return sol

    def _validate(self, sol, targets):
        """Independent post-hoc optimality checks; downgrade on failure."""
        p, opts = self.problem, self.opts
        scale = 1.0 + abs(sol.primal_objective or 0.0)
        max_resid = 0.0
        for aff in p.equalities:
            r = affine_value(aff, sol.values)
            max_resid = max(max_resid, float(np.abs(r).max(initial=0.0)))
        min_margin = np.inf
        gap = 0.0
        for name, (con, lower) in self._psd_cons.items():
            V = sol.values[name]
            d, _ = sym_eigen(V - lower * np.eye(V.shape[0]))
            min_margin = min(min_margin, float(d[0]) if d.size else 0.0)
            lam = con.dual_value
            if lam is not None:
                gap += abs(float(np.sum((V - lower * np.eye(V.shape[0])) * np.asarray(lam))))
        sol.max_equality_residual = max_resid
        sol.min_psd_margin = None if np.isinf(min_margin) else min_margin
        sol.gap = gap
        ok = max_resid <= opts.feas_tol * 10 * scale
        ok = ok and (sol.min_psd_margin is None or sol.min_psd_margin >= -1e-7 * scale)
        # with a zero objective every feasible point is optimal, so the
        # complementary-slackness gap carries no information
        if p.obj_linear or p.proximal:
            ok = ok and gap <= opts.gap_tol * scale
        if not ok:
            sol.status = SolveStatus.NUMERICAL_LIMIT


def solve(problem, opts=None, initial=None):
    """One-shot solve of an :class:`SdpProblem`.

    Proximal targets for a one-shot problem are supplied in
    ``problem.proximal`` as a dict ``{var: target}``.
    """
    targets = None
    if isinstance(problem.proximal, dict):
        targets = problem.proximal
        problem = SdpProblem(
            variables=problem.variables, equalities=problem.equalities,
            lmis=problem.lmis, obj_linear=problem.obj_linear,
            proximal=list(targets), rho=problem.rho,
            prox_weights=problem.prox_weights)
    compiled = CompiledSdp(problem, opts)
    return compiled.solve(targets=targets, initial=initial)


def check_feasible(problem, opts=None):
    """Feasibility wrapper: solve with a zero objective.

    Returns ``(feasible, solution)`` where the solution carries a strictly
    feasible point (within the declared margins) when one exists.
    """
    stripped = SdpProblem(variables=problem.variables,
                          equalities=problem.equalities, lmis=problem.lmis)
    sol = solve(stripped, opts)
    return sol.optimal, sol
