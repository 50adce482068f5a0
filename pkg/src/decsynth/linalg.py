"""Dense small-matrix kernels shared by every other module.

All routines operate on plain numpy arrays.  Symmetric inputs are
validated (and symmetrized defensively) on entry; everything here is a
pure function of its arguments.
"""

from __future__ import annotations

import enum

import numpy as np

DEFAULT_TOL = 1e-9


class NumericalFailure(RuntimeError):
    """A dense factorization or iteration failed to converge."""


class PsdClass(enum.Enum):
    POSITIVE_DEFINITE = "positive_definite"
    POSITIVE_SEMIDEFINITE = "positive_semidefinite"
    INDEFINITE = "indefinite"


def require_symmetric(S, tol=1e-8):
    """Return the symmetrized copy of ``S``, rejecting clearly asymmetric input."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    dev = np.abs(S - S.T).max(initial=0.0)
    if dev > tol * max(1.0, np.abs(S).max(initial=0.0)):
        raise ValueError(f"matrix is not symmetric (max asymmetry {dev:.3e})")
    return 0.5 * (S + S.T)


def sym_eigen(S):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(d, V)`` with eigenvalues ``d`` ascending and orthogonal ``V``
    such that ``V @ diag(d) @ V.T == S`` up to roundoff.
    """
    S = require_symmetric(S)
    try:
        d, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh is robust
        raise NumericalFailure("symmetric eigendecomposition failed") from exc
    return d, V


def classify_psd(S, tol=DEFAULT_TOL):
    """Classify a symmetric matrix by its smallest eigenvalue.

    Positive definite if ``min eig > tol``, positive semidefinite if the
    minimum lies in ``[-tol, tol]``, indefinite otherwise.  Returns
    ``(PsdClass, min_eigenvalue)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d, _ = sym_eigen(S)
    lo = float(d[0]) if d.size else 0.0
    if lo > tol:
        cls = PsdClass.POSITIVE_DEFINITE
    elif lo >= -tol:
        cls = PsdClass.POSITIVE_SEMIDEFINITE
    else:
        cls = PsdClass.INDEFINITE
    return cls, lo


def svd(B):
    """Singular value decomposition ``B = U @ diag(s) @ Vt`` with s descending."""
    B = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(B)):
        raise ValueError("matrix has non-finite entries")
    try:
        U, s, Vt = np.linalg.svd(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("SVD failed to converge") from exc
    return U, s, Vt


def solve_lyapunov(A, Q):
    """Solve ``A X + X A^T + Q = 0`` for symmetric ``X``.

    Uses the Kronecker linear system ``(I (x) A + A (x) I) vec(X) = -vec(Q)``,
    which is exact for the small dimensions used here (documented limit
    n <= ~30).  Raises :class:`NumericalFailure` when the Kronecker system
    is singular, i.e. when some eigenvalue pair of ``A`` sums to zero.
    """
    A = np.asarray(A, dtype=float)
    Q = require_symmetric(Q)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("dimension mismatch in Lyapunov solve")
    K = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
    try:
        x = np.linalg.solve(K, -Q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("Lyapunov equation has no unique solution") from exc
    # Guard against near-singular systems that np.linalg.solve accepts.
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("Lyapunov equation has no unique solution")
    X = x.reshape(n, n)
    X = 0.5 * (X + X.T)
    resid = np.linalg.norm(A @ X + X @ A.T + Q, "fro")
    if resid > 1e-8 * max(1.0, np.linalg.norm(Q, "fro")):
        raise NumericalFailure(f"Lyapunov residual too large ({resid:.3e})")
    return X


def is_hurwitz(A):
    """Lyapunov test for Hurwitz stability.

    ``A`` is Hurwitz iff ``A X + X A^T + I = 0`` has a positive definite
    solution.  Avoids a nonsymmetric eigensolver; solve failure means the
    spectrum touches the imaginary axis, hence not Hurwitz.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    try:
        X = solve_lyapunov(A, np.eye(n))
    except NumericalFailure:
        return False
    cls, _ = classify_psd(X, tol=DEFAULT_TOL)
    return cls is PsdClass.POSITIVE_DEFINITE


def sym_sqrt(S, tol=1e-7):
    """Symmetric PSD square root via eigendecomposition."""
    d, V = sym_eigen(S)
    if d.size and d[0] < -tol * max(1.0, abs(float(d[-1])) if d.size else 1.0):
        raise ValueError("sym_sqrt requires a positive semidefinite matrix")
    d = np.clip(d, 0.0, None)
    return (V * np.sqrt(d)) @ V.T
