import numpy as np
import pytest
import scipy.linalg

from decsynth.linalg import (NumericalFailure, PsdClass, classify_psd,
                             is_hurwitz, require_symmetric, solve_lyapunov,
                             svd, sym_eigen, sym_sqrt)


def test_require_symmetric_accepts_and_symmetrizes():
    S = np.array([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
    out = require_symmetric(S)
    assert np.array_equal(out, out.T)


def test_require_symmetric_rejects():
    with pytest.raises(ValueError):
        require_symmetric(np.array([[1.0, 2.0], [0.0, 3.0]]))
    with pytest.raises(ValueError):
        require_symmetric(np.array([[1.0, 2.0, 3.0]]))
    with pytest.raises(ValueError):
        require_symmetric(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_sym_eigen_reconstructs():
    rng = np.random.default_rng(3)
    S = rng.normal(size=(5, 5))
    S = S + S.T
    d, V = sym_eigen(S)
    assert np.all(np.diff(d) >= 0)
    assert np.allclose(V @ np.diag(d) @ V.T, S, atol=1e-10)


def test_classify_psd_three_ways():
    assert classify_psd(np.eye(2))[0] is PsdClass.POSITIVE_DEFINITE
    cls, lo = classify_psd(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert cls is PsdClass.POSITIVE_SEMIDEFINITE
    assert abs(lo) <= 1e-9
    assert classify_psd(np.diag([1.0, -1.0]))[0] is PsdClass.INDEFINITE
    with pytest.raises(ValueError):
        classify_psd(np.eye(2), tol=0.0)


def test_svd_shapes_and_order():
    U, s, Vt = svd(np.array([[0.0, 2.0], [1.0, 0.0], [0.0, 0.0]]))
    assert s[0] >= s[1]
    assert np.allclose(U[:, :2] @ np.diag(s) @ Vt, [[0, 2], [1, 0], [0, 0]])


def test_solve_lyapunov_matches_scipy():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(n, n)) - (n + 1) * np.eye(n)
        Q = rng.normal(size=(n, n))
        Q = Q @ Q.T + np.eye(n)
        X = solve_lyapunov(A, Q)
        ref = scipy.linalg.solve_lyapunov(A, -Q)
        assert np.allclose(X, ref, atol=1e-8)


def test_solve_lyapunov_singular():
    # eigenvalue pair summing to zero -> no unique solution
    with pytest.raises(NumericalFailure):
        solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))


def test_is_hurwitz_basics():
    assert is_hurwitz(-np.eye(3))
    assert not is_hurwitz(np.zeros((2, 2)))
    assert not is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))  # marginal


def test_is_hurwitz_vs_trajectory_decay():
    """100 random 2x2 systems with analytically known eigenvalues.

    Triangular matrices have their diagonal as spectrum; spiral blocks
    [[s, w], [-w, s]] have eigenvalues s +- iw.  The trajectory oracle
    checks whether ||expm(A t)|| decays between two large horizons.
    """
    rng = np.random.default_rng(7)
    cases = 0
    while cases < 100:
        if rng.random() < 0.5:
            lam = rng.uniform(-2.0, 2.0, size=2)
            if np.any(np.abs(lam) < 0.05):
                continue
            A = np.array([[lam[0], rng.normal()], [0.0, lam[1]]])
            expect = bool(np.all(lam < 0))
        else:
            s = rng.uniform(-2.0, 2.0)
            if abs(s) < 0.05:
                continue
            w = rng.uniform(0.2, 2.0)
            A = np.array([[s, w], [-w, s]])
            expect = s < 0
        # long horizon so that even |Re lambda| = 0.05 modes (and their
        # nonnormal transients) have decayed by orders of magnitude
        with np.errstate(over="ignore"):
            decay = np.linalg.norm(scipy.linalg.expm(A * 400.0)) < 1e-3
        assert decay == expect
        assert is_hurwitz(A) == expect
        cases += 1
    assert cases == 100


def test_sym_sqrt():
    rng = np.random.default_rng(5)
    S = rng.normal(size=(4, 4))
    S = S @ S.T
    R = sym_sqrt(S)
    assert np.allclose(R @ R, S, atol=1e-9)
    with pytest.raises(ValueError):
        sym_sqrt(np.diag([1.0, -1.0]))
