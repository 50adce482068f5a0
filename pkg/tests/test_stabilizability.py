import numpy as np
import pytest

from conftest import make_appendix_pair, make_chain, make_eq42
from decsynth import stabilizability as stab
from decsynth.linalg import is_hurwitz
from decsynth.system import (BlockPartition, InterconnectedSystem,
                             SubsystemModel, closed_loop)


def test_check_fully_actuated(eq42):
    assert stab.check_fully_actuated(eq42)
    assert not stab.check_fully_actuated(make_appendix_pair())
    # wide B with full row rank qualifies
    part = BlockPartition((2,), (3,), (2,))
    sub = SubsystemModel(A=np.eye(2), B=np.array([[1.0, 0, 1], [0, 1, 0]]),
                         M=np.eye(2), Q=np.eye(2), R=np.eye(3))
    assert stab.check_fully_actuated(InterconnectedSystem(part, (sub,)))


def test_fully_actuated_gain_property():
    """50 random fully actuated instances: gain is stabilizing and admits a
    block-diagonal Lyapunov certificate."""
    rng = np.random.default_rng(4)
    done = 0
    while done < 50:
        N = int(rng.integers(2, 5))
        sizes = tuple(int(rng.integers(1, 3)) for _ in range(N))
        part = BlockPartition(sizes, sizes, sizes)
        subs = tuple(SubsystemModel(
            A=rng.normal(size=(sizes[i],) * 2),
            B=rng.normal(size=(sizes[i],) * 2) + 2 * np.eye(sizes[i]),
            M=np.eye(sizes[i]), Q=np.eye(sizes[i]), R=np.eye(sizes[i]))
            for i in range(N))
        coup = {}
        for i in range(N):
            for j in range(N):
                if i != j and rng.random() < 0.5:
                    coup[(i, j)] = rng.normal(size=(sizes[i], sizes[j]))
        sys_ = InterconnectedSystem(part, subs, coup)
        if not stab.check_fully_actuated(sys_):
            continue
        ctrl = stab.fully_actuated_gain(sys_)
        Acl = closed_loop(sys_, ctrl)
        assert is_hurwitz(Acl)
        assert stab.block_diag_lyapunov_feasible(Acl, part) is True
        done += 1


def test_fully_actuated_gain_preconditions():
    with pytest.raises(ValueError):
        stab.fully_actuated_gain(make_appendix_pair())
    with pytest.raises(ValueError):
        stab.fully_actuated_gain(make_eq42(), margin=0.0)


def test_stabilizable_lmi_truths():
    assert stab.check_stabilizable_lmi([[1.0]], [[1.0]]) is True
    # unstable and uncontrollable: not stabilizable
    assert stab.check_stabilizable_lmi([[1.0]], [[0.0]]) is False
    # stable even without control
    assert stab.check_stabilizable_lmi([[-1.0]], [[0.0]]) is True
    K = stab.stabilizing_gain_lmi([[2.0]], [[1.0]])
    assert K is not None and is_hurwitz(np.array([[2.0]]) - K)


def test_topologically_weak():
    # directed line is acyclic with locally stabilizable nodes
    part = BlockPartition((1, 1), (1, 1), (1, 1))
    subs = tuple(SubsystemModel(A=np.array([[1.0]]), B=np.eye(1), M=np.eye(1),
                                Q=np.eye(1), R=np.eye(1)) for _ in range(2))
    sys_ = InterconnectedSystem(part, subs, {(1, 0): np.array([[3.0]])})
    acyclic, local = stab.check_topologically_weak(sys_)
    assert acyclic and local == [True, True]
    # symmetric coupling makes the plant graph cyclic
    acyclic, _ = stab.check_topologically_weak(make_chain(2))
    assert not acyclic


def test_dynamically_weak_property():
    """50 weakly coupled random chains: the per-node certificates yield a
    stabilizing gain with a block-diagonal Lyapunov function."""
    rng = np.random.default_rng(13)
    done = 0
    for _ in range(400):
        if done >= 50:
            break
        N = int(rng.integers(2, 5))
        sys_ = make_chain(N, couple=float(rng.uniform(0.02, 0.2)),
                          a=float(rng.uniform(-0.5, 1.0)))
        certs = stab.check_dynamically_weak(sys_)
        if certs is None:
            continue
        from decsynth.system import DecentralizedController
        ctrl = DecentralizedController(
            gains=tuple(certs[i].gain for i in range(N)))
        Acl = closed_loop(sys_, ctrl)
        assert is_hurwitz(Acl)
        assert stab.block_diag_lyapunov_feasible(Acl, sys_.partition) is True
        done += 1
    assert done == 50


def test_dynamically_weak_rejects_bad_weights():
    sys_ = make_chain(2, couple=0.1)
    with pytest.raises(ValueError):
        stab.check_dynamically_weak(sys_, weights={(0, 1): -np.eye(1),
                                                   (1, 0): np.eye(1)})


def test_dynamically_weak_infeasible_case():
    # the first node is unstable with no control authority, so its
    # per-node LMI cannot be satisfied
    assert stab.check_dynamically_weak(make_appendix_pair()) is None


def test_block_diag_lyapunov_feasible():
    part = BlockPartition((1, 1), (1, 1), (1, 1))
    assert stab.block_diag_lyapunov_feasible(-np.eye(2), part) is True
    # Hurwitz but with no diagonal certificate (Appendix-style closed loop)
    Acl = np.array([[1.0, 2.0], [-1.0, -1.5]])
    assert is_hurwitz(Acl)
    assert stab.block_diag_lyapunov_feasible(Acl, part) is False


def test_classify_eq42(eq42):
    rep = stab.classify(eq42)
    assert rep.fully_actuated
    assert rep.sigma0 is True
    assert rep.sigma2_certified
    assert rep.gain_provenance == "restriction"
    assert rep.restriction.success
    assert is_hurwitz(closed_loop(eq42, rep.constructed_gain))


def test_classify_counterexample():
    rep = stab.classify(make_appendix_pair())
    assert rep.sigma0 is True
    assert not rep.restriction.success
    assert not rep.sigma2_certified
    assert rep.constructed_gain is None


def test_classify_fully_actuated_route():
    rep = stab.classify(make_appendix_pair(full_b=True))
    assert rep.fully_actuated
    assert rep.sigma2_certified
