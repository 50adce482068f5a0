"""Shared builders and session-scoped runs of the expensive pipelines."""

import numpy as np
import pytest

from decsynth import admm, netsim
from decsynth.system import (BlockPartition, InterconnectedSystem,
                             SubsystemModel, system_from_dict)

A4 = np.array([[1.0, 0, 0, 0],
               [1.0, 2, 0, 0],
               [0.0, 2, 3, 4],
               [1.0, 2, 0, 4]])


def make_eq42():
    """Four coupled scalar subsystems with Q_i = R_i = 1, B = M = I."""
    part = BlockPartition((1,) * 4, (1,) * 4, (1,) * 4)
    subs = tuple(SubsystemModel(A=np.array([[A4[i, i]]]), B=np.eye(1),
                                M=np.eye(1), Q=np.eye(1), R=np.eye(1))
                 for i in range(4))
    coup = {(i, j): np.array([[A4[i, j]]])
            for i in range(4) for j in range(4) if i != j and A4[i, j] != 0}
    return InterconnectedSystem(partition=part, subsystems=subs, couplings=coup)


def make_chain(N, couple=0.5, a=1.0):
    """Scalar chain: every node unstable (a > 0), symmetric neighbor coupling."""
    part = BlockPartition((1,) * N, (1,) * N, (1,) * N)
    subs = tuple(SubsystemModel(A=np.array([[float(a)]]), B=np.eye(1),
                                M=np.eye(1), Q=np.eye(1), R=np.eye(1))
                 for _ in range(N))
    coup = {}
    for i in range(N - 1):
        coup[(i, i + 1)] = np.array([[float(couple)]])
        coup[(i + 1, i)] = np.array([[float(couple)]])
    return InterconnectedSystem(partition=part, subsystems=subs, couplings=coup)


def make_random_chain(rng, max_nodes=5, bound=0.5):
    """Random scalar chain used by the feasible-instance property suites."""
    N = int(rng.integers(2, max_nodes + 1))
    part = BlockPartition((1,) * N, (1,) * N, (1,) * N)
    subs = tuple(SubsystemModel(A=np.array([[float(rng.uniform(-1.0, 1.5))]]),
                                B=np.eye(1), M=np.eye(1), Q=np.eye(1),
                                R=np.eye(1))
                 for _ in range(N))
    coup = {}
    for i in range(N - 1):
        coup[(i, i + 1)] = np.array([[float(rng.uniform(-bound, bound)) or 0.1]])
        coup[(i + 1, i)] = np.array([[float(rng.uniform(-bound, bound)) or 0.1]])
    return InterconnectedSystem(partition=part, subsystems=subs, couplings=coup)


def make_appendix_pair(a1=-1.0, a2=0.0, full_b=False):
    """Two scalar subsystems, A = [[1, 2], [a1, a2]], B = diag(0or1, 1)."""
    part = BlockPartition((1, 1), (1, 1), (1, 1))
    b1 = 1.0 if full_b else 0.0
    subs = (SubsystemModel(A=np.array([[1.0]]), B=np.array([[b1]]),
                           M=np.eye(1), Q=np.eye(1), R=np.eye(1)),
            SubsystemModel(A=np.array([[float(a2)]]), B=np.eye(1),
                           M=np.eye(1), Q=np.eye(1), R=np.eye(1)))
    coup = {(0, 1): np.array([[2.0]]), (1, 0): np.array([[float(a1)]])}
    return InterconnectedSystem(partition=part, subsystems=subs, couplings=coup)


def make_disjoint_pair():
    part = BlockPartition((1, 1), (1, 1), (1, 1))
    subs = tuple(SubsystemModel(A=np.array([[1.0]]), B=np.eye(1), M=np.eye(1),
                                Q=np.eye(1), R=np.eye(1)) for _ in range(2))
    return InterconnectedSystem(partition=part, subsystems=subs, couplings={})


@pytest.fixture(scope="session")
def eq42():
    return make_eq42()


@pytest.fixture(scope="session")
def admm_eq42(eq42):
    """One monolithic consensus run on the four-node system."""
    result, state = admm.run(eq42)
    return result, state


@pytest.fixture(scope="session")
def netsim_eq42(eq42):
    """One message-passing run on the four-node system."""
    result, log, outcome = netsim.synthesize(eq42)
    return result, log, outcome


@pytest.fixture(scope="session")
def bench_30():
    """The 30-instance chain benchmark at a pinned seed (several minutes)."""
    from decsynth.cli import BenchConfig, run_bench
    import time
    t0 = time.monotonic()
    rep = run_bench(BenchConfig(instances=30, seed=0))
    return rep, time.monotonic() - t0


def system_doc(sys):
    from decsynth.system import system_to_dict
    return system_to_dict(sys)


@pytest.fixture(scope="session")
def objective_agreement_cases():
    """100 random feasible chains (n <= 5): relative gap between the
    converged consensus objective and the one-shot restriction optimum."""
    from decsynth import synth
    from decsynth.synth import SynthStatus
    rng = np.random.default_rng(77)
    gaps = []
    capped = 0
    for _ in range(400):
        if len(gaps) >= 100:
            break
        sys_ = make_random_chain(rng)
        central = synth.solve_restriction(sys_)
        if not central.success:
            continue
        res, _ = admm.run(sys_)
        if res.status is SynthStatus.NUMERICAL_LIMIT:
            capped += 1
            continue
        assert res.success
        gaps.append(abs(res.objective - central.objective)
                    / max(1.0, central.objective))
    return gaps, capped


@pytest.fixture(scope="session")
def parallel_serial_cases():
    """100 random chains, truncated runs: serial vs threaded trace pairs."""
    from concurrent.futures import ThreadPoolExecutor
    rng = np.random.default_rng(31)
    opts = admm.AdmmOptions(max_iter=2)
    pairs = []
    for _ in range(100):
        sys_ = make_random_chain(rng, max_nodes=4)
        histories = []
        for parallel in (False, True):
            # fresh layout per run: a compiled subproblem's very first solve
            # can differ from re-solves at the last few bits
            layout = admm.build_layout(sys_, admm.default_structure(sys_), opts)
            state = admm.initialize(layout)
            state.history = []
            pool = None
            if parallel and len(layout.cliques) > 1:
                pool = ThreadPoolExecutor(max_workers=len(layout.cliques))
            try:
                for _ in range(opts.max_iter):
                    try:
                        state = admm.step(layout, state, opts, pool)
                    except admm.SubproblemFailure:
                        break
            finally:
                if pool is not None:
                    pool.shutdown(wait=False)
            histories.append(tuple(state.history))
        pairs.append((histories[0], histories[1]))
    return pairs
