import json

import numpy as np
import pytest

from conftest import make_chain, make_eq42
from decsynth.system import (BlockPartition, DecentralizedController,
                             InterconnectedSystem, SubsystemModel,
                             ValidationError, assemble_global, closed_loop,
                             load_system, save_system, system_from_dict,
                             system_to_dict)


def test_partition_validation():
    with pytest.raises(ValidationError):
        BlockPartition((0,), (1,), (1,))
    with pytest.raises(ValidationError):
        BlockPartition((1, 1), (1,), (1, 1))
    p = BlockPartition((2, 3), (1, 1), (2, 3))
    assert p.N == 2 and p.total_n == 5
    assert p.state_slice(1) == slice(2, 5)


def test_assemble_global_eq42(eq42):
    A, B, M, Q, R = assemble_global(eq42)
    expect = np.array([[1.0, 0, 0, 0], [1, 2, 0, 0], [0, 2, 3, 4], [1, 2, 0, 4]])
    assert np.array_equal(A, expect)
    assert np.array_equal(B, np.eye(4))
    assert np.array_equal(M, np.eye(4))
    assert np.array_equal(Q, np.eye(4))
    assert np.array_equal(R, np.eye(4))


def test_closed_loop_and_block_diag(eq42):
    K = DecentralizedController(gains=tuple(np.array([[float(g)]])
                                            for g in (1, 2, 3, 4)))
    Acl = closed_loop(eq42, K)
    A, B, _, _, _ = assemble_global(eq42)
    assert np.array_equal(Acl, A - B @ np.diag([1.0, 2, 3, 4]))
    bad = DecentralizedController(gains=(np.eye(1),) * 3)
    with pytest.raises(ValidationError):
        closed_loop(eq42, bad)


def test_plant_edges_direction():
    sys_ = make_eq42()
    # A_21 != 0 means node 1 influences node 2: directed edge (0, 1)
    assert (0, 1) in sys_.plant_edges()
    assert np.array_equal(sys_.coupling(0, 2), np.zeros((1, 1)))


def test_validation_rejects_bad_blocks():
    part = BlockPartition((1,), (1,), (1,))
    good = SubsystemModel(A=np.eye(1), B=np.eye(1), M=np.eye(1),
                          Q=np.eye(1), R=np.eye(1))
    with pytest.raises(ValidationError):
        InterconnectedSystem(part, (good,) * 2)
    bad_r = SubsystemModel(A=np.eye(1), B=np.eye(1), M=np.eye(1),
                           Q=np.eye(1), R=np.zeros((1, 1)))
    with pytest.raises(ValidationError):
        InterconnectedSystem(part, (bad_r,))
    part2 = BlockPartition((1, 1), (1, 1), (1, 1))
    with pytest.raises(ValidationError):
        InterconnectedSystem(part2, (good, good),
                             couplings={(0, 1): np.zeros((1, 1))})
    with pytest.raises(ValidationError):
        InterconnectedSystem(part2, (good, good),
                             couplings={(0, 0): np.eye(1)})


def test_json_roundtrip(tmp_path):
    sys_ = make_chain(3, couple=0.25)
    path = tmp_path / "chain.json"
    save_system(sys_, path)
    back = load_system(path)
    assert back.partition == sys_.partition
    for a, b in zip(back.subsystems, sys_.subsystems):
        assert np.array_equal(a.A, b.A) and np.array_equal(a.Q, b.Q)
    assert set(back.couplings) == set(sys_.couplings)


def test_json_defaults_and_errors(tmp_path):
    doc = system_to_dict(make_chain(2))
    for sub in doc["subsystems"]:
        del sub["M"]  # M defaults to identity when q_i == n_i
    sys_ = system_from_dict(doc)
    assert np.array_equal(sys_.subsystems[0].M, np.eye(1))

    with pytest.raises(ValidationError):
        system_from_dict({"partition": {"n": [1], "m": [1]}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        load_system(bad)
    doc = system_to_dict(make_chain(2))
    doc["couplings"].append(dict(doc["couplings"][0]))
    with pytest.raises(ValidationError):
        system_from_dict(doc)
