"""Interconnected-system model: block partition, validation, global assembly, JSON I/O.

The on-disk JSON schema (1-based subsystem indices, row-major nested lists)::

    {
      "partition": {"n": [...], "m": [...], "q": [...]},
      "subsystems": [{"A": [[..]], "B": [[..]], "M": [[..]],
                      "Q": [[..]], "R": [[..]]}, ...],
      "couplings": [{"i": int, "j": int, "Aij": [[..]]}, ...]
    }

``M`` may be omitted per subsystem and defaults to the identity.  A coupling
entry ``{i, j, Aij}`` means subsystem ``j`` influences subsystem ``i``
(block ``A_ij`` of the global state matrix); all-zero coupling blocks are
rejected so the plant graph is canonical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import PsdClass, classify_psd, require_symmetric


class ValidationError(ValueError):
    """A system file or in-memory model violates the schema or an invariant."""


@dataclass(frozen=True)
class BlockPartition:
    """State/input/disturbance dimensions per subsystem, with prefix offsets."""

    n: tuple
    m: tuple
    q: tuple

    def __post_init__(self):
        for name, sizes in (("n", self.n), ("m", self.m), ("q", self.q)):
            if len(sizes) == 0 or any(int(s) < 1 for s in sizes):
                raise ValidationError(f"partition '{name}' must contain sizes >= 1")
        if not (len(self.n) == len(self.m) == len(self.q)):
            raise ValidationError("partition lists must have equal length")

    @property
    def N(self):
        return len(self.n)

    @property
    def total_n(self):
        return int(sum(self.n))

    def offsets(self):
        """Prefix-sum state offsets, one per subsystem."""
        return np.concatenate(([0], np.cumsum(self.n))).astype(int)

    def state_slice(self, i):
        off = self.offsets()
        return slice(int(off[i]), int(off[i + 1]))


@dataclass(frozen=True)
class SubsystemModel:
    A: np.ndarray
    B: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class DecentralizedController:
    """Block-diagonal gains; ``gains[i]`` has shape (m_i, n_i)."""

    gains: tuple

    def block_diag(self, partition):
        if len(self.gains) != partition.N:
            raise ValidationError("controller block count does not match partition")
        n, m = partition.total_n, int(sum(partition.m))
        K = np.zeros((m, n))
        ro = np.concatenate(([0], np.cumsum(partition.m))).astype(int)
        co = partition.offsets()
        for i, Ki in enumerate(self.gains):
            K[ro[i]:ro[i + 1], co[i]:co[i + 1]] = Ki
        return K


@dataclass(frozen=True)
class InterconnectedSystem:
    """Validated interconnected system with couplings keyed by (target, source)."""

    partition: BlockPartition
    subsystems: tuple
    couplings: dict = field(default_factory=dict)  # (i, j) -> A_ij, 0-based

    def __post_init__(self):
        p = self.partition
        if len(self.subsystems) != p.N:
            raise ValidationError("subsystem count does not match partition")
        for i, sub in enumerate(self.subsystems):
            ni, mi, qi = p.n[i], p.m[i], p.q[i]
            if sub.A.shape != (ni, ni):
                raise ValidationError(f"subsystem {i + 1}: A has shape {sub.A.shape}, expected ({ni},{ni})")
            if sub.B.shape != (ni, mi):
                raise ValidationError(f"subsystem {i + 1}: B has shape {sub.B.shape}, expected ({ni},{mi})")
            if sub.M.shape != (ni, qi):
                raise ValidationError(f"subsystem {i + 1}: M has shape {sub.M.shape}, expected ({ni},{qi})")
            try:
                Qs = require_symmetric(sub.Q)
                Rs = require_symmetric(sub.R)
            except ValueError as exc:
                raise ValidationError(f"subsystem {i + 1}: {exc}") from exc
            if Qs.shape != (ni, ni) or Rs.shape != (mi, mi):
                raise ValidationError(f"subsystem {i + 1}: weight dimensions do not match partition")
            qcls, _ = classify_psd(Qs, tol=1e-9)
            if qcls is PsdClass.INDEFINITE:
                raise ValidationError(f"subsystem {i + 1}: Q_i not positive semidefinite")
            rcls, _ = classify_psd(Rs, tol=1e-9)
            if rcls is not PsdClass.POSITIVE_DEFINITE:
                raise ValidationError(f"subsystem {i + 1}: R_i not positive definite")
        for (i, j), Aij in self.couplings.items():
            if i == j:
                raise ValidationError("coupling blocks must be off-diagonal")
            if not (0 <= i < p.N and 0 <= j < p.N):
                raise ValidationError(f"coupling ({i + 1},{j + 1}) out of range")
            if Aij.shape != (p.n[i], p.n[j]):
                raise ValidationError(f"coupling ({i + 1},{j + 1}) has wrong shape {Aij.shape}")
            if not np.any(Aij):
                raise ValidationError(
                    f"coupling ({i + 1},{j + 1}) is all-zero; drop the edge instead")

    @property
    def N(self):
        return self.partition.N

    def plant_edges(self):
        """Directed plant-graph edges (source, target), 0-based: j influences i."""
        return sorted((j, i) for (i, j) in self.couplings)

    def coupling(self, i, j):
        """Block A_ij (target i, source j); zeros when the edge is absent."""
        return self.couplings.get((i, j), np.zeros((self.partition.n[i], self.partition.n[j])))


def assemble_global(sys):
    """Assemble dense global (A, B, M, Q, R) from blocks."""
    p = sys.partition
    n = p.total_n
    m, q = int(sum(p.m)), int(sum(p.q))
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    M = np.zeros((n, q))
    Q = np.zeros((n, n))
    R = np.zeros((m, m))
    off = p.offsets()
    mo = np.concatenate(([0], np.cumsum(p.m))).astype(int)
    qo = np.concatenate(([0], np.cumsum(p.q))).astype(int)
    for i, sub in enumerate(sys.subsystems):
        sl = slice(off[i], off[i + 1])
        A[sl, sl] = sub.A
        B[sl, mo[i]:mo[i + 1]] = sub.B
        M[sl, qo[i]:qo[i + 1]] = sub.M
        Q[sl, sl] = sub.Q
        R[mo[i]:mo[i + 1], mo[i]:mo[i + 1]] = sub.R
    for (i, j), Aij in sys.couplings.items():
        A[off[i]:off[i + 1], off[j]:off[j + 1]] = Aij
    return A, B, M, Q, R


def closed_loop(sys, controller):
    """Closed-loop matrix ``A - B blkdiag(K_ii)``."""
    A, B, _, _, _ = assemble_global(sys)
    K = controller.block_diag(sys.partition)
    if B.shape[1] != K.shape[0] or K.shape[1] != A.shape[0]:
        raise ValidationError("controller dimensions do not match system")
    return A - B @ K


def _matrix(data, what):
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{what}: not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ValidationError(f"{what}: expected a nested list matrix")
    return arr


def system_from_dict(doc):
    try:
        part = doc["partition"]
        n, m, q = part["n"], part["m"], part["q"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"missing or malformed 'partition': {exc}") from exc
    partition = BlockPartition(tuple(int(v) for v in n),
                               tuple(int(v) for v in m),
                               tuple(int(v) for v in q))
    subs = []
    raw_subs = doc.get("subsystems")
    if not isinstance(raw_subs, list) or len(raw_subs) != partition.N:
        raise ValidationError("'subsystems' must list one entry per partition block")
    for idx, raw in enumerate(raw_subs):
        ni, qi = partition.n[idx], partition.q[idx]
        try:
            A = _matrix(raw["A"], f"subsystems[{idx}].A")
            B = _matrix(raw["B"], f"subsystems[{idx}].B")
            Q = _matrix(raw["Q"], f"subsystems[{idx}].Q")
            R = _matrix(raw["R"], f"subsystems[{idx}].R")
        except KeyError as exc:
            raise ValidationError(f"subsystems[{idx}]: missing field {exc}") from exc
        M = _matrix(raw["M"], f"subsystems[{idx}].M") if "M" in raw else np.eye(ni)
        if "M" not in raw and qi != ni:
            raise ValidationError(f"subsystems[{idx}]: M omitted but q_i != n_i")
        subs.append(SubsystemModel(A=A, B=B, M=M, Q=Q, R=R))
    couplings = {}
    for idx, raw in enumerate(doc.get("couplings", [])):
        try:
            i, j = int(raw["i"]) - 1, int(raw["j"]) - 1
            Aij = _matrix(raw["Aij"], f"couplings[{idx}].Aij")
        except KeyError as exc:
            raise ValidationError(f"couplings[{idx}]: missing field {exc}") from exc
        if (i, j) in couplings:
            raise ValidationError(f"couplings[{idx}]: duplicate edge ({i + 1},{j + 1})")
        couplings[(i, j)] = Aij
    return InterconnectedSystem(partition=partition, subsystems=tuple(subs),
                                couplings=couplings)


def system_to_dict(sys):
    doc = {
        "partition": {
            "n": list(sys.partition.n),
            "m": list(sys.partition.m),
            "q": list(sys.partition.q),
        },
        "subsystems": [
            {
                "A": sub.A.tolist(),
                "B": sub.B.tolist(),
                "M": sub.M.tolist(),
                "Q": sub.Q.tolist(),
                "R": sub.R.tolist(),
            }
            for sub in sys.subsystems
        ],
        "couplings": [
            {"i": i + 1, "j": j + 1, "Aij": Aij.tolist()}
            for (i, j), Aij in sorted(sys.couplings.items())
        ],
    }
    return doc


def load_system(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
    return system_from_dict(doc)


def save_system(sys, path):
    with open(path, "w") as fh:
        json.dump(system_to_dict(sys), fh, indent=2)
        fh.write("\n")
