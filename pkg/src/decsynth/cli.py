"""Command-line interface: classification, synthesis, verification, graph
decomposition, and the randomized chain benchmark.

Exit codes: 0 on success, 2 when a method runs but fails on the instance
(infeasible restriction, destabilizing baseline, uncertified system), 1 on
bad input or internal errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import admm, netsim, report, stabilizability, synth
from .graphs import chordal_extension, is_chordal, maximal_cliques, undirected_closure
from .linalg import is_hurwitz
from .stabilizability import block_diag_lyapunov_feasible, plant_graph
from .synth import SynthStatus, h2_norm
from .system import (BlockPartition, DecentralizedController,
                     InterconnectedSystem, SubsystemModel, ValidationError,
                     closed_loop, load_system)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_METHOD_FAILURE = 2


def _emit(doc, path=None):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _gains_list(controller):
    return [np.asarray(K, dtype=float).tolist() for K in controller.gains] \
        if isinstance(controller, DecentralizedController) \
        else np.asarray(controller, dtype=float).tolist()


def cmd_classify(args):
    sys_ = load_system(args.system)
    rep = stabilizability.classify(sys_)
    doc = {
        "fully_actuated": rep.fully_actuated,
        "acyclic": rep.acyclic,
        "local_stabilizable": rep.local_stabilizable,
        "dynamically_weak": rep.dynamically_weak is not None,
        "sigma0": rep.sigma0,
        "sigma2_certified": rep.sigma2_certified,
        "gain_provenance": rep.gain_provenance,
        "restriction_status": rep.restriction.status.value,
        "restriction_h2": rep.restriction.h2,
        "notes": rep.notes,
    }
    if rep.constructed_gain is not None:
        doc["gains"] = _gains_list(rep.constructed_gain)
    _emit(doc, args.output)
    return EXIT_OK if rep.sigma2_certified else EXIT_METHOD_FAILURE


def _admm_opts(args):
    return admm.AdmmOptions(rho=args.rho, tol=args.tol, max_iter=args.max_iter,
                            parallel=args.parallel)


def _write_history_csv(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "primal_residual", "dual_residual", "objective"])
        for h, (p, d, obj) in enumerate(history, start=1):
            w.writerow([h, repr(p), repr(d), repr(obj)])


def cmd_synthesize(args):
    sys_ = load_system(args.system)
    history = None
    transcript = None
    if args.method == "centralized":
        res = synth.solve_restriction(sys_)
    elif args.method == "admm":
        res, state = admm.run(sys_, opts=_admm_opts(args))
        history = state.history
    elif args.method == "distributed":
        res, transcript, outcome = netsim.synthesize(sys_, opts=_admm_opts(args))
        history = outcome.history
    elif args.method == "localized-lqr":
        res = synth.localized_lqr(sys_)
    elif args.method == "truncated-lqr":
        res = synth.truncated_lqr(sys_)
    elif args.method == "fully-actuated":
        if not stabilizability.check_fully_actuated(sys_):
            _emit({"method": args.method, "status": "not_applicable",
                   "message": "some B_i lacks full row rank"})
            return EXIT_METHOD_FAILURE
        ctrl = stabilizability.fully_actuated_gain(sys_)
        res = synth.SynthesisResult(status=SynthStatus.SUCCESS,
                                    method="fully-actuated", controller=ctrl,
                                    h2=h2_norm(sys_, ctrl))
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(args.method)

    doc = {"method": res.method, "status": res.status.value, "h2": res.h2,
           "objective": res.objective, "iterations": res.iterations,
           "message": res.message}
    if res.controller is not None:
        doc["gains"] = _gains_list(res.controller)
    if args.trace and history is not None:
        _write_history_csv(history, args.trace)
        doc["trace"] = args.trace
        if args.plot:
            png = args.trace.rsplit(".", 1)[0] + ".png"
            doc["trace_plot"] = report.plot_residual_trace(history, png)
    if transcript is not None and args.transcript:
        netsim.write_transcript(transcript, args.transcript)
        doc["transcript"] = args.transcript
        doc["privacy_audit"] = netsim.audit_privacy(transcript).passed
    _emit(doc, args.output)
    return EXIT_OK if res.success else EXIT_METHOD_FAILURE


def cmd_check(args):
    sys_ = load_system(args.system)
    with open(args.gains) as fh:
        doc = json.load(fh)
    raw = doc["gains"] if isinstance(doc, dict) else doc
    ctrl = DecentralizedController(
        gains=tuple(np.asarray(g, dtype=float) for g in raw))
    Acl = closed_loop(sys_, ctrl)
    hurwitz = is_hurwitz(Acl)
    out = {
        "hurwitz": hurwitz,
        "h2": h2_norm(sys_, ctrl) if hurwitz else None,
        "block_diagonal_certificate":
            block_diag_lyapunov_feasible(Acl, sys_.partition) if hurwitz else False,
    }
    _emit(out, args.output)
    return EXIT_OK if hurwitz else EXIT_METHOD_FAILURE


def cmd_decompose(args):
    sys_ = load_system(args.system)
    gu = undirected_closure(plant_graph(sys_))
    ext = chordal_extension(gu)
    chordal, _ = is_chordal(gu)
    structure = maximal_cliques(ext)
    doc = {
        "undirected_edges": [[u + 1, v + 1] for (u, v) in sorted(gu.edges)],
        "chordal": chordal,
        "fill_edges": [[u + 1, v + 1]
                       for (u, v) in sorted(ext.edges - gu.edges)],
        "cliques": [[v + 1 for v in c] for c in structure.cliques],
        "overlap_nodes": [v + 1 for v in structure.overlap_nodes],
        "overlap_edges": [[u + 1, v + 1] for (u, v) in structure.overlap_edges],
    }
    _emit(doc, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark

@dataclass
class BenchConfig:
    """Randomized-chain benchmark setup; a fixed seed fixes the instances."""

    nodes: int = 5
    instances: int = 100
    bound: float = 0.5
    seed: int = 0
    methods: tuple = ("admm", "localized-lqr", "truncated-lqr")
    opts: object = field(default_factory=admm.AdmmOptions)

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("chain needs at least 2 nodes")
        if self.bound <= 0:
            raise ValueError("coupling bound must be positive")
        if self.instances < 1:
            raise ValueError("need at least one instance")


_CHAIN_A = np.array([[1.0, 1.0], [1.0, 2.0]])
_CHAIN_B = np.array([[0.0], [1.0]])


def _chain_instance(rng, nodes, bound):
    """One chain of unstable second-order nodes with random couplings."""
    part = BlockPartition((2,) * nodes, (1,) * nodes, (2,) * nodes)
    subs = tuple(SubsystemModel(A=_CHAIN_A, B=_CHAIN_B, M=np.eye(2),
                                Q=np.eye(2), R=np.eye(1))
                 for _ in range(nodes))
    couplings = {}
    for i in range(nodes - 1):
        couplings[(i, i + 1)] = rng.uniform(-bound, bound, size=(2, 2))
        couplings[(i + 1, i)] = rng.uniform(-bound, bound, size=(2, 2))
    return InterconnectedSystem(partition=part, subsystems=tuple(subs),
                                couplings=couplings)


def generate_instances(config):
    """Instance list with infeasible draws regenerated.

    Returns ``([(instance_id, system, centralized_result), ...], n_regen)``;
    the centralized restriction doubles as the feasibility filter.
    """
    rng = np.random.default_rng(config.seed)
    out = []
    regenerated = 0
    for idx in range(config.instances):
        while True:
            sys_ = _chain_instance(rng, config.nodes, config.bound)
            central = synth.solve_restriction(sys_)
            if central.success:
                break
            regenerated += 1
        out.append((idx, sys_, central))
    return out, regenerated


def _run_method(method, sys_, central, opts):
    """(status, h2, iterations); h2 present iff a stabilizing gain came back."""
    if method == "centralized":
        return central.status.value, central.h2, None
    if method == "admm":
        res, _ = admm.run(sys_, opts=opts)
        return res.status.value, res.h2, res.iterations
    if method == "localized-lqr":
        res = synth.localized_lqr(sys_)
    elif method == "truncated-lqr":
        res = synth.truncated_lqr(sys_)
    else:
        raise ValueError(f"unknown bench method {method!r}")
    return res.status.value, res.h2, None


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list                  # (instance_id, seed, method, status, h2, iters)
    regenerated: int

    def success(self, method):
        """Instance ids where the method returned a stabilizing controller."""
        return {r[0] for r in self.rows if r[2] == method and r[4] is not None}

    def success_rate(self, method):
        return 100.0 * len(self.success(method)) / self.config.instances

    def common_successes(self):
        common = set(range(self.config.instances))
        for m in self.config.methods:
            common &= self.success(m)
        return common

    def mean_h2(self, method, ids=None):
        ids = self.common_successes() if ids is None else ids
        vals = [r[4] for r in self.rows
                if r[2] == method and r[0] in ids and r[4] is not None]
        return float(np.mean(vals)) if vals else None

    def iteration_counts(self):
        return [r[5] for r in self.rows if r[2] == "admm" and r[5] is not None]

    def to_doc(self):
        common = sorted(self.common_successes())
        doc = {
            "nodes": self.config.nodes,
            "instances": self.config.instances,
            "seed": self.config.seed,
            "regenerated": self.regenerated,
            "common_successes": len(common),
            "methods": {},
        }
        for m in self.config.methods:
            doc["methods"][m] = {
                "success_rate": self.success_rate(m),
                "mean_h2_common": self.mean_h2(m),
            }
        its = self.iteration_counts()
        if its:
            doc["admm_iterations"] = {
                "min": int(min(its)), "max": int(max(its)),
                "median": float(np.median(its)),
                "histogram": np.histogram(
                    its, bins=range(0, max(its) + 26, 25))[0].tolist(),
            }
        return doc


def run_bench(config):
    instances, regenerated = generate_instances(config)
    rows = []
    for idx, sys_, central in instances:
        for m in config.methods:
            status, h2, iters = _run_method(m, sys_, central, config.opts)
            rows.append((idx, config.seed, m, status, h2, iters))
    return BenchReport(config=config, rows=rows, regenerated=regenerated)


def write_bench_csv(rep, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "seed", "method", "status", "h2", "iterations"])
        for row in rep.rows:
            w.writerow(row)


def cmd_bench(args):
    config = BenchConfig(nodes=args.nodes, instances=args.instances,
                         bound=args.bound, seed=args.seed,
                         methods=tuple(args.methods.split(",")),
                         opts=_admm_opts(args))
    rep = run_bench(config)
    doc = rep.to_doc()
    if args.csv:
        write_bench_csv(rep, args.csv)
        doc["csv"] = args.csv
        if args.plot and rep.iteration_counts():
            png = args.csv.rsplit(".", 1)[0] + "_iterations.png"
            doc["histogram_plot"] = report.plot_iteration_histogram(
                rep.iteration_counts(), png)
    _emit(doc, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_admm_flags(p):
    p.add_argument("--rho", type=float, default=5.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--parallel", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="decsynth",
        description="Decentralized H2 synthesis for sparse interconnected systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="run all stabilizability certificates")
    p.add_argument("system")
    p.add_argument("--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synthesize", help="design a decentralized controller")
    p.add_argument("system")
    p.add_argument("--method", default="centralized",
                   choices=["centralized", "admm", "distributed",
                            "localized-lqr", "truncated-lqr", "fully-actuated"])
    _add_admm_flags(p)
    p.add_argument("--trace", help="residual trace CSV (admm/distributed)")
    p.add_argument("--transcript", help="message transcript JSONL (distributed)")
    p.add_argument("--plot", action="store_true",
                   help="render figures next to the CSV outputs")
    p.add_argument("--output")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("check", help="verify a gains file against a system")
    p.add_argument("system")
    p.add_argument("gains")
    p.add_argument("--output")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("decompose", help="plant graph, cliques, overlaps")
    p.add_argument("system")
    p.add_argument("--output")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("bench", help="randomized chain benchmark")
    p.add_argument("--nodes", type=int, default=5)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--bound", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="admm,localized-lqr,truncated-lqr")
    _add_admm_flags(p)
    p.add_argument("--csv", help="per-instance rows")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError,
            KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
