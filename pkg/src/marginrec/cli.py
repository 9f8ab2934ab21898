"""Command-line harness: generate instances, run recoveries, verify margins,
and sweep experiments into delimited results plus figures.

Exit codes are the machine contract: 0 = success / margin satisfied /
recovery exact, 1 = recovery inexact or margin unsatisfied, 2 = usage or
I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import files, instances, margins, report
from .files import InstanceFormatError
from .instances import Instance
from .oracle import LabelOracle
from .recovery import CheatrConfig, MrecurConfig, cheatr, mrecur
from .sampling import RandomSource, WalkConfig

THREADS_ENV = "MARGINREC_THREADS"


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    rng = RandomSource(args.seed)
    name = args.generator
    if name == "convex-margin":
        inst = instances.gen_convex_margin(args.m, args.k, args.n, args.gamma, rng)
    elif name == "packing":
        inst = instances.gen_packing_instance(args.size, args.gamma, rng,
                                              singleton=args.singleton)
    elif name == "svm-vs-ova":
        inst = instances.gen_svm_vs_ova(args.eta, args.a, rng)
    elif name == "sphere-coslice":
        inst = instances.gen_sphere_coslice(args.m, args.size, rng)
    elif name == "center-proximity":
        inst = instances.gen_center_proximity(args.m, args.k, args.n,
                                              args.alpha, rng)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown generator {name!r}")
    files.write_instance(inst, args.out)
    certs = ", ".join(f"{k}={v:g}" for k, v in sorted(inst.certified.items()))
    print(f"wrote {args.out}: n={inst.n} m={inst.m} k={inst.k} ({certs})")
    return 0


# ---------------------------------------------------------------------------
# recover
# ---------------------------------------------------------------------------

def _walk_config(args) -> WalkConfig:
    return WalkConfig(steps=args.walk_steps, samples=args.walk_samples,
                      eps=args.walk_eps, paper_steps=args.paper_walk)


def _resolve_gamma(args_gamma, inst: Instance, cert_name: str) -> float:
    if args_gamma is not None:
        return args_gamma
    cert = inst.certified.get(cert_name)
    if cert is None:
        raise ValueError(
            f"no --gamma given and instance has no {cert_name!r} certificate")
    if math.isinf(cert):
        return 1.0  # unbounded margin: any finite parameter is valid
    return cert


def _run_recovery(inst: Instance, algorithm: str, args, seed: int):
    rng = RandomSource(seed)
    oracle = LabelOracle(inst.truth)
    start = time.perf_counter()
    if algorithm == "cheatr":
        gamma = _resolve_gamma(args.gamma, inst, "convex_hull")
        cfg = CheatrConfig(gamma=gamma, s=args.s, c_s=args.c_s,
                           paper_s=args.paper_s, walk=_walk_config(args),
                           round_cap=args.round_cap, tol=args.tol,
                           audit=not args.no_audit)
        rep = cheatr(inst.points, oracle, cfg, rng)
        config = {"s": cfg.resolve_s(inst.m), "c_s": cfg.c_s,
                  "round_cap": cfg.round_cap, "tol": cfg.tol}
    elif algorithm == "mrecur":
        if inst.metrics is None:
            raise ValueError("instance carries no metrics; mrecur needs them")
        gamma = _resolve_gamma(args.gamma, inst, "ova")
        cfg = MrecurConfig(gamma=gamma, metrics=inst.metrics,
                           sample_multiplier=args.sample_multiplier,
                           m_override=args.m_override,
                           round_cap=args.round_cap,
                           audit=not args.no_audit)
        rep = mrecur(inst.points, oracle, cfg, rng)
        config = {"sample_multiplier": cfg.sample_multiplier,
                  "m_override": cfg.m_override, "round_cap": cfg.round_cap}
    else:  # pragma: no cover
        raise ValueError(f"unknown algorithm {algorithm!r}")
    wall_ms = (time.perf_counter() - start) * 1000.0
    config["per_round"] = [list(entry) for entry in rep.per_round]
    row = {
        "algorithm": algorithm, "n": inst.n, "m": inst.m, "k": inst.k,
        "gamma": gamma, "seed": seed,
        "label_queries": rep.label_queries, "scq_queries": rep.scq_queries,
        "rounds": rep.rounds, "exact": rep.exact,
        "misclassified_ever": rep.misclassified_ever,
        "wall_ms": wall_ms, "instance": inst.provenance, "config": config,
    }
    return rep, row


def _cmd_recover(args) -> int:
    inst = files.read_instance(args.instance)
    rep, row = _run_recovery(inst, args.algorithm, args, args.seed)
    if args.results:
        files.append_result(row, args.results)
    print(f"{args.algorithm}: n={inst.n} exact={str(rep.exact).lower()} "
          f"label_queries={rep.label_queries} rounds={rep.rounds} "
          f"misclassified_ever={rep.misclassified_ever}")
    return 0 if rep.exact else 1


# ---------------------------------------------------------------------------
# verify-margin
# ---------------------------------------------------------------------------

def _cmd_verify(args) -> int:
    inst = files.read_instance(args.instance)
    if inst.metrics is None:
        raise ValueError("instance carries no metrics to verify against")
    if args.kind == "ova":
        per, overall = margins.ova_margin(inst.points, inst.truth, inst.metrics)
        satisfied = all(v > args.gamma - margins.STRICT_SLACK for v in per)
        for i, v in enumerate(per, start=1):
            print(f"cluster {i}: margin {v:g}")
        print(f"min margin {overall:g} vs gamma {args.gamma:g}: "
              f"{'satisfied' if satisfied else 'unsatisfied'}")
    else:
        ok, slacks = margins.verify_convex_hull_margin(
            inst.points, inst.truth, inst.metrics, args.gamma)
        satisfied = ok
        for i, v in enumerate(slacks, start=1):
            print(f"cluster {i}: slack {v:g}")
        print(f"convex hull margin at gamma {args.gamma:g}: "
              f"{'satisfied' if satisfied else 'unsatisfied'}")
    return 0 if satisfied else 1


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

def _as_list(value):
    return value if isinstance(value, list) else [value]


def _sweep_cells(spec: dict):
    algorithm = spec.get("algorithm", "cheatr")
    generator = spec.get("generator", "convex-margin")
    seeds = spec.get("seeds", 10)
    if isinstance(seeds, int):
        seeds = list(range(1, seeds + 1))
    axes = {
        "m": _as_list(spec.get("m", 2)),
        "k": _as_list(spec.get("k", 2)),
        "gamma": _as_list(spec.get("gamma", 1.0)),
        "n": _as_list(spec.get("n", 1000)),
    }
    for m, k, gamma, n in itertools.product(
            axes["m"], axes["k"], axes["gamma"], axes["n"]):
        for seed in seeds:
            yield {"algorithm": algorithm, "generator": generator,
                   "m": m, "k": k, "gamma": gamma, "n": n, "seed": seed,
                   "generator_params": spec.get("generator_params", {}),
                   "config": spec.get("config", {})}


def _generate_for_cell(cell) -> Instance:
    rng = RandomSource(cell["seed"])
    gen = cell["generator"]
    params = cell["generator_params"]
    if gen == "convex-margin":
        return instances.gen_convex_margin(cell["m"], cell["k"], cell["n"],
                                           cell["gamma"], rng)
    if gen == "center-proximity":
        return instances.gen_center_proximity(cell["m"], cell["k"], cell["n"],
                                              params.get("alpha", 2.0), rng)
    if gen == "packing":
        return instances.gen_packing_instance(params.get("size", 8),
                                              cell["gamma"], rng)
    if gen == "svm-vs-ova":
        return instances.gen_svm_vs_ova(params.get("eta", 0.01),
                                        params.get("a", 1.0), rng)
    if gen == "sphere-coslice":
        return instances.gen_sphere_coslice(cell["m"], params.get("size", 8),
                                            rng)
    raise ValueError(f"unknown generator {gen!r}")


class _CellArgs:
    """Recovery flags for one sweep cell: CLI defaults + spec overrides."""

    def __init__(self, cell):
        cfg = cell["config"]
        self.gamma = cell["gamma"]
        self.s = cfg.get("s")
        self.c_s = cfg.get("c_s", 10.0)
        self.paper_s = cfg.get("paper_s", False)
        self.walk_steps = cfg.get("walk_steps")
        self.walk_samples = cfg.get("walk_samples")
        self.walk_eps = cfg.get("walk_eps")
        self.paper_walk = cfg.get("paper_walk", False)
        self.round_cap = cfg.get("round_cap")
        self.tol = cfg.get("tol", 1e-8)
        self.sample_multiplier = cfg.get("sample_multiplier", 1.0)
        self.m_override = cfg.get("m_override")
        self.no_audit = not cfg.get("audit", True)


def _run_cell(cell):
    inst = _generate_for_cell(cell)
    _, row = _run_recovery(inst, cell["algorithm"], _CellArgs(cell),
                           cell["seed"])
    return row


def _cmd_experiment(args) -> int:
    with open(args.sweep, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    cells = list(_sweep_cells(spec))
    if not cells:
        raise ValueError("sweep file describes no runs")
    os.makedirs(args.out_dir, exist_ok=True)
    threads = max(1, int(os.environ.get(THREADS_ENV, "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]

    results_path = os.path.join(args.out_dir, "results.csv")
    if os.path.exists(results_path):
        os.remove(results_path)
    for row in rows:
        files.append_result(row, results_path)
    fits = report.summarize(rows)
    summary_path = os.path.join(args.out_dir, "summary.csv")
    report.write_summary(fits, summary_path)
    if not args.no_figures:
        report.render_scaling_figure(
            fits, os.path.join(args.out_dir, "scaling.png"))
        report.render_rounds_figure(
            rows, os.path.join(args.out_dir, "rounds.png"))
    exact_runs = sum(1 for row in rows if row["exact"])
    print(f"{len(cells)} runs, {exact_runs} exact; results in {results_path}")
    for fit in fits:
        g = fit.group
        print(f"  {g['algorithm']} m={g['m']} k={g['k']} gamma={g['gamma']:g}: "
              f"q ~ {fit.intercept:.1f} + {fit.slope:.1f} log n "
              f"(R^2 {fit.r_squared:.3f})")
    return 0 if exact_runs == len(cells) else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginrec",
        description="Exact cluster recovery with oracle queries under "
                    "margin assumptions.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a seeded instance file")
    gen.add_argument("generator", choices=sorted(instances.GENERATORS))
    gen.add_argument("--m", type=int, default=2)
    gen.add_argument("--k", type=int, default=2)
    gen.add_argument("--n", type=int, default=1000)
    gen.add_argument("--gamma", type=float, default=1.0)
    gen.add_argument("--alpha", type=float, default=2.0)
    gen.add_argument("--size", type=int, default=8)
    gen.add_argument("--eta", type=float, default=0.01)
    gen.add_argument("--a", type=float, default=1.0)
    gen.add_argument("--singleton", type=int, default=None)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate)

    rec = sub.add_parser("recover", help="run a recovery on an instance file")
    rec.add_argument("instance")
    rec.add_argument("--algorithm", choices=["cheatr", "mrecur"],
                     required=True)
    rec.add_argument("--gamma", type=float, default=None,
                     help="margin parameter; defaults to the certificate")
    rec.add_argument("--s", type=int, default=None)
    rec.add_argument("--c-s", dest="c_s", type=float, default=10.0)
    rec.add_argument("--paper-s", action="store_true")
    rec.add_argument("--walk-steps", type=int, default=None)
    rec.add_argument("--walk-samples", type=int, default=None)
    rec.add_argument("--walk-eps", type=float, default=None)
    rec.add_argument("--paper-walk", action="store_true")
    rec.add_argument("--round-cap", type=int, default=None)
    rec.add_argument("--tol", type=float, default=1e-8)
    rec.add_argument("--sample-multiplier", type=float, default=1.0)
    rec.add_argument("--m-override", type=int, default=None)
    rec.add_argument("--no-audit", action="store_true")
    rec.add_argument("--seed", type=int, required=True)
    rec.add_argument("--results", default=None,
                     help="append the run's row to this results file")
    rec.set_defaults(func=_cmd_recover)

    ver = sub.add_parser("verify-margin", help="verify a margin on an "
                                               "instance file")
    ver.add_argument("instance")
    ver.add_argument("--kind", choices=["ova", "convex-hull"], required=True)
    ver.add_argument("--gamma", type=float, required=True)
    ver.set_defaults(func=_cmd_verify)

    exp = sub.add_parser("experiment", help="run a sweep described by a "
                                            "JSON file")
    exp.add_argument("sweep")
    exp.add_argument("--out-dir", required=True)
    exp.add_argument("--no-figures", action="store_true")
    exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (InstanceFormatError, OSError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:  # console script
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
