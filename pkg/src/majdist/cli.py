"""Command-line front end: ``majdist <command> [flags]``.

Every flag may also come from a JSON object passed with ``--config``; keys
are flag names with dashes or underscores. Flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .beta import beta_reoptimize
from .bip import SolverConfig
from .errors import InputError, InternalConsistencyError, LoadError, MajdistError
from .io import GridSpec, load_instance_dir, load_plan, make_grid, plan_to_json, save_plan, write_instance, write_json
from .local import local_reoptimize
from .metrics import plan_report, report_csv
from .recom import BurstParams, short_bursts, trajectory_csv
from .render import render_svg
from .select import CandidatePool, select_plan
from .tree import ShpParams, ShpTree, collect_leaves, generate_tree

log = logging.getLogger("majdist")


def plan_seed(master: int, index: int) -> int:
    """Seed of plan ``index`` under ``master``; depends on nothing else, so plans rerun alone."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def parse_cluster(value) -> tuple:
    """``"x,y,w,h,frac"`` (or a 5-element list) -> ``((x, y, w, h), frac)``."""
    parts = value.split(",") if isinstance(value, str) else list(value)
    if len(parts) != 5:
        raise InputError(f"cluster {value!r}: expected x,y,w,h,frac")
    try:
        x, y, w, h = (int(p) for p in parts[:4])
        frac = float(parts[4])
    except ValueError as exc:
        raise InputError(f"cluster {value!r}: {exc}") from exc
    return (x, y, w, h), frac


# -- argument parsing -------------------------------------------------------

REQUIRED = {
    "make-grid": ("width", "height", "districts", "out_dir"),
    "generate": ("instance_dir", "out_dir"),
    "reopt-beta": ("plan", "tree"),
    "reopt-local": ("plan",),
    "shortburst": ("seed_plan",),
    "score": ("plan",),
    "render": ("plan", "out"),
}


def _solver_flags(p):
    p.add_argument("--time-limit", type=float, default=60.0, help="per-program solver time limit (s)")
    p.add_argument("--engine", choices=("highs", "bnb"), default="highs", help="binary program engine")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="majdist", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of flag values")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("make-grid", help="write a synthetic grid instance")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--districts", type=int)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--cluster", action="append", default=None, help="x,y,w,h,frac (repeatable)")
    p.add_argument("--background", type=float, default=0.1)
    p.add_argument("--base-pop", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")

    p = sub.add_parser("generate", help="sample trees and select plans")
    p.add_argument("--instance-dir")
    p.add_argument("--districts", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fanout", type=int, default=3)
    p.add_argument("--leaf-threshold", type=int, default=5)
    p.add_argument("--plans", type=int, default=1)
    p.add_argument("--plan-index", type=int, action="append", default=None,
                   help="run only these plan indices (repeatable)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: available cores)")
    p.add_argument("--out-dir")
    _solver_flags(p)

    p = sub.add_parser("reopt-beta", help="bisection reoptimization for compactness")
    p.add_argument("--plan")
    p.add_argument("--tree")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--instance-dir")
    p.add_argument("--out")
    p.add_argument("--report")
    _solver_flags(p)

    p = sub.add_parser("reopt-local", help="local reoptimization over r-subsets")
    p.add_argument("--plan")
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--attempts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instance-dir")
    p.add_argument("--out")
    p.add_argument("--log")
    _solver_flags(p)

    p = sub.add_parser("shortburst", help="short-bursts ReCom baseline")
    p.add_argument("--seed-plan")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--burst-length", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instance-dir")
    p.add_argument("--out")
    p.add_argument("--trajectory")

    p = sub.add_parser("score", help="report a plan's metrics")
    p.add_argument("--plan")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--instance-dir")
    p.add_argument("--out")

    p = sub.add_parser("render", help="draw a plan as SVG")
    p.add_argument("--plan")
    p.add_argument("--instance-dir")
    p.add_argument("--out")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required")
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: {exc}")
        if not isinstance(cfg, dict):
            parser.error("--config must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known - {"verbose"})
        if unknown:
            parser.error(f"--config: unknown keys {unknown}")
        sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k) is None]
    if missing:
        parser.error(f"{args.command}: missing " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


# -- helpers ----------------------------------------------------------------

def _solver(args) -> SolverConfig:
    return SolverConfig(time_limit=args.time_limit, engine=args.engine)


def _instance_for(args, plan_path):
    """Instance named by ``--instance-dir`` or by the plan file's metadata."""
    n = eps = None
    directory = getattr(args, "instance_dir", None)
    with open(plan_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh).get("meta", {}) or {}
        except (json.JSONDecodeError, AttributeError) as exc:
            raise LoadError(f"{plan_path}: not a plan file") from exc
    ref = meta.get("instance") or {}
    if directory is None:
        directory = ref.get("path")
        n, eps = ref.get("n_districts"), ref.get("epsilon")
    if directory is None:
        raise InputError(f"{plan_path}: no instance recorded; pass --instance-dir")
    return load_instance_dir(directory, n, eps)


def _instance_ref(inst) -> dict:
    return {"path": inst.meta["path"], "n_districts": inst.n_districts, "epsilon": inst.epsilon}


def _write_plan(plan, path, inst) -> None:
    """Save, reload and compare; a plan file is only reported written once it round-trips."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_plan(plan, path)
    back = load_plan(path, inst)
    if plan_to_json(back) != plan_to_json(plan):
        raise InternalConsistencyError(f"{path}: plan does not round-trip")


def _sibling(path, suffix) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


# -- commands ---------------------------------------------------------------

def cmd_make_grid(args) -> None:
    clusters = tuple(parse_cluster(c) for c in (args.cluster or ()))
    spec = GridSpec(args.width, args.height, args.districts, args.epsilon, clusters, args.background,
                    args.base_pop, args.noise, args.seed)
    write_instance(make_grid(spec), args.out_dir)
    load_instance_dir(args.out_dir)


def _generate_one(job):
    args, index = job
    inst = load_instance_dir(args["instance_dir"], args["districts"], args["epsilon"])
    seed = plan_seed(args["seed"], index)
    solver = SolverConfig(time_limit=args["time_limit"], engine=args["engine"])
    params = ShpParams(fanout_w=args["fanout"], leaf_threshold=args["leaf_threshold"], seed=seed)
    tree = generate_tree(inst, params, solver)
    pool = CandidatePool.from_tree(tree, inst)
    out = Path(args["out_dir"])
    tree_path = out / f"tree_{index:03d}.json"
    prov = {
        "instance": _instance_ref(inst),
        "master_seed": args["seed"],
        "plan_index": index,
        "seed": seed,
        "fanout": params.fanout_w,
        "leaf_threshold": params.leaf_threshold,
        "tree": tree_path.name,
        "leaves": len(collect_leaves(tree, inst)),
    }
    plan = select_plan(pool, inst, solver, prov)
    tree.save(tree_path)
    _write_plan(plan, out / f"plan_{index:03d}.json", inst)
    report = plan_report(plan, inst)
    write_json(out / f"report_{index:03d}.json", report)
    return index, report


def cmd_generate(args) -> None:
    if args.plans < 1:
        raise InputError("--plans must be positive")
    indices = sorted(set(args.plan_index)) if args.plan_index else list(range(args.plans))
    if any(not 0 <= k < args.plans for k in indices):
        raise InputError("--plan-index outside 0..plans-1")
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    load_instance_dir(args.instance_dir, args.districts, args.epsilon)  # fail fast on bad input
    shared = {k: getattr(args, k) for k in ("instance_dir", "districts", "epsilon", "seed", "fanout",
                                              "leaf_threshold", "out_dir", "time_limit", "engine")}
    jobs = [(shared, k) for k in indices]
    workers = min(args.jobs or os.cpu_count() or 1, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_generate_one, jobs))
    else:
        results = [_generate_one(j) for j in jobs]
    rows = [report_csv(rep, f"plan_{k:03d}", header=(i == 0)) for i, (k, rep) in enumerate(sorted(results))]
    name = "reports.csv" if not args.plan_index else "reports_" + "_".join(map(str, indices)) + ".csv"
    with open(Path(args.out_dir) / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(rows))
    for k, rep in sorted(results):
        log.info("plan %d: %d majority districts", k, rep["majority_count"])


def cmd_reopt_beta(args) -> None:
    inst = _instance_for(args, args.plan)
    plan = load_plan(args.plan, inst)
    tree = ShpTree.load(args.tree)
    new = beta_reoptimize(plan, tree, inst, args.steps, _solver(args))
    out = args.out or _sibling(args.plan, "_beta.json")
    _write_plan(new, out, inst)
    write_json(args.report or _sibling(out, "_report.json"),
               {"before": plan_report(plan, inst), "after": plan_report(new, inst),
                "partitions": new.provenance.get("beta_reopt", [])})


def cmd_reopt_local(args) -> None:
    inst = _instance_for(args, args.plan)
    plan = load_plan(args.plan, inst)
    new = local_reoptimize(plan, inst, args.r, np.random.default_rng(args.seed), args.attempts, _solver(args))
    new = type(new)(new.districts, dict(new.provenance, local_seed=args.seed))
    out = args.out or _sibling(args.plan, "_local.json")
    _write_plan(new, out, inst)
    write_json(args.log or _sibling(out, "_log.json"),
               {"accepted": new.provenance["local_accepted"], "popped": new.provenance["local_popped"],
                "before": plan_report(plan, inst)["majority_count"],
                "after": plan_report(new, inst)["majority_count"]})


def cmd_shortburst(args) -> None:
    inst = _instance_for(args, args.seed_plan)
    seed_plan = load_plan(args.seed_plan, inst)
    params = BurstParams(burst_length=args.burst_length, total_steps=args.steps, seed=args.seed)
    best, traj = short_bursts(seed_plan, inst, params)
    out = args.out or _sibling(args.seed_plan, "_bursts.json")
    _write_plan(best, out, inst)
    with open(args.trajectory or _sibling(out, "_trajectory.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trajectory_csv(traj))


def cmd_score(args) -> None:
    inst = _instance_for(args, args.plan)
    rep = plan_report(load_plan(args.plan, inst), inst)
    text = (json.dumps(rep, indent=2, sort_keys=True) + "\n" if args.format == "json"
            else report_csv(rep, Path(args.plan).stem))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_render(args) -> None:
    inst = _instance_for(args, args.plan)
    plan = load_plan(args.plan, inst)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(plan, inst))


COMMANDS = {
    "make-grid": cmd_make_grid,
    "generate": cmd_generate,
    "reopt-beta": cmd_reopt_beta,
    "reopt-local": cmd_reopt_local,
    "shortburst": cmd_shortburst,
    "score": cmd_score,
    "render": cmd_render,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (MajdistError, OSError) as exc:
        print(f"majdist {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
