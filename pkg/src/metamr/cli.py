"""Command-line entry point: gen, run, bound, demo, verify.

Exit status is 0 on success, 1 when ``verify`` finds a mismatch and 2 on
invalid input.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import fixtures
from .bounds import KINDS, BoundError, theorem_bound
from .config import PlanConfig, load_plan
from .engine import HashExhausted, JobPlan, JobResult, PlanError, Round, run_hierarchical, run_job
from .joins import measure
from .knn import knn_meta
from .model import CostModel, IntegrityError, Relation, dump_relation, load_relation
from .oracle import nested_loop_join
from .report import emit_report
from .schema import OversizedGroup
from .socialgraph import shortest_path_meta
from .workloads import GenSpec, gen_relations

log = logging.getLogger("metamr")

INVALID = (PlanError, BoundError, ValueError, OSError, IntegrityError, HashExhausted)


def _sizes(rel: Relation) -> dict[str, int]:
    if not rel.tuples:
        return {}
    return {a: v.size_bits for a, v in zip(rel.attributes, rel.tuples[0].values)}


def _bound_kinds(plan: JobPlan, relations, result: JobResult) -> tuple[str, ...]:
    if len(relations) > 2:
        return ("multiway", "classic-multiway") if plan.mode == "meta" else ("classic-multiway",)
    if plan.hashed:
        kinds = ("hashed", "classic-hashed")
    elif any(r.strategy != "key-group" for r in plan.rounds):
        kinds = ("skew", "classic-skew")
    else:
        kinds = ("two-way", "classic-two-way")
    return kinds if plan.mode == "meta" else kinds[1:]


def _execute(cfg: PlanConfig, relations) -> JobResult:
    plan = cfg.plan
    try:
        return run_job(plan, relations, q=cfg.q, seed=cfg.seed, workers=cfg.workers)
    except OversizedGroup as exc:
        log.info("%s; rerunning key-group rounds with the skew schema", exc)
        rounds = tuple(replace(r, strategy="skew") if r.strategy == "key-group" else r
                       for r in plan.rounds)
        return run_job(replace(plan, rounds=rounds), relations, q=cfg.q, seed=cfg.seed,
                       workers=cfg.workers)


def _run(cfg: PlanConfig, relations, report_path):
    result = _execute(cfg, relations)
    baseline = None
    if cfg.plan.mode == "meta":
        classic = replace(cfg.plan, mode="classic", hashed=False, digester=None)
        baseline = _execute(replace(cfg, plan=classic), relations)
    params = dict(measure(result, relations), q=cfg.q)
    report = emit_report(result, params, report_path, baseline=baseline,
                         bound_kinds=_bound_kinds(cfg.plan, relations, result))
    if report_path is None:
        sys.stdout.write(report.to_json())
    return result


def _load_config(args) -> PlanConfig:
    cfg = load_plan(args.config)
    return cfg.override(q=args.q, seed=args.seed, mode=args.mode,
                        unit_cost=args.unit_cost or None, workers=args.workers)


def cmd_gen(args) -> int:
    spec = GenSpec(n=args.n, c=args.c, w=args.w, distinct_keys=args.distinct, zipf=args.zipf,
                   heavy_hitters=args.heavy, heavy_share=args.heavy_share, seed=args.seed,
                   shape=args.shape)
    os.makedirs(args.out, exist_ok=True)
    for rel in gen_relations(spec):
        dump_relation(rel, os.path.join(args.out, f"{rel.name}.tsv"), _sizes(rel))
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    relations = [load_relation(p) for p in args.relations]
    _run(cfg, relations, args.report)
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    relations = [load_relation(p) for p in args.relations]
    result = _run(cfg, relations, args.report)
    expected = nested_loop_join(relations)
    if result.output_set() != expected:
        print(f"mismatch: {len(result.outputs)} outputs, oracle has {len(expected)}",
              file=sys.stderr)
        return 1
    print(f"ok: {len(expected)} outputs match the nested-loop join", file=sys.stderr)
    return 0


def cmd_bound(args) -> int:
    params = {p: getattr(args, p) for p in ("n", "c", "w", "h", "r", "m", "k", "p")}
    value = theorem_bound(args.kind, rounding="exact" if args.exact else "ceil", **params)
    print(value)
    return 0


def _demo_fig2(args):
    X, Y = fixtures.fig2_relations()
    cost = CostModel(unit_cost=not args.bit_cost)
    plan = JobPlan(args.mode or "meta", (Round("B"),), cost=cost)
    cfg = PlanConfig(plan, args.q or fixtures.FIG2_Q, args.seed or 0, args.workers or 1)
    _run(cfg, [X, Y], args.report)


def _demo_fig5(args):
    clusters, topo = fixtures.fig5_clusters(), fixtures.fig5_topology()
    q, seed = args.q or fixtures.FIG5_Q, args.seed or 0
    mode = args.mode or "meta"
    result = run_hierarchical(clusters, fixtures.fig5_global_plan(mode), topo, q, seed)
    baseline = None
    if mode == "meta":
        baseline = run_hierarchical(clusters, fixtures.fig5_global_plan("classic"), topo, q, seed)
    relations = [r for cl in clusters for r in cl.relations]
    _emit(result, dict(measure(result, relations), q=q), args.report, baseline)


def _demo_knn(args):
    R, S = fixtures.knn_relations()
    result = knn_meta(R, S, args.k, args.q or (1 << 62))
    _emit(result, {"n": len(S), "k": args.k, "q": args.q}, args.report)


def _demo_socialgraph(args):
    result = shortest_path_meta(fixtures.social_graph(), args.src, args.dst)
    print(" -> ".join(result.extras["path"] or ["no path"]), file=sys.stderr)
    _emit(result, {}, args.report)


def _emit(result, params, path, baseline=None):
    report = emit_report(result, params, path, baseline=baseline)
    if path is None:
        sys.stdout.write(report.to_json())


DEMOS = {"fig2": _demo_fig2, "fig5": _demo_fig5, "knn": _demo_knn,
         "socialgraph": _demo_socialgraph}


def cmd_demo(args) -> int:
    if args.mode == "classic" and args.name in ("knn", "socialgraph"):
        raise PlanError(f"the {args.name} demo runs in meta mode only")
    DEMOS[args.name](args)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=int, help="reducer capacity in original bits")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("classic", "meta"))
    p.add_argument("--unit-cost", action="store_true",
                   help="price metadata and signals at zero, data at declared sizes")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here instead of stdout")
    p.add_argument("--workers", type=int, help="threads for the map phase")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metamr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write synthetic relation files")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--c", type=int, default=16)
    g.add_argument("--w", type=int, default=256)
    g.add_argument("--distinct", type=int, default=10)
    g.add_argument("--zipf", type=float, default=0.0)
    g.add_argument("--heavy", type=int, default=0)
    g.add_argument("--heavy-share", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--shape", choices=("fig2",))
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    for name, func, text in (("run", cmd_run, "run a plan over relation files"),
                             ("verify", cmd_verify, "run, then compare with a nested-loop join")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("relations", nargs="+")
        _common(p)
        p.set_defaults(func=func)

    b = sub.add_parser("bound", help="evaluate a cost bound")
    b.add_argument("kind", choices=sorted(KINDS))
    for sym, typ in (("n", int), ("c", int), ("w", int), ("h", int), ("r", float),
                     ("m", int), ("k", int), ("p", int)):
        b.add_argument(f"--{sym}", type=typ)
    b.add_argument("--exact", action="store_true", help="unrounded log terms")
    b.set_defaults(func=cmd_bound)

    d = sub.add_parser("demo", help="run a bundled example")
    d.add_argument("name", choices=sorted(DEMOS))
    _common(d)
    d.add_argument("--bit-cost", action="store_true", help="fig2: price metadata in bits")
    d.add_argument("--k", type=int, default=3, help="knn: neighbours per query point")
    d.add_argument("--src", default="P1", help="socialgraph: start person")
    d.add_argument("--dst", default="P6", help="socialgraph: target person")
    d.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
