"""Command-line entry point: ``wlsh <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible plan, 4 I/O or
file-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .bench import (
    BenchConfig,
    QuerySet,
    RhoGrid,
    alsh_rho,
    gen_query_set,
    gen_synthetic_dataset,
    gen_weight_vectors,
    overall_ratio,
    run_benchmark,
    write_report,
    WeightGenSpec,
)
from .bounds import Relaxation
from .errors import ConfigError, IndexFormatError, InfeasiblePlanError, UnassignableError
from .index import build_index, load_index
from .metric import (
    Dataset,
    Metric,
    Point,
    brute_force_knn,
    load_dataset,
    load_weights,
    save_dataset,
    save_weights,
)
from .params import SolverContext
from .partition import naive_plan, partition
from .query import search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

log = logging.getLogger("wlsh")


def _relaxation(text: str) -> Relaxation:
    try:
        v, vp = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected v,v' (two integers), got {text!r}") from None
    return Relaxation(v, vp)


def _c(text: str) -> int:
    c = int(text)
    if c < 2:
        raise argparse.ArgumentTypeError("c must be an integer >= 2")
    return c


def _add_solver_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=float, default=2.0, help="l_p exponent in (0, 2] (default 2)")
    sp.add_argument("--c", type=_c, default=3, help="approximation ratio (default 3)")
    sp.add_argument("--tau", type=int, default=None,
                    help="per-group table cap (default 1000 for p=1, else 500)")
    sp.add_argument("--relax", type=_relaxation, default=None, metavar="V,V'",
                    help="bound relaxation order statistics")
    sp.add_argument("--reduce-threshold", action="store_true",
                    help="use the reduced collision threshold")


def _tau(args) -> int:
    if args.tau is not None:
        return args.tau
    return 1000 if args.p == 1.0 else 500


def _context(args, dataset: Dataset, weights) -> SolverContext:
    return SolverContext(weights, dataset.value_range, dataset.n, args.p, args.c,
                         args.relax, args.reduce_threshold)


# ---------------------------------------------------------------------------
# query / truth files


def save_queries(qs: QuerySet, path: str | Path) -> None:
    doc = {
        "dataset_digest": qs.dataset.digest,
        "weight_ids": qs.weight_ids,
        "points": [{"id": pt.id, "coords": [float(v) for v in pt.coords]} for pt in qs.points],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_queries(path: str | Path) -> list[tuple[Point, int]]:
    try:
        doc = json.loads(Path(path).read_text())
        points = [Point(int(p["id"]), p["coords"]) for p in doc["points"]]
        wids = [int(w) for w in doc["weight_ids"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise IndexFormatError(f"{path}: malformed query file ({exc})") from exc
    return [(pt, wid) for pt in points for wid in wids]


def _truth_key(pid: int, wid: int) -> str:
    return f"{pid}:{wid}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    ds = gen_synthetic_dataset(args.n, args.d, (args.lo, args.hi), args.seed)
    digest = save_dataset(ds, args.out)
    print(f"wrote {args.out}: n={ds.n} d={ds.d} range=[{args.lo}, {args.hi}] sha256={digest}")
    return EXIT_OK


def cmd_gen_weights(args) -> int:
    spec = WeightGenSpec(args.size, args.subsets, args.subranges, args.d, seed=args.seed)
    ws = gen_weight_vectors(spec)
    digest = save_weights(ws, args.out)
    print(f"wrote {args.out}: |S|={len(ws)} d={args.d} sha256={digest}")
    return EXIT_OK


def cmd_gen_queries(args) -> int:
    ds = load_dataset(args.data)
    ws = load_weights(args.weights)
    qs = gen_query_set(ds, ws, args.points, args.vectors, args.seed)
    digest = save_dataset(qs.dataset, args.out_data)
    save_queries(qs, args.out_queries)
    print(f"wrote {args.out_data}: n={qs.dataset.n} sha256={digest}")
    print(f"wrote {args.out_queries}: {len(qs.points)} points x {len(qs.weight_ids)} vectors "
          f"= {len(qs)} queries")
    if args.truth:
        metric = Metric.lp(args.p)
        by_id = {wv.id: wv for wv in ws}
        truth = {
            _truth_key(pt.id, wid): brute_force_knn(qs.dataset, metric, by_id[wid], pt.coords, args.k)
            for pt, wid in qs.queries
        }
        Path(args.truth).write_text(json.dumps({"k": args.k, "p": args.p, "truth": truth}) + "\n")
        print(f"wrote {args.truth}: exact {args.k}-NN for {len(truth)} queries")
    return EXIT_OK


def cmd_plan(args) -> int:
    ds = load_dataset(args.data)
    ws = load_weights(args.weights)
    ctx = _context(args, ds, ws)
    tau = _tau(args)
    plan = naive_plan(ctx) if args.naive else partition(ctx, tau)
    print(f"tau={plan.tau} tau_min={ctx.tau_min()} groups={len(plan.groups)}")
    for gi, g in enumerate(plan.groups):
        members = " ".join(f"{m}:{vp.beta}" for m, vp in g.members)
        print(f"group {gi}: base={g.base} beta={g.beta_group} levels={g.b_range_levels} "
              f"members[id:beta]={members}")
    print(f"beta_S={plan.beta_total} naive={ctx.naive_total()}")
    return EXIT_OK


def cmd_build(args) -> int:
    ds = load_dataset(args.data)
    ws = load_weights(args.weights)
    ctx = _context(args, ds, ws)
    plan = naive_plan(ctx) if args.naive else partition(ctx, _tau(args))
    index = build_index(ds, plan, args.seed)
    index.save(args.out)
    print(f"wrote {args.out}: {len(plan.groups)} groups, {index.table_count} tables")
    return EXIT_OK


def cmd_query(args) -> int:
    ds = load_dataset(args.data)
    index = load_index(args.index, ds)
    if args.queries:
        items = load_queries(args.queries)
    elif args.coords is not None and args.weight_id is not None:
        items = [(Point(-1, [float(v) for v in args.coords.split(",")]), args.weight_id)]
    elif args.point_id is not None and args.weight_id is not None:
        if not 0 <= args.point_id < ds.n:
            raise ConfigError(f"point id {args.point_id} outside [0, {ds.n})")
        items = [(ds.point(args.point_id), args.weight_id)]
    else:
        raise ConfigError("give --queries, or --weight-id with --coords or --point-id")
    truth = None
    if args.truth:
        try:
            truth = json.loads(Path(args.truth).read_text())["truth"]
        except (KeyError, TypeError, ValueError) as exc:
            raise IndexFormatError(f"{args.truth}: malformed truth file ({exc})") from exc
    out = []
    for pt, wid in items:
        res = search(index, ds, pt.coords, wid, args.k)
        rec = {
            "point_id": pt.id,
            "weight_id": wid,
            "neighbors": [[pid, dist] for pid, dist in res.neighbors],
            "radius_final": res.radius_final,
            "candidates_checked": res.candidates_checked,
            "io_bucket": res.io.bucket_blocks_read,
            "io_candidate": res.io.candidate_blocks_read,
            "io_total": res.io.total,
        }
        if truth is not None:
            exact = truth.get(_truth_key(pt.id, wid))
            if exact is not None:
                rec["ratio"] = overall_ratio(res, [tuple(e) for e in exact[: args.k]])
        out.append(rec)
        if not args.json:
            nbrs = ", ".join(f"{pid}:{dist:.4f}" for pid, dist in res.neighbors)
            line = (f"q={pt.id} w={wid} io={res.io.total} (bucket {res.io.bucket_blocks_read}, "
                    f"candidate {res.io.candidate_blocks_read}) R={res.radius_final:.4g}")
            if "ratio" in rec:
                line += f" ratio={rec['ratio']:.4f}"
            print(line)
            print(f"  {nbrs}")
    if args.json:
        json.dump(out, sys.stdout)
        print()
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        n=args.n, d=args.d, value_range=(args.lo, args.hi), cardinality=args.size,
        n_subset=args.subsets, n_subrange=args.subranges, p=args.p, c=args.c, k=args.k,
        tau=args.tau, relaxation=args.relax, reduction=args.reduce_threshold,
        naive=args.naive, n_points=args.points, n_vectors=args.vectors, seed=args.seed,
        workers=args.workers,
    )
    dataset = load_dataset(args.data) if args.data else None
    weights = load_weights(args.weights) if args.weights else None
    report = run_benchmark(cfg, dataset, weights)
    write_report(report, args.csv, args.json)
    print(json.dumps(report.summary(), indent=2))
    return EXIT_OK


def cmd_alsh_rho(args) -> int:
    ws = load_weights(args.weights)
    grid = RhoGrid(n_w=args.grid, n_v=args.grid)
    for kind in args.kind:
        res = alsh_rho(kind, ws, args.R, args.c, args.n, grid)
        w = "-" if res.w is None else f"{res.w:.4g}"
        print(f"{res.kind}: rho={res.rho:.6f} L={res.L:.1f} w={w} V={res.V:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wlsh", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-data", help="uniform synthetic integer dataset")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--lo", type=int, default=0)
    sp.add_argument("--hi", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("gen-weights", help="weight-vector set from subsets and subranges")
    sp.add_argument("--size", type=int, default=64, help="|S|")
    sp.add_argument("--subsets", type=int, default=8, help="#Subset")
    sp.add_argument("--subranges", type=int, default=8, help="#Subrange")
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_weights)

    sp = sub.add_parser("gen-queries", help="remove query points and pair them with vectors")
    sp.add_argument("--data", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--vectors", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-data", required=True, help="dataset with query points removed")
    sp.add_argument("--out-queries", required=True)
    sp.add_argument("--truth", default=None, help="also write exact k-NN to this JSON file")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--p", type=float, default=2.0)
    sp.set_defaults(func=cmd_gen_queries)

    sp = sub.add_parser("plan", help="partition the weight-vector set and report table counts")
    sp.add_argument("--data", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--naive", action="store_true", help="one group per vector")
    _add_solver_args(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("build", help="build and save the index")
    sp.add_argument("--data", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--naive", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    _add_solver_args(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("query", help="answer (c,k) nearest-neighbour queries")
    sp.add_argument("--index", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--queries", default=None, help="query JSON from gen-queries")
    sp.add_argument("--point-id", type=int, default=None, help="query with a stored point")
    sp.add_argument("--coords", default=None, help="comma-separated query coordinates")
    sp.add_argument("--weight-id", type=int, default=None)
    sp.add_argument("--truth", default=None, help="exact k-NN JSON for ratios")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--json", action="store_true", help="print results as JSON")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("bench", help="run the benchmark protocol end to end")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--lo", type=int, default=0)
    sp.add_argument("--hi", type=int, default=10_000)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--subsets", type=int, default=8)
    sp.add_argument("--subranges", type=int, default=8)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--vectors", type=int, default=10)
    sp.add_argument("--naive", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--data", default=None, help="use this dataset instead of generating one")
    sp.add_argument("--weights", default=None, help="use these weight vectors")
    sp.add_argument("--csv", default=None)
    sp.add_argument("--json", default=None)
    _add_solver_args(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("alsh-rho", help="rho and table count of the SL/S2 baselines")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--kind", nargs="+", default=["SL", "S2"], choices=["SL", "S2"])
    sp.add_argument("--R", type=float, default=1000.0)
    sp.add_argument("--c", type=float, default=3.0)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--grid", type=int, default=128, help="grid points per axis")
    sp.set_defaults(func=cmd_alsh_rho)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InfeasiblePlanError, UnassignableError) as exc:
        print(f"wlsh: infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"wlsh: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        print(f"wlsh: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
