"""Command-line entry point: ``khi <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import storage
from .bench import hop_trace, run_bench, write_bench_csv, write_trace_csv
from .builder import BuildParams, build_index, build_report
from .graph import GraphParams
from .oracle import Prefilter, ground_truth
from .query import QueryParams
from .tree import TreeParams
from .workload import WorkloadSpec, gen_workload

log = logging.getLogger("khi")


def _ef_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --ef-list {text!r}") from exc


def _dataset(args) -> tuple[np.ndarray, np.ndarray]:
    return storage.read_dataset(args.vectors, args.attrs)


def _queries(args, vectors: np.ndarray, m: int, k: int):
    qv = storage.read_vectors(args.queries)[2] if args.queries else vectors
    return storage.load_queries(args.workload, qv, m, k)


def cmd_build(args) -> int:
    vectors, attributes = _dataset(args)
    params = BuildParams(
        tree=TreeParams(args.tau, args.leaf_capacity),
        graph=GraphParams(args.M, args.ef_build),
        tau_p=args.tau_p,
        threads=args.threads,
        deterministic=args.deterministic,
    )
    index = build_index(vectors, attributes, params)
    size = storage.save_index(index, args.out)
    report = build_report(index)
    report["file_bytes"] = size
    print(json.dumps(report, indent=2))
    return 0


def cmd_gt(args) -> int:
    vectors, attributes = _dataset(args)
    queries = _queries(args, vectors, attributes.shape[1], args.k)
    storage.write_ground_truth(args.out, ground_truth(vectors, attributes, queries, args.k))
    log.info("wrote ground truth for %d queries to %s", len(queries), args.out)
    return 0


def cmd_genq(args) -> int:
    _, attributes = _dataset(args)
    qv = storage.read_vectors(args.query_vectors)[2]
    spec = WorkloadSpec(
        query_count=args.count, sigma=args.sigma, tol=args.tol,
        cardinality=args.cardinality, seed=args.seed,
    )
    storage.write_workload(args.out, gen_workload(attributes, qv, spec))
    return 0


def _load(args):
    vectors, attributes = _dataset(args)
    return storage.load_index(args.index, vectors, attributes), vectors, attributes


def cmd_query(args) -> int:
    index, vectors, attributes = _load(args)
    queries = _queries(args, vectors, attributes.shape[1], args.k)
    params = QueryParams(k=args.k, ef=args.ef, c_e=args.ce, c_n=args.cn, recon_order=args.recon_order)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["query_id", "rank", "id", "distance"])
        for qid, q in enumerate(queries):
            res = index.search(q, params)
            for rank, (i, d) in enumerate(res.pairs()):
                w.writerow([qid, rank, i, f"{d:.6g}"])
    return 0


def cmd_bench(args) -> int:
    vectors, attributes = _dataset(args)
    if args.method == "prefilter":
        searcher = Prefilter(vectors, attributes)
    else:
        searcher = storage.load_index(args.index, vectors, attributes)
    queries = _queries(args, vectors, attributes.shape[1], args.k)
    truths = storage.read_ground_truth(args.gt)
    points = run_bench(searcher, queries, truths, args.ef_list, k=args.k, threads=args.threads)
    write_bench_csv(args.out, points)
    for p in points:
        log.info("ef=%d recall=%.4f qps=%.1f dist_comps=%.1f", p.ef, p.recall, p.qps, p.dist_comps)
    return 0


def cmd_trace(args) -> int:
    index, vectors, attributes = _load(args)
    queries = _queries(args, vectors, attributes.shape[1], args.k)
    params = QueryParams(k=args.k, ef=args.ef)
    write_trace_csv(args.out, [hop_trace(index, q, params) for q in queries])
    return 0


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    storage.write_vectors(args.vectors, rng.random((args.n, args.d), dtype=np.float32))
    storage.write_attributes(args.attrs, rng.random((args.n, args.m)))
    if args.query_vectors:
        storage.write_vectors(args.query_vectors, rng.random((args.nq, args.d), dtype=np.float32))
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="khi", description="Range-filtered approximate nearest neighbour index")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def dataset(p):
        p.add_argument("--vectors", required=True)
        p.add_argument("--attrs", required=True)

    def indexed(p):
        p.add_argument("--index", required=True)
        dataset(p)
        p.add_argument("--workload", required=True)
        p.add_argument("--queries", help="query vector file (default: --vectors)")

    p = sub.add_parser("build", help="build and save an index")
    dataset(p)
    p.add_argument("--out", required=True)
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--ef-build", type=int, default=32)
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--leaf-capacity", type=int, default=2)
    p.add_argument("--tau-p", type=int, default=100)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("gt", help="exact ground truth by prefiltering")
    dataset(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("genq", help="generate a workload at a target selectivity")
    dataset(p)
    p.add_argument("--query-vectors", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--tol", type=float, default=0.5)
    p.add_argument("--cardinality", type=int)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_genq)

    p = sub.add_parser("query", help="run a workload and write results")
    indexed(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ef", type=int, required=True)
    p.add_argument("--ce", type=int)
    p.add_argument("--cn", type=int)
    p.add_argument("--recon-order", choices=["leaf", "root"], default="leaf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="recall/QPS sweep over ef")
    indexed(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ef-list", type=_ef_list, default=[16, 32, 64, 128, 256])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--method", choices=["khi", "prefilter"], default="khi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("trace", help="per-hop distance thresholds")
    indexed(p)
    p.add_argument("--ef", type=int, default=300)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("synth", help="write a uniform random dataset")
    p.add_argument("--vectors", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--query-vectors")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--nq", type=int, default=100)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"khi {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
