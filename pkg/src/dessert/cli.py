"""Command line interface: build, query, eval, bench-synthetic, theory.

Every command is deterministic given --seed (wall-clock latency figures
excepted) and exits 0 iff it completed without error. CSV outputs always
carry a header row; eval and bench-synthetic also render figures next to
their CSV files. Set DESSERT_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

import numpy as np

from . import report, storage, synth, theory
from .index import (
    PROFILES,
    FilterConfig,
    IndexConfig,
    apply_profile,
    build_index,
    query as run_query,
)
from .oracle import brute_force_search
from .sketch import tiny_table_bytes

log = logging.getLogger("dessert")


def cmd_build(args) -> int:
    docs = storage.read_vector_sets(args.input)
    d = docs[0][1].shape[1]
    config = IndexConfig(d=d, seed=args.seed)
    if args.profile:
        config = apply_profile(config, args.profile)
    filt = config.filter
    config = IndexConfig(
        d=d,
        C=args.C if args.C is not None else config.C,
        L=args.L if args.L is not None else config.L,
        seed=args.seed,
        filter=FilterConfig(
            enabled=not args.no_filter,
            centroids=args.centroids if args.centroids is not None else filt.centroids,
            iters=filt.iters,
            probe=args.filter_probe if args.filter_probe is not None else filt.probe,
            k_filter=args.filter_k if args.filter_k is not None else filt.k_filter,
        ),
    )

    start = time.perf_counter()
    index = build_index(docs, config)
    elapsed = time.perf_counter() - start
    storage.save_index(args.output, index)

    total_vectors = int(index.sizes.sum())
    sketch_bytes = sum(tiny_table_bytes(s.m, s.r, s.L) for s in index.sketches)
    print(
        f"built index: N={index.n_docs} sets, {total_vectors} vectors, d={d}, "
        f"C={config.C} (r={config.code_range}), L={config.L}, "
        f"filter={'on' if config.filter.enabled else 'off'}, "
        f"build_time={elapsed:.2f}s, sketch_bytes={sketch_bytes}"
    )
    print(f"wrote {args.output}")
    return 0


def cmd_query(args) -> int:
    if args.k < 1:
        raise ValueError(f"invalid parameter: --k must be >= 1, got {args.k}")
    queries = storage.read_vector_sets(args.queries)
    rows = []
    if args.exact:
        if not args.docs:
            raise ValueError("--exact needs --docs (index files do not keep raw vectors)")
        docs = storage.read_vector_sets(args.docs)
        for qid, Q in queries:
            for rank, (doc_id, score) in enumerate(
                brute_force_search(docs, Q, args.k), start=1
            ):
                rows.append((qid, rank, doc_id, f"{score:.6f}"))
    else:
        if not args.index:
            raise ValueError("--index is required unless --exact is given")
        index = storage.load_index(args.index)
        for qid, Q in queries:
            hits = run_query(
                index,
                Q,
                args.k,
                probe=args.probe,
                k_filter=args.filter_k,
                threads=args.threads,
            )
            for rank, (doc_id, score) in enumerate(hits, start=1):
                rows.append((qid, rank, doc_id, f"{score:.6f}"))

    header = ["query_id", "rank", "doc_id", "score"]
    if args.output:
        report.write_csv(args.output, header, rows)
        print(f"wrote {len(rows)} rows to {args.output}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(str(v) for v in row))
    return 0


def cmd_eval(args) -> int:
    index = storage.load_index(args.index)
    queries = storage.read_vector_sets(args.queries)
    if args.qrels:
        qrels = storage.read_qrels(args.qrels)
    elif args.docs:
        # No qrels given: the exact oracle's top-1 per query defines relevance.
        docs = storage.read_vector_sets(args.docs)
        qrels = {qid: {brute_force_search(docs, Q, 1)[0][0]} for qid, Q in queries}
    else:
        raise ValueError("eval needs --qrels, or --docs to derive relevance exactly")
    ks = sorted(int(k) for k in args.k.split(","))
    if not ks or min(ks) < 1:
        raise ValueError(f"invalid parameter: --k list must be positive, got {args.k}")

    known = {qid for qid, _ in queries}
    for qid in sorted(set(qrels) - known):
        log.warning("qrels query id %d not in queries file; excluded", qid)
    if not any(qid in qrels for qid, _ in queries):
        log.warning("no evaluated queries: qrels cover none of the query ids")

    max_k = max(max(ks), 10)
    latencies = []
    per_query_rows = []
    recall_hits = {k: [] for k in ks}
    rr10 = []
    for qid, Q in queries:
        start = time.perf_counter()
        hits = run_query(
            index, Q, max_k, probe=args.probe, k_filter=args.filter_k, threads=args.threads
        )
        latencies.append((time.perf_counter() - start) * 1000.0)
        if qid not in qrels:
            continue
        relevant = qrels[qid]
        ranks = [rank for rank, (doc, _) in enumerate(hits, start=1) if doc in relevant]
        first = ranks[0] if ranks else None
        for k in ks:
            recall_hits[k].append(1.0 if first is not None and first <= k else 0.0)
        rr10.append(1.0 / first if first is not None and first <= 10 else 0.0)
        per_query_rows.append(
            [qid, f"{latencies[-1]:.3f}", first if first is not None else ""]
            + [int(first is not None and first <= k) for k in ks]
        )

    evaluated = len(rr10)
    recall = {k: (float(np.mean(v)) if v else 0.0) for k, v in recall_hits.items()}
    mrr10 = float(np.mean(rr10)) if rr10 else 0.0
    p50, p95, p99 = (
        np.percentile(latencies, [50, 95, 99]) if latencies else (0.0, 0.0, 0.0)
    )

    print(
        f"eval: {evaluated} evaluated queries of {len(queries)} "
        f"(index N={index.n_docs}, C={index.config.C}, L={index.config.L}, "
        f"probe={args.probe or index.config.filter.probe}, "
        f"filter_k={args.filter_k or index.config.filter.k_filter}, "
        f"filter={'on' if index.filter else 'off'})"
    )
    for k in ks:
        print(f"  recall@{k} = {recall[k]:.4f}")
    print(f"  MRR@10   = {mrr10:.4f}")
    print(f"  latency ms: p50={p50:.3f} p95={p95:.3f} p99={p99:.3f}")

    if args.output:
        header = ["query_id", "latency_ms", "first_relevant_rank"] + [f"hit@{k}" for k in ks]
        report.write_csv(args.output, header, per_query_rows)
        print(f"wrote {args.output}")
        if not args.no_figures and latencies:
            fig = report.render_eval_figure(args.output, latencies, recall, mrr10)
            print(f"wrote {fig}")
    return 0


def _timed_batch(fn, floor_s: float = 1.0, max_rounds: int = 8) -> tuple[list, float]:
    """Run a query batch repeatedly and keep the fastest wall time.

    The minimum over a few rounds estimates the noise-free cost, which keeps
    the speedup trend stable at small set sizes where one batch lasts only a
    few dozen milliseconds. Results come from the first round (all rounds are
    identical by determinism).
    """
    results = None
    best = math.inf
    total = 0.0
    rounds = 0
    while rounds < max_rounds and (rounds == 0 or total < floor_s):
        start = time.perf_counter()
        out = fn()
        elapsed = time.perf_counter() - start
        if results is None:
            results = out
        best = min(best, elapsed)
        total += elapsed
        rounds += 1
    return results, best


def cmd_bench_synthetic(args) -> int:
    ms = [int(m) for m in args.m.split(",")]
    if not ms or min(ms) < 1 or args.n < 1 or args.d < 1 or args.queries < 1:
        raise ValueError("invalid parameter: m list, n, d, queries must be positive")
    if args.noise <= 0.0:
        raise ValueError(f"invalid parameter: noise must be > 0, got {args.noise}")
    rows = []
    dessert_ms = []
    brute_ms = []
    for m in ms:
        C = int(math.log2(m)) + 1
        docs = synth.random_corpus(args.n, m, args.d, seed=args.seed + m)
        config = IndexConfig(
            d=args.d, C=C, L=8, seed=args.seed, filter=FilterConfig(enabled=False)
        )
        index = build_index(docs, config)

        rng = np.random.default_rng([args.seed, m])
        q_ids = rng.choice(args.n, size=min(args.queries, args.n), replace=False)
        queries = [
            (int(i), synth.noisy_copy(docs[int(i)][1], rng, scale=args.noise))
            for i in q_ids
        ]

        dessert_top, t = _timed_batch(
            lambda: [run_query(index, Q, 1)[0][0] for _, Q in queries]
        )
        t_dessert = t * 1000.0 / len(queries)

        brute_top, t = _timed_batch(
            lambda: [brute_force_search(docs, Q, 1)[0][0] for _, Q in queries]
        )
        t_brute = t * 1000.0 / len(queries)

        agreement = float(np.mean([a == b for a, b in zip(dessert_top, brute_top)]))
        rows.append(
            (m, args.n, len(queries), C, 8,
             f"{t_dessert:.3f}", f"{t_brute:.3f}", f"{t_brute / t_dessert:.3f}",
             f"{agreement:.3f}")
        )
        dessert_ms.append(t_dessert)
        brute_ms.append(t_brute)
        print(
            f"m={m:5d}: dessert={t_dessert:9.3f} ms  brute={t_brute:9.3f} ms  "
            f"ratio={t_brute / t_dessert:6.2f}  top1_agreement={agreement:.3f}"
        )

    if args.output:
        header = ["m", "n_docs", "n_queries", "C", "L",
                  "dessert_ms", "brute_ms", "ratio", "top1_agreement"]
        report.write_csv(args.output, header, rows)
        print(f"wrote {args.output}")
        if not args.no_figures:
            fig = report.render_bench_figure(args.output, ms, dessert_ms, brute_ms)
            print(f"wrote {fig}")
    return 0


def cmd_theory(args) -> int:
    gamma = theory.gamma_upper(args.s_max, args.tau, args.alpha)
    gamma_max = (
        args.gamma_max
        if args.gamma_max is not None
        else theory.max_gamma_over_similarity(args.Delta, args.alpha)
    )
    upper, lower = theory.recommended_table_terms(
        args.N, args.mq, args.m, args.delta, args.Delta, gamma_max, args.beta
    )
    L = theory.recommended_tables(
        args.N, args.mq, args.m, args.delta, args.Delta, gamma_max, args.beta
    )
    cost = theory.query_cost_estimate(args.mq, args.N, args.m, args.d, args.delta, args.T, L=L)

    rows = [
        ("gamma", f"{gamma:.9f}"),
        ("gamma_max", f"{gamma_max:.9f}"),
        ("L_term_upper_tail", f"{upper:.3f}"),
        ("L_term_lower_tail", f"{lower:.3f}"),
        ("recommended_L", L),
        ("query_cost_ops", cost),
    ]
    for name, value in rows:
        print(f"{name} = {value}")
    if args.output:
        report.write_csv(args.output, ["metric", "value"], rows)
        print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dessert", description="Vector set search with collision-count sketches"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build an index from a vector set file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--C", type=int, default=None, help="hashes concatenated per table")
    p.add_argument("--L", type=int, default=None, help="number of tables")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--no-filter", action="store_true", help="disable the centroid prefilter")
    p.add_argument("--filter-k", type=int, default=None)
    p.add_argument("--filter-probe", type=int, default=None)
    p.add_argument("--centroids", type=int, default=None, help="k for the prefilter k-means")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="rank documents for each query set")
    p.add_argument("--index", default=None)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--probe", type=int, default=None)
    p.add_argument("--filter-k", type=int, default=None)
    p.add_argument("--exact", action="store_true", help="brute-force oracle ranking")
    p.add_argument("--docs", default=None, help="vector set file (required with --exact)")
    p.add_argument("--output", default=None, help="CSV path (stdout if omitted)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="recall/MRR/latency against qrels")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", default=None)
    p.add_argument("--docs", default=None,
                   help="vector set file; without --qrels, exact top-1 defines relevance")
    p.add_argument("--k", default="10", help="comma-separated recall cutoffs")
    p.add_argument("--probe", type=int, default=None)
    p.add_argument("--filter-k", type=int, default=None)
    p.add_argument("--output", default=None, help="per-query CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-synthetic", help="sketch engine vs brute force on random sets")
    p.add_argument("--m", default="2,4,8,16,32,64", help="comma-separated set sizes")
    p.add_argument("--n", type=int, default=1000, help="documents per run")
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queries", type=int, default=16, help="queries per set size")
    p.add_argument("--noise", type=float, default=0.02,
                   help="query perturbation relative to vector norm; the default "
                        "keeps the planted ranking stable for both engines")
    p.add_argument("--output", default=None, help="CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_bench_synthetic)

    p = sub.add_parser("theory", help="tail-bound and table-count calculators")
    p.add_argument("--s-max", dest="s_max", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--mq", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--Delta", type=float, required=True)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--gamma-max", dest="gamma_max", type=float, default=None,
                   help="override the grid-searched worst-case gamma")
    p.add_argument("--output", default=None, help="CSV path")
    p.set_defaults(func=cmd_theory)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DESSERT_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, IndexError, storage.StorageError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
