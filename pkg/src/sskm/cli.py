"""``sskm`` command line: vectorize, cluster, bench.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from sskm import bench, engine
from sskm.corpus import (DEFAULT_MAX_DF, CorpusFormatError, build_corpus, load_jsonl,
                         load_matrix, load_stop_words, parse_synthetic_spec,
                         synthetic_corpus, tokenize, write_matrix)
from sskm.pruneindex import DEFAULT_LAMBDAS


class UsageError(Exception):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _mode_list(text: str) -> tuple[engine.Mode, ...]:
    try:
        return tuple(engine.Mode.parse(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _mode(text: str) -> engine.Mode:
    try:
        return engine.Mode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _default_threads() -> int:
    raw = os.environ.get("SSKM_THREADS")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", type=_float_list, default=DEFAULT_LAMBDAS)
    p.add_argument("--conv", type=float, default=1e-4,
                   help="stop when every centroid moves less than this (squared distance)")
    p.add_argument("--ncc-eps", type=float, default=0.0)
    p.add_argument("--index-activation", type=int, default=100)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--threads", type=int, default=_default_threads())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sskm",
                                     description="Sparse spherical k-means for documents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vectorize", help="JSONL documents -> unit TF-IDF matrix")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--stopwords", type=Path)
    p.add_argument("--max-df", type=float, default=DEFAULT_MAX_DF)
    p.add_argument("--vocab", type=Path, help="vocabulary JSON (default: OUTPUT.vocab.json)")
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("cluster", help="cluster a matrix file")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--k", required=True, type=int)
    p.add_argument("--mode", type=_mode, default=engine.Mode.NCC_INDEX)
    _add_engine_flags(p)
    p.add_argument("--out-assignments", required=True, type=Path)
    p.add_argument("--out-report", required=True, type=Path)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bench", help="median timings for every mode x k")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path)
    src.add_argument("--synthetic", help="N,V,avg_nnz,zipf_s,seed")
    p.add_argument("--k-list", type=_int_list, default=(50, 500))
    p.add_argument("--modes", type=_mode_list, default=tuple(engine.Mode))
    p.add_argument("--repeats", type=int, default=5)
    _add_engine_flags(p)
    p.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def _config_kwargs(args) -> dict:
    return {"lambdas": args.lambdas, "conv_sq_dist": args.conv, "ncc_epsilon": args.ncc_eps,
            "index_activation_threshold": args.index_activation, "max_iters": args.max_iters,
            "seed": args.seed}


def _check_threads(args) -> None:
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")


def cmd_vectorize(args) -> int:
    docs = load_jsonl(args.input)
    if not docs:
        raise RuntimeError("empty corpus")
    stop = load_stop_words(args.stopwords) if args.stopwords else set()
    if not 0.0 < args.max_df <= 1.0:
        raise UsageError("--max-df must lie in (0, 1]")
    corpus, vocab = build_corpus([(i, tokenize(t)) for i, t in docs], stop, args.max_df)
    write_matrix(args.output, corpus)
    vocab.save(args.vocab or Path(str(args.output) + ".vocab.json"))
    nnz = corpus.matrix.nnz
    print(f"documents: {len(corpus)} kept, {len(corpus.dropped)} dropped")
    print(f"dims: {corpus.dims}")
    print(f"avg nnz: {nnz / len(corpus):.2f}")
    for doc_id in corpus.dropped:
        print(f"dropped: {doc_id}")
    return 0


def cmd_cluster(args) -> int:
    _check_threads(args)
    try:
        config = engine.RunConfig(k=args.k, mode=args.mode, **_config_kwargs(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    corpus = load_matrix(args.input)
    try:
        config.check_n_docs(len(corpus))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t0 = time.perf_counter()
    result = engine.run(corpus.matrix, config, n_threads=args.threads)
    wall = time.perf_counter() - t0
    with open(args.out_assignments, "w", encoding="utf-8") as fh:
        fh.writelines(f"{doc_id}\t{c}\n"
                      for doc_id, c in zip(corpus.doc_ids, result.assignments.tolist()))
    report = build_report(config, result, corpus, wall)
    args.out_report.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"{result.n_iter} iterations ({result.stop_reason}), "
          f"{result.total_dot_products} dot products, objective {result.objective:.6f}")
    return 0


def build_report(config: engine.RunConfig, result: engine.RunResult, corpus,
                 wall_time: float) -> dict:
    iters = [asdict(s) for s in result.stats]
    for row in iters:
        if row["max_drift"] != row["max_drift"]:
            row["max_drift"] = None
    return {
        "config": config.to_dict(),
        "iterations": iters,
        "totals": {
            "wall_time": sum(s.wall_time for s in result.stats),
            "run_seconds": wall_time,
            "dot_products": result.total_dot_products,
            "iterations": result.n_iter,
            "index_queries": sum(s.index_queries for s in result.stats),
            "candidates": sum(s.candidates_total for s in result.stats),
            "index_build_seconds": sum(s.index_build_seconds for s in result.stats),
        },
        "objective": result.objective,
        "stop_reason": result.stop_reason,
        "n_docs": len(corpus),
        "dropped_ids": list(corpus.dropped),
        "cluster_sizes": np.bincount(result.assignments, minlength=config.k).tolist(),
    }


def cmd_bench(args) -> int:
    _check_threads(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    if not args.k_list or not args.modes:
        raise UsageError("--k-list and --modes must not be empty")
    kwargs = _config_kwargs(args)
    try:
        for k in args.k_list:
            engine.RunConfig(k=k, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.synthetic:
        try:
            corpus = synthetic_corpus(**parse_synthetic_spec(args.synthetic))
        except ValueError as exc:
            raise UsageError(f"--synthetic: {exc}") from None
    else:
        corpus = load_matrix(args.input)
    if max(args.k_list) > len(corpus):
        raise UsageError(f"k={max(args.k_list)} exceeds the number of documents ({len(corpus)})")
    rows = bench.run_bench(corpus.matrix, args.k_list, args.modes, args.repeats,
                           args.threads, **kwargs)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            bench.write_csv(rows, fh)
    bench.write_csv(rows, sys.stdout)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sskm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, CorpusFormatError, ValueError, RuntimeError) as exc:
        print(f"sskm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
