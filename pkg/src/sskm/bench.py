"""Mode x k timing matrix: median wall time over repeated runs."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from sskm import engine
from sskm.corpus import synthetic_corpus

CSV_COLUMNS = ("mode", "k", "median_seconds", "iqr_seconds", "dot_products", "iterations",
               "index_build_seconds")


@dataclass
class BenchRow:
    mode: str
    k: int
    median_seconds: float
    iqr_seconds: float
    dot_products: int
    iterations: int
    index_build_seconds: float


def median_iqr(times: Sequence[float]) -> tuple[float, float]:
    q1, q3 = np.percentile(times, [25, 75])
    return statistics.median(times), float(q3 - q1)


def warm_up() -> None:
    """Compile the kernels on a toy corpus so the first timed run is not skewed."""
    tiny = synthetic_corpus(40, 60, 4, seed=0)
    for mode in engine.Mode:
        engine.run(tiny, engine.RunConfig(k=4, mode=mode, index_activation_threshold=0))


def bench_cell(X, mode, k: int, repeats: int = 5, n_threads: int = 1, **config) -> BenchRow:
    cfg = engine.RunConfig(k=k, mode=mode, **config)
    times, build = [], []
    dots = iters = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = engine.run(X, cfg, n_threads=n_threads)
        times.append(time.perf_counter() - t0)
        build.append(sum(s.index_build_seconds for s in result.stats))
        # runs are deterministic, so counts agree across repeats
        dots, iters = result.total_dot_products, result.n_iter
    med, iqr = median_iqr(times)
    return BenchRow(cfg.mode.value, k, med, iqr, dots, iters, statistics.median(build))


def run_bench(X, k_list: Iterable[int], modes: Iterable, repeats: int = 5,
              n_threads: int = 1, **config) -> list[BenchRow]:
    warm_up()
    return [bench_cell(X, mode, k, repeats, n_threads, **config)
            for k in k_list for mode in modes]


def write_csv(rows: Sequence[BenchRow], fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))


def index_advantage(rows: Sequence[BenchRow], reference: str = "baseline") -> dict[int, float]:
    """Per k, the fraction of ``reference`` dot products that ncc+index avoided."""
    by_key = {(r.mode, r.k): r for r in rows}
    out = {}
    for (mode, k), row in by_key.items():
        ref = by_key.get((reference, k))
        if mode == engine.Mode.NCC_INDEX.value and ref is not None and ref.dot_products:
            out[k] = 1.0 - row.dot_products / ref.dot_products
    return dict(sorted(out.items()))
