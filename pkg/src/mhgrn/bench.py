"""Forward-cost scaling in the number of hops, for the multi-hop encoder and a
K-layer RGCN on the same random graph."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .baselines import rgcn_stack
from .encoder import EncoderConfig, ModelParams, encode
from .numkit import Rng, glorot_init
from .pathreason import count_paths
from .relgraph import random_graph

CSV_HEADER = ["model", "K", "n", "m", "deg", "wall_ns_median", "trials"]


@dataclass
class BenchRecord:
    model: str
    K: int
    n: int
    m: int
    mean_degree: float
    wall_ns: int
    trials: int

    def row(self) -> list:
        return [self.model, self.K, self.n, self.m, self.mean_degree, self.wall_ns, self.trials]


def linear_fit(xs, ys):
    """Least-squares line; returns ``(slope, intercept, r2)`` or None with fewer than 2 points."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2:
        return None
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _median_ns(fn, trials: int) -> int:
    fn()  # warm-up
    times = []
    for _ in range(trials):
        t0 = time.perf_counter_ns()
        fn()
        times.append(time.perf_counter_ns() - t0)
    return max(1, int(statistics.median(times)))


def run_bench(k_max: int, n: int, m: int, deg: float, trials: int = 5, seed: int = 13, dim: int = 32,
              d_s: int = 16):
    """Time one forward pass per K = 1..k_max for both models.

    Returns ``(records, summary)``; the summary holds the per-model linear fit
    of median wall time against K, the median-time ratio per K and the walk
    counts of the workload graph.
    """
    if k_max < 1 or n < 1 or m < 1 or deg <= 0 or trials < 3:
        raise ValueError("k_max, n, m, deg must be positive and trials >= 3")
    rng = Rng(seed)
    graph = random_graph(n, m, deg, rng)
    H = rng.uniform_array((n, dim), -1, 1)
    s = rng.uniform_array(d_s, -1, 1)
    full = ModelParams.init(d_in=dim, d=dim, d_out=dim, d_s=d_s, K=k_max, m=m, seed=seed)
    rgcn_layers = [np.stack([glorot_init(dim, dim, rng) for _ in range(m)]) for _ in range(k_max)]

    records = []
    for K in range(1, k_max + 1):
        params = replace(full, W=full.W[:K])
        config = EncoderConfig(K=K)
        wall = _median_ns(lambda: encode(graph, H, s, params, config), trials)
        records.append(BenchRecord("mhgrn", K, n, m, deg, wall, trials))
        layers = rgcn_layers[:K]
        wall = _median_ns(lambda: rgcn_stack(H, graph, layers), trials)
        records.append(BenchRecord("rgcn", K, n, m, deg, wall, trials))

    summary = {"fits": {}, "ratio_mhgrn_over_rgcn": {}}
    for model in ("mhgrn", "rgcn"):
        rows = [r for r in records if r.model == model]
        fit = linear_fit([r.K for r in rows], [r.wall_ns for r in rows])
        summary["fits"][model] = None if fit is None else {"slope_ns": fit[0], "intercept_ns": fit[1], "r2": fit[2]}
    for K in range(1, k_max + 1):
        a = next(r.wall_ns for r in records if r.model == "mhgrn" and r.K == K)
        b = next(r.wall_ns for r in records if r.model == "rgcn" and r.K == K)
        summary["ratio_mhgrn_over_rgcn"][K] = a / b
    summary["path_counts"] = count_paths(graph, k_max)
    return records, summary


def write_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(r.row())


def records_as_dicts(records) -> list:
    return [asdict(r) for r in records]
