"""Composable core-set pipeline and empirical checks of its guarantees.

The pipeline simulates a distributed run on one machine: points are split
uniformly at random into ``m`` parts, a core-set of size ``k`` is built on
every part, and an aggregation algorithm picks the final ``k`` points from
the union of the core-sets.

Seeds are derived with :func:`derive_seed`, a pure function of the master
seed and a path of integer keys (run index, part index, trial index), so the
result never depends on how work is scheduled.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algorithms import (DEFAULT_CAP, DEFAULT_EPS, CombinatorialCapError, CoreSet,
                         brute_force_maxdet, greedy, local_search, run_algorithm)
from .geometry import (NEG_INF, OrthoBasis, PointSet, dists_to_span, rbf_kernelize,
                       sample_subspace, span_basis)

logger = logging.getLogger(__name__)

SHORT_NAMES = {"GD": "greedy", "LS": "local-search", "BF": "brute-force"}
LONG_NAMES = {v: k for k, v in SHORT_NAMES.items()}
HEIGHT_RTOL = 1e-9


def derive_seed(master_seed: int, *keys: int) -> int:
    """Splittable seed: ``SeedSequence(master_seed, spawn_key=keys)`` -> uint32."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1)[0])


def worker_count() -> int:
    """Worker threads from ``DETMAX_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("DETMAX_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


def _map(fn, items, workers=None):
    workers = worker_count() if workers is None else workers
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def parse_pair(text: str):
    """``"LS/GD"`` -> ``("local-search", "greedy")`` as (aggregation, core-set)."""
    agg, sep, cs = text.partition("/")
    if not sep:
        raise ValueError(f"expected ALG_a/ALG_c, got {text!r}")
    try:
        agg_alg, cs_alg = SHORT_NAMES[agg.strip().upper()], SHORT_NAMES[cs.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown algorithm in {text!r}; use GD, LS or BF") from None
    if cs_alg == "brute-force":
        raise ValueError("brute force is only available for aggregation")
    return agg_alg, cs_alg


@dataclass(frozen=True)
class PipelineConfig:
    k: int
    m: int = 1
    eps: float = DEFAULT_EPS
    coreset_alg: str = "greedy"
    aggregation_alg: str = "greedy"
    master_seed: int = 0
    repetitions: int = 1
    kernel: Optional[tuple] = None  # ("rbf", sigma)
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.k < 1 or self.m < 1 or self.repetitions < 1:
            raise ValueError("k, m and repetitions must all be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.coreset_alg not in ("greedy", "local-search"):
            raise ValueError(f"bad core-set algorithm {self.coreset_alg!r}")
        if self.aggregation_alg not in ("greedy", "local-search", "brute-force"):
            raise ValueError(f"bad aggregation algorithm {self.aggregation_alg!r}")
        if self.kernel is not None and (self.kernel[0] != "rbf" or not self.kernel[1] > 0):
            raise ValueError(f"bad kernel {self.kernel!r}")

    @property
    def label(self) -> str:
        return f"{LONG_NAMES[self.aggregation_alg]}/{LONG_NAMES[self.coreset_alg]}"

    def to_dict(self) -> dict:
        return {
            "k": self.k, "m": self.m, "eps": self.eps,
            "coreset_alg": self.coreset_alg, "aggregation_alg": self.aggregation_alg,
            "label": self.label, "master_seed": self.master_seed,
            "repetitions": self.repetitions,
            "kernel": None if self.kernel is None else f"{self.kernel[0]}:{self.kernel[1]!r}",
        }


@dataclass
class RunReport:
    run_index: int
    seed: int
    config: PipelineConfig
    part_sizes: list
    coresets: list  # CoreSet per part, global indices
    union: list
    final: CoreSet
    timings: dict = field(default_factory=dict)

    @property
    def union_size(self) -> int:
        return len(self.union)

    @property
    def final_log_volume(self) -> float:
        return self.final.log_volume

    @property
    def empty_parts(self) -> int:
        return sum(1 for s in self.part_sizes if s == 0)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "kind": "run",
            "label": self.config.label,
            "run_index": self.run_index,
            "seed": self.seed,
            "part_sizes": list(self.part_sizes),
            "empty_parts": self.empty_parts,
            "coresets": [list(c.indices) for c in self.coresets],
            "coreset_swap_counts": [c.swap_count for c in self.coresets],
            "union_size": self.union_size,
            "final_indices": list(self.final.indices),
            "final_log_volume": self.final.log_volume,
            "aggregation_swap_count": self.final.swap_count,
            "degenerate": self.final.degenerate,
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out


def partition(ps_or_n, m: int, seed=None) -> list:
    """Assign every index to one of ``m`` parts independently and uniformly."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    n = ps_or_n if isinstance(ps_or_n, int) else len(ps_or_n)
    labels = np.random.default_rng(seed).integers(m, size=n)
    parts = [np.flatnonzero(labels == i).tolist() for i in range(m)]
    empty = sum(1 for p in parts if not p)
    if empty:
        logger.warning("%d of %d parts are empty (n=%d)", empty, m, n)
    return parts


def _empty_coreset(alg, k, eps):
    return CoreSet((), alg, k, NEG_INF, eps=eps, degenerate=True)


def compose(ps: PointSet, parts: Sequence[Sequence[int]], coreset_alg: str, k: int,
            eps: float = DEFAULT_EPS, workers=None):
    """Core-set of every part (global indices) and their union in part order."""
    seen = set()
    for part in parts:
        for i in part:
            if i in seen:
                raise ValueError(f"index {i} appears in more than one part")
            seen.add(i)

    def build(part):
        if len(part) == 0:
            return _empty_coreset(coreset_alg, k, eps)
        return run_algorithm(coreset_alg, ps.take(part), k, eps).relabel(part)

    coresets = _map(build, parts, workers)
    union = [i for c in coresets for i in c.indices]
    return union, coresets


def aggregate(ps: PointSet, union: Sequence[int], aggregation_alg: str, k: int,
              eps: float = DEFAULT_EPS, cap: int = DEFAULT_CAP) -> CoreSet:
    """Run the aggregation algorithm on the union only."""
    if len(union) < 1:
        raise ValueError("cannot aggregate an empty union")
    union = list(union)
    return run_algorithm(aggregation_alg, ps.take(union), k, eps, cap=cap).relabel(union)


def run_once(ps: PointSet, cfg: PipelineConfig, run_index: int, workers=None) -> RunReport:
    seed = derive_seed(cfg.master_seed, run_index)
    t0 = time.perf_counter()
    parts = partition(ps, cfg.m, seed)
    t1 = time.perf_counter()
    union, coresets = compose(ps, parts, cfg.coreset_alg, cfg.k, cfg.eps, workers)
    t2 = time.perf_counter()
    final = aggregate(ps, union, cfg.aggregation_alg, cfg.k, cfg.eps, cfg.cap)
    t3 = time.perf_counter()
    return RunReport(run_index, seed, cfg, [len(p) for p in parts], coresets, union, final,
                     {"partition": t1 - t0, "coreset": t2 - t1, "aggregate": t3 - t2})


def run_pipeline(ps: PointSet, cfg: PipelineConfig, workers=None) -> list:
    """``cfg.repetitions`` independent runs; run i uses ``derive_seed(master_seed, i)``.

    Configurations that share a master seed see identical partitions, so
    their reports can be compared run by run.
    """
    if cfg.kernel is not None and not ps.is_oracle:
        ps = rbf_kernelize(ps, cfg.kernel[1])
    return [run_once(ps, cfg, i, workers) for i in range(cfg.repetitions)]


def _stats(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return {"mean": None, "std": None, "n_finite": 0}
    return {"mean": float(np.mean(finite)), "std": float(np.std(finite)),
            "n_finite": len(finite)}


def summarize(results: dict) -> dict:
    """Summary of ``{label: [RunReport, ...]}``.

    For every pair of labels (in insertion order) reports the mean improvement
    of the later one over the earlier one, both as a determinant ratio
    ``exp(2 * (logvol_b - logvol_a))`` and as a volume ratio.
    """
    labels = list(results)
    per_label = {}
    for label in labels:
        lvs = [r.final_log_volume for r in results[label]]
        per_label[label] = {"runs": len(lvs), "log_volume": _stats(lvs),
                            "mean_coreset_swaps": float(np.mean(
                                [sum(c.swap_count for c in r.coresets) for r in results[label]]))}
    comparisons = []
    for a, b in itertools.combinations(labels, 2):
        diffs = [rb.final_log_volume - ra.final_log_volume
                 for ra, rb in zip(results[a], results[b])
                 if math.isfinite(ra.final_log_volume) and math.isfinite(rb.final_log_volume)]
        comparisons.append({
            "baseline": a,
            "candidate": b,
            "runs": len(diffs),
            "mean_det_ratio": float(np.mean(np.exp(2 * np.array(diffs)))) if diffs else None,
            "mean_volume_ratio": float(np.mean(np.exp(np.array(diffs)))) if diffs else None,
            "mean_log_volume_gain": float(np.mean(diffs)) if diffs else None,
            "fraction_improved": float(np.mean([d > 0 for d in diffs])) if diffs else None,
        })
    return {"kind": "summary", "labels": per_label, "comparisons": comparisons}


# -- directional height --------------------------------------------------------

def directional_height(ps: PointSet, basis: OrthoBasis, idx=None) -> float:
    """Largest distance from the span of ``basis`` over the points ``idx``."""
    d = dists_to_span(ps, basis, idx)
    return float(d.max()) if d.size else 0.0


def height_floor(algorithm: str, k: int, eps: Optional[float] = None) -> float:
    if algorithm == "local-search":
        return 1.0 / (2 * k * (1 + (DEFAULT_EPS if eps is None else eps)))
    if algorithm == "greedy":
        return 1.0 / (2 * k * 3 ** k)
    raise ValueError(f"no height guarantee for {algorithm!r}")


@dataclass
class HeightCheckReport:
    trials: int
    skipped: int
    worst_ratio: float
    floor: float
    violations: int
    worst_random: float = 1.0
    worst_structured: float = 1.0
    algorithm: str = ""
    k: int = 0

    @property
    def violation(self) -> bool:
        return self.violations > 0

    def merge(self, other: "HeightCheckReport") -> "HeightCheckReport":
        return HeightCheckReport(
            self.trials + other.trials, self.skipped + other.skipped,
            min(self.worst_ratio, other.worst_ratio), min(self.floor, other.floor),
            self.violations + other.violations,
            min(self.worst_random, other.worst_random),
            min(self.worst_structured, other.worst_structured),
            self.algorithm or other.algorithm, max(self.k, other.k))

    def to_dict(self) -> dict:
        return {"kind": "height", "algorithm": self.algorithm, "k": self.k,
                "trials": self.trials, "skipped": self.skipped,
                "worst_ratio": self.worst_ratio, "worst_random": self.worst_random,
                "worst_structured": self.worst_structured, "floor": self.floor,
                "violations": self.violations, "violation": self.violation}


def _structured_sources(ps: PointSet, C: CoreSet, k: int, cap: int):
    sources = [list(C.indices)]
    try:
        opt, lv = brute_force_maxdet(ps, k, cap=cap)
        if lv > NEG_INF:
            sources.insert(0, opt)
    except CombinatorialCapError:
        pass  # the optimum is optional for structured trials
    return sources


def verify_directional_height(ps: PointSet, C: CoreSet, k: Optional[int] = None,
                              eps: Optional[float] = None, trials: int = 100, seed=0,
                              cap: int = 200_000) -> HeightCheckReport:
    """Compare h(C, H) with h(P, H) over random and point-spanned subspaces.

    Half of the trials use uniformly random (k-1)-dimensional subspaces; the
    rest use spans of k-1 points taken in turn from the brute-force optimum,
    from ``C`` itself and from random subsets of the input. Point-spanned
    subspaces of lower rank are padded with random directions (explicit mode)
    or skipped (oracle mode). Trials where h(P, H) vanishes are skipped.
    """
    k = C.k if k is None else k
    eps = C.eps if eps is None else eps
    floor = height_floor(C.algorithm, k, eps)
    t = k - 1
    if not ps.is_oracle and t > ps.dimension:
        raise ValueError(f"k-1={t} exceeds dimension {ps.dimension}")
    core = list(C.indices)
    norm_scale = max(1.0, float(np.sqrt(ps.sq_norms().max())))
    sources = _structured_sources(ps, C, k, cap)
    rng = np.random.default_rng(derive_seed(seed, 0))
    n_random = 0 if ps.is_oracle else trials - trials // 2
    report = HeightCheckReport(0, 0, 1.0, floor, 0, algorithm=C.algorithm, k=k)

    for trial in range(trials):
        structured = trial >= n_random
        if not structured:
            basis = sample_subspace(ps.dimension, t, derive_seed(seed, 1, trial))
        else:
            j = trial - n_random
            src = sources[j % len(sources)] if j % (len(sources) + 1) < len(sources) else None
            if src is None or len(src) < t:
                src = rng.choice(ps.n, size=min(t, ps.n), replace=False).tolist()
            else:
                combos = list(itertools.combinations(src, t))
                src = list(combos[(j // (len(sources) + 1)) % len(combos)])
            basis = span_basis(ps, src)
            if basis.size < t:
                if ps.is_oracle:
                    report.skipped += 1
                    continue
                basis = _pad_basis(basis, ps.dimension, t, rng)
        h_all = directional_height(ps, basis)
        if h_all <= 1e-12 * norm_scale:
            report.skipped += 1
            continue
        ratio = directional_height(ps, basis, core) / h_all
        report.trials += 1
        report.worst_ratio = min(report.worst_ratio, ratio)
        if structured:
            report.worst_structured = min(report.worst_structured, ratio)
        else:
            report.worst_random = min(report.worst_random, ratio)
        if ratio < floor * (1 - HEIGHT_RTOL):
            report.violations += 1
            logger.error("height floor violated: ratio %.6g < floor %.6g", ratio, floor)
    return report


def _pad_basis(basis: OrthoBasis, d: int, t: int, rng) -> OrthoBasis:
    V = basis.vectors
    while V.shape[0] < t:
        v = rng.standard_normal(d)
        for _ in range(2):
            v = v - V.T @ (V @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            V = np.vstack([V, v / nv])
    return OrthoBasis.from_vectors(V)


def verify_height_suite(algorithm: str = "local-search", instances: int = 50,
                        trials: int = 1000, n: int = 40, d=6, k=3,
                        eps: float = DEFAULT_EPS, seed=0) -> HeightCheckReport:
    """Height check over random Gaussian instances; ``trials`` split evenly.

    ``d`` and ``k`` may be ints or sequences cycled over the instances.
    """
    ds = d if isinstance(d, (list, tuple)) else [d]
    ks = k if isinstance(k, (list, tuple)) else [k]
    per = [trials // instances + (1 if i < trials % instances else 0) for i in range(instances)]
    total = None
    for i in range(instances):
        di, ki = ds[i % len(ds)], ks[i % len(ks)]
        X = np.random.default_rng(derive_seed(seed, 2, i)).standard_normal((n, di))
        ps = PointSet(X)
        C = local_search(ps, ki, eps) if algorithm == "local-search" else greedy(ps, ki)
        rep = verify_directional_height(ps, C, ki, eps, per[i], derive_seed(seed, 3, i))
        total = rep if total is None else total.merge(rep)
    return total


# -- composability ------------------------------------------------------------

@dataclass
class ComposabilityReport:
    trials: int
    worst_log_ratio: float
    log_bound: float
    violations: int
    algorithm: str
    k: int
    log_ratios: list = field(default_factory=list, repr=False)

    @property
    def worst_ratio(self) -> float:
        return math.exp(self.worst_log_ratio) if self.worst_log_ratio < 700 else math.inf

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)

    @property
    def violation(self) -> bool:
        return self.violations > 0

    def to_dict(self) -> dict:
        return {"kind": "compose", "algorithm": self.algorithm, "k": self.k,
                "trials": self.trials, "worst_det_ratio": self.worst_ratio,
                "worst_log_det_ratio": self.worst_log_ratio, "det_ratio_bound": self.bound,
                "violations": self.violations, "violation": self.violation}


def composability_log_bound(algorithm: str, k: int, eps: float = DEFAULT_EPS) -> float:
    """log of alpha^(2k), alpha being the height approximation factor."""
    return 2 * k * -math.log(height_floor(algorithm, k, eps))


def log_det_ratio(ps: PointSet, parts, algorithm: str, k: int, eps: float = DEFAULT_EPS,
                  cap: int = DEFAULT_CAP) -> float:
    """log of MAXDET_k(all points) / MAXDET_k(union of core-sets), both exact."""
    union, _ = compose(ps, parts, algorithm, k, eps, workers=1)
    _, lv_all = brute_force_maxdet(ps, k, cap=cap)
    _, lv_union = brute_force_maxdet(ps.take(union), k, cap=cap)
    if lv_all == NEG_INF:
        return 0.0
    if lv_union == NEG_INF:
        return math.inf
    return 2.0 * (lv_all - lv_union)


def verify_composability(d: int = 5, n_per_part: int = 8, m: int = 3, k: int = 2,
                         eps: float = DEFAULT_EPS, trials: int = 100, seed=0,
                         algorithm: str = "local-search", identical_parts: bool = False,
                         cap: int = DEFAULT_CAP) -> ComposabilityReport:
    """Random multi-part instances; both optima found by exhaustive search."""
    bound = composability_log_bound(algorithm, k, eps)
    report = ComposabilityReport(0, NEG_INF, bound, 0, algorithm, k)
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, 4, trial))
        if identical_parts:
            X = np.tile(rng.standard_normal((n_per_part, d)), (m, 1))
        else:
            X = rng.standard_normal((m * n_per_part, d))
        parts = [list(range(i * n_per_part, (i + 1) * n_per_part)) for i in range(m)]
        r = log_det_ratio(PointSet(X), parts, algorithm, k, eps, cap)
        report.trials += 1
        report.log_ratios.append(r)
        report.worst_log_ratio = max(report.worst_log_ratio, r)
        if r > bound + HEIGHT_RTOL * max(1.0, bound):
            report.violations += 1
            logger.error("composability bound violated: log r %.6g > %.6g", r, bound)
    return report
