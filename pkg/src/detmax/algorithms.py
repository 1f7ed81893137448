"""Core-set constructors for volume maximization: greedy, local search and
exhaustive search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import NEG_INF, PointSet, _rank_deficient, chol_logdet, log_volume

DEFAULT_EPS = 1e-5
DEFAULT_CAP = 2_000_000
# distances within this absolute slack of the max count as ties
TIE_SLACK = 1e-12

ALGORITHMS = ("greedy", "local-search", "brute-force")


class CombinatorialCapError(RuntimeError):
    """Exhaustive search would enumerate more subsets than allowed."""


@dataclass(frozen=True)
class CoreSet:
    indices: tuple
    algorithm: str
    k: int
    log_volume: float
    eps: Optional[float] = None
    swap_count: int = 0
    degenerate: bool = False
    initial_log_volume: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.indices)

    def relabel(self, mapping) -> "CoreSet":
        """Same core-set with indices mapped through ``mapping`` (local -> global)."""
        mapping = np.asarray(mapping)
        return CoreSet(tuple(int(mapping[i]) for i in self.indices), self.algorithm,
                       self.k, self.log_volume, self.eps, self.swap_count,
                       self.degenerate, self.initial_log_volume, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "indices": list(self.indices),
            "algorithm": self.algorithm,
            "k": self.k,
            "eps": self.eps,
            "log_volume": self.log_volume,
            "swap_count": self.swap_count,
            "degenerate": self.degenerate,
        }


def _check_inputs(ps: PointSet, k: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if ps.n == 0:
        raise ValueError("empty point set")


def _pick(dist: np.ndarray) -> int:
    # lowest index among near-maximal entries
    best = dist.max()
    return int(np.flatnonzero(dist >= best - TIE_SLACK)[0])


def _greedy_explicit(ps: PointSet, kk: int):
    X = ps.coords
    R = X.copy()
    norms_sq = np.einsum("ij,ij->i", X, X)
    chosen, steps = [], []
    degenerate = False
    mask = np.zeros(ps.n, dtype=bool)
    for _ in range(kk):
        dist = np.sqrt(np.einsum("ij,ij->i", R, R))
        dist[mask] = -1.0
        q = _pick(dist)
        chosen.append(q)
        mask[q] = True
        steps.append(float(dist[q]))
        if _rank_deficient(dist[q] ** 2, norms_sq[q], oracle=False):
            degenerate = True
            continue
        b = R[q] / dist[q]
        for _ in range(2):
            R -= np.outer(R @ b, b)
    return chosen, steps, degenerate


def _greedy_oracle(ps: PointSet, kk: int):
    n = ps.n
    diag = ps.sq_norms()
    d2 = diag.copy()
    factors = []
    chosen, steps = [], []
    degenerate = False
    mask = np.zeros(n, dtype=bool)
    all_idx = np.arange(n)
    for _ in range(kk):
        dist = np.sqrt(np.maximum(d2, 0.0))
        dist[mask] = -1.0
        q = _pick(dist)
        chosen.append(q)
        mask[q] = True
        steps.append(float(dist[q]))
        if _rank_deficient(d2[q], diag[q], oracle=True):
            degenerate = True
            continue
        col = ps.gram_block(all_idx, [q])[:, 0]
        for f in factors:
            col = col - f * f[q]
        c = col / math.sqrt(d2[q])
        factors.append(c)
        d2 = d2 - c * c
    return chosen, steps, degenerate


def greedy(ps: PointSet, k: int) -> CoreSet:
    """Repeatedly add the point farthest from the span of the points chosen so far."""
    _check_inputs(ps, k)
    kk = min(k, ps.n)
    run = _greedy_oracle if ps.is_oracle else _greedy_explicit
    chosen, steps, degenerate = run(ps, kk)
    lv = log_volume(ps, chosen)
    degenerate = degenerate or kk < k or lv == NEG_INF
    return CoreSet(tuple(chosen), "greedy", k, lv, degenerate=degenerate,
                   initial_log_volume=lv, meta={"step_distances": steps})


def _swap_stack(G: np.ndarray, Kq: np.ndarray, dq: np.ndarray) -> np.ndarray:
    """Gram matrices of C with position j replaced by q, for every (q, j).

    ``G`` is Gram(C) (k x k), ``Kq[b, i] = <C_i, q_b>``, ``dq[b] = |q_b|^2``.
    Returns an array of shape (b, k, k, k).
    """
    b, k = Kq.shape
    M = np.broadcast_to(G, (b, k, k, k)).copy()
    j = np.arange(k)
    M[:, j, j, :] = Kq[:, None, :]
    M[:, j, :, j] = Kq[None, :, :]
    M[:, j, j, j] = dq[:, None]
    return M


def _first_improving_swap(G, KC, diag, C, cur, threshold, block_budget=2_000_000):
    k = len(C)
    outside = np.setdiff1d(np.arange(KC.shape[1]), C)
    p_order = np.argsort(C, kind="stable")
    max_block = max(1, block_budget // (k ** 3))
    start, size = 0, min(16, max_block)
    while start < outside.size:
        Q = outside[start:start + size]
        gains = 0.5 * chol_logdet(_swap_stack(G, KC[:, Q].T, diag[Q])) - cur
        gains = gains[:, p_order]
        hits = np.argwhere(gains >= threshold)
        if hits.size:
            r, c = hits[0]
            pos = int(p_order[c])
            return pos, int(Q[r]), cur + float(gains[r, c])
        start += Q.size
        size = min(size * 2, max_block)
    return None


def local_search(ps: PointSet, k: int, eps: float = DEFAULT_EPS,
                 max_swaps: Optional[int] = None) -> CoreSet:
    """Greedy start, then single swaps that grow the volume by a (1+eps) factor.

    Candidate pairs are scanned with q (outside point) ascending in the outer
    loop and p (core-set point) ascending in the inner loop; the first pair
    that qualifies is swapped and the scan restarts.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    start = greedy(ps, k)
    init_lv = start.log_volume
    if start.degenerate or len(start.indices) == ps.n:
        return CoreSet(start.indices, "local-search", k, init_lv, eps=eps,
                       degenerate=start.degenerate, initial_log_volume=init_lv)

    C = list(start.indices)
    all_idx = np.arange(ps.n)
    diag = ps.sq_norms()
    KC = ps.gram_block(C, all_idx)
    threshold = math.log1p(eps)
    cur = init_lv
    swaps = 0
    while max_swaps is None or swaps < max_swaps:
        G = KC[:, C]
        found = _first_improving_swap(G, KC, diag, C, cur, threshold)
        if found is None:
            break
        pos, q, _ = found
        C[pos] = q
        KC[pos] = ps.gram_block([q], all_idx)[0]
        cur = 0.5 * float(chol_logdet(KC[:, C]))
        swaps += 1

    lv = log_volume(ps, C)
    return CoreSet(tuple(C), "local-search", k, lv, eps=eps, swap_count=swaps,
                   initial_log_volume=init_lv)


def swap_log_gain(ps: PointSet, C: Sequence[int], p: int, q: int) -> float:
    """log VOL(C - p + q) - log VOL(C), with q taking p's position."""
    C = [int(i) for i in C]
    if p not in C:
        raise ValueError(f"{p} is not in the core-set")
    if q in C:
        raise ValueError(f"{q} is already in the core-set")
    swapped = [q if i == p else i for i in C]
    cur = log_volume(ps, C)
    new = log_volume(ps, swapped)
    if cur == NEG_INF:
        return math.inf if new > NEG_INF else 0.0
    return new - cur


def max_swap_log_gain(ps: PointSet, C: Sequence[int]):
    """Exhaustive scan of all single swaps; returns ``(gain, p, q)`` of the best."""
    best = (NEG_INF, None, None)
    inside = set(int(i) for i in C)
    for q in range(ps.n):
        if q in inside:
            continue
        for p in sorted(inside):
            g = swap_log_gain(ps, C, p, q)
            if g > best[0]:
                best = (g, p, q)
    return best


def brute_force_maxdet(ps: PointSet, k: int, cap: int = DEFAULT_CAP, chunk: int = 1 << 15):
    """Exact maximizer of log VOL over all k-subsets (lexicographic tie-break).

    Returns ``(indices, log_volume)``.
    """
    _check_inputs(ps, k)
    n = ps.n
    kk = min(k, n)
    total = math.comb(n, kk)
    if total > cap:
        raise CombinatorialCapError(f"C({n}, {kk}) = {total} subsets exceeds cap {cap}")
    if kk == 1:
        norms = ps.sq_norms()
        i = int(np.argmax(norms))
        return [i], log_volume(ps, [i])
    G = ps.gram(np.arange(n))
    best_val, best_idx = NEG_INF, list(range(kk))
    combos = itertools.combinations(range(n), kk)
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, chunk)),
                           dtype=np.intp)
        if flat.size == 0:
            break
        idx = flat.reshape(-1, kk)
        vals = chol_logdet(G[idx[:, :, None], idx[:, None, :]])
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), idx[j].tolist()
    return best_idx, 0.5 * best_val


def brute_force(ps: PointSet, k: int, cap: int = DEFAULT_CAP) -> CoreSet:
    indices, lv = brute_force_maxdet(ps, k, cap=cap)
    return CoreSet(tuple(indices), "brute-force", k, lv,
                   degenerate=lv == NEG_INF or len(indices) < k)


def run_algorithm(name: str, ps: PointSet, k: int, eps: float = DEFAULT_EPS,
                  cap: int = DEFAULT_CAP) -> CoreSet:
    if name == "greedy":
        return greedy(ps, k)
    if name == "local-search":
        return local_search(ps, k, eps)
    if name == "brute-force":
        return brute_force(ps, k, cap=cap)
    raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
