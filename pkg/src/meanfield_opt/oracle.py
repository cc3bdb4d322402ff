"""Exact solvers on small random complete graphs.

Edge lengths are uniform on ``[0, n]`` (the rescaled model in which the
optimum is of order ``n`` and the neighbourhood of a vertex looks like the
PWIT).  All solvers are exponential-time dynamic programs or exhaustive
searches; they exist to provide ground truth at small ``n``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diluted import h_matching, q_from_lambda
from .errors import CapacityError, DomainError

__all__ = [
    "WeightedCompleteGraph",
    "SolutionRecord",
    "EnsembleSummary",
    "sample_instance",
    "min_diluted_matching",
    "held_karp_tsp",
    "min_diluted_two_factor",
    "brute_force_diluted_matching",
    "brute_force_tsp",
    "ensemble_stats",
    "replica_seed",
    "MAX_MATCHING_N",
    "MAX_TSP_N",
    "MAX_TWO_FACTOR_N",
]

MAX_MATCHING_N = 22
MAX_TSP_N = 17
MAX_TWO_FACTOR_N = 7


@dataclass(frozen=True)
class WeightedCompleteGraph:
    weights: np.ndarray = field(repr=False)
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SolutionRecord:
    cost: float
    edges: list[tuple[int, int]]
    unmatched_count: int
    longest_edge: float
    solver: str


def _cost(w: np.ndarray, edges, penalty: float = 0.0, slots: int = 0) -> float:
    # correctly rounded, hence independent of the order edges were found in
    return math.fsum([float(w[a, b]) for a, b in edges] + [penalty] * slots)


def sample_instance(n: int, seed: int) -> WeightedCompleteGraph:
    """Complete graph on ``n`` vertices with i.i.d. uniform ``[0, n]`` lengths."""
    if n < 2:
        raise DomainError("n must be >= 2")
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    w[iu] = rng.uniform(0.0, n, size=len(iu[0]))
    w = w + w.T
    return WeightedCompleteGraph(w, seed)


def min_diluted_matching(graph: WeightedCompleteGraph, lam: float) -> SolutionRecord:
    """Optimal partial matching with penalty ``lam/2`` per unmatched vertex.

    Subset DP: the lowest vertex of the remaining set is either left
    unmatched or paired with another remaining vertex.  States are processed
    by lowest vertex, highest first, vectorised over the remaining subsets.
    On ties the unmatched option wins, then the lowest partner index.
    """
    n = graph.n
    if n > MAX_MATCHING_N:
        raise CapacityError(f"min_diluted_matching supports n <= {MAX_MATCHING_N}; got {n}")
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    w = graph.weights
    half = 0.5 * lam
    size = 1 << n
    dp = np.zeros(size)
    choice = np.full(size, -1, dtype=np.int8)
    for i in range(n - 1, -1, -1):
        rest = np.arange(1 << (n - 1 - i), dtype=np.int64) << (i + 1)
        masks = rest | (1 << i)
        best = half + dp[rest]
        pick = np.full(len(rest), -1, dtype=np.int8)
        for j in range(i + 1, n):
            has = (rest >> j) & 1 == 1
            cand = np.where(has, w[i, j] + dp[rest ^ (1 << j)], np.inf)
            better = cand < best
            best = np.where(better, cand, best)
            pick = np.where(better, j, pick)
        dp[masks] = best
        choice[masks] = pick
    mask = size - 1
    edges = []
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = int(choice[mask])
        if j < 0:
            mask ^= 1 << i
        else:
            edges.append((i, j))
            mask ^= (1 << i) | (1 << j)
    unmatched = n - 2 * len(edges)
    longest = max((float(w[a, b]) for a, b in edges), default=0.0)
    return SolutionRecord(_cost(w, edges, half, unmatched), sorted(edges), unmatched, longest, "matching")


def brute_force_diluted_matching(graph: WeightedCompleteGraph, lam: float) -> float:
    """Minimum over every partial matching, by recursive enumeration."""
    w = graph.weights
    half = 0.5 * lam

    def best(rem: tuple[int, ...]) -> tuple[float, tuple]:
        if not rem:
            return 0.0, ()
        i, others = rem[0], rem[1:]
        c, m = best(others)
        out = (half + c, m)
        for k, j in enumerate(others):
            c, m = best(others[:k] + others[k + 1:])
            if w[i, j] + c < out[0]:
                out = (w[i, j] + c, m + ((i, j),))
        return out

    _, edges = best(tuple(range(graph.n)))
    return _cost(w, edges, half, graph.n - 2 * len(edges))


def held_karp_tsp(graph: WeightedCompleteGraph) -> SolutionRecord:
    """Exact shortest Hamiltonian cycle by the Held-Karp subset DP."""
    n = graph.n
    if n < 3:
        raise DomainError("TSP needs n >= 3")
    if n > MAX_TSP_N:
        raise CapacityError(f"held_karp_tsp supports n <= {MAX_TSP_N}; got {n}")
    w = graph.weights
    m = n - 1  # vertex 0 is the fixed start; bit b stands for vertex b + 1
    size = 1 << m
    dp = np.full((size, m), np.inf)
    parent = np.full((size, m), -1, dtype=np.int8)
    for b in range(m):
        dp[1 << b, b] = w[0, b + 1]
    popcount = np.array([bin(s).count("1") for s in range(size)])
    inner = w[1:, 1:]
    for layer in range(2, m + 1):
        layer_masks = np.flatnonzero(popcount == layer)
        for j in range(m):
            masks = layer_masks[(layer_masks >> j) & 1 == 1]
            if not len(masks):
                continue
            prev = masks ^ (1 << j)
            cand = dp[prev] + inner[:, j][None, :]
            k = np.argmin(cand, axis=1)
            dp[masks, j] = cand[np.arange(len(masks)), k]
            parent[masks, j] = k
    full = size - 1
    closing = dp[full] + w[1:, 0]
    j = int(np.argmin(closing))
    order = []
    mask = full
    while j >= 0:
        order.append(j + 1)
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj if mask else -1
    tour = [0] + order[::-1]
    edges = [tuple(sorted((tour[i], tour[(i + 1) % n]))) for i in range(n)]
    longest = max(float(w[a, b]) for a, b in edges)
    return SolutionRecord(_cost(w, edges), sorted(edges), 0, longest, "held_karp")


def brute_force_tsp(graph: WeightedCompleteGraph) -> float:
    """Minimum over all ``(n-1)!/2`` tours."""
    w = graph.weights
    n = graph.n
    best = math.inf
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue
        tour = (0,) + perm
        edges = [(tour[i], tour[(i + 1) % n]) for i in range(n)]
        c = _cost(w, edges)
        if c < best:
            best = c
    return best


def min_diluted_two_factor(graph: WeightedCompleteGraph, lam: float) -> SolutionRecord:
    """Best edge set of maximum degree 2 under cost ``length + lam (n - |E|)``.

    Exhaustive over all ``2^(n(n-1)/2)`` edge subsets; ties go to the lowest
    subset index.
    """
    n = graph.n
    if n > MAX_TWO_FACTOR_N:
        raise CapacityError(f"min_diluted_two_factor supports n <= {MAX_TWO_FACTOR_N}; got {n}")
    if n < 2:
        raise DomainError("n must be >= 2")
    iu, ju = np.triu_indices(n, 1)
    m = len(iu)
    subsets = np.arange(1 << m, dtype=np.int64)
    length = np.zeros(len(subsets))
    size = np.zeros(len(subsets), dtype=np.int64)
    degree = np.zeros((n, len(subsets)), dtype=np.int8)
    for e in range(m):
        bit = ((subsets >> e) & 1).astype(np.int8)
        length += bit * graph.weights[iu[e], ju[e]]
        size += bit
        degree[iu[e]] += bit
        degree[ju[e]] += bit
    ok = np.all(degree <= 2, axis=0)
    cost = np.where(ok, length + lam * (n - size), np.inf)
    best = int(np.argmin(cost))
    edges = [(int(iu[e]), int(ju[e])) for e in range(m) if (best >> e) & 1]
    longest = max((float(graph.weights[a, b]) for a, b in edges), default=0.0)
    missing = 2 * n - 2 * len(edges)
    cost_value = _cost(graph.weights, edges, lam, n - len(edges))
    return SolutionRecord(cost_value, edges, missing, longest, "two_factor")


@dataclass
class EnsembleSummary:
    n: int
    lam: float
    replicas: int
    seed: int
    costs: np.ndarray
    unmatched: np.ndarray
    longest: np.ndarray
    bin_edges: np.ndarray
    participated: np.ndarray
    totals: np.ndarray

    @property
    def unmatched_fraction(self) -> float:
        return float(np.mean(self.unmatched) / self.n)

    @property
    def cost_per_vertex(self) -> float:
        return float(np.mean(self.costs) / self.n)

    @property
    def participation(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.participated / self.totals

    def h_predicted(self) -> np.ndarray:
        """Bin averages of ``h`` at the limiting ``q(lam)``."""
        q = q_from_lambda(self.lam)
        out = np.empty(len(self.bin_edges) - 1)
        for b in range(len(out)):
            xs = np.linspace(self.bin_edges[b], self.bin_edges[b + 1], 33)
            out[b] = np.trapezoid(h_matching(xs, q), xs) / (xs[-1] - xs[0])
        return out

    def longest_histogram(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.longest, bins=bins, range=(0.0, self.lam))


def replica_seed(seed: int, replica: int) -> int:
    """Integer seed of replica ``replica`` derived from the ensemble seed."""
    return int(np.random.SeedSequence(seed, spawn_key=(replica,)).generate_state(1, np.uint64)[0])


def _replica(n, lam, seed, r, bin_edges):
    g = sample_instance(n, replica_seed(seed, r))
    sol = min_diluted_matching(g, lam)
    iu, ju = np.triu_indices(n, 1)
    lengths = g.weights[iu, ju]
    used = np.zeros(g.weights.shape, dtype=bool)
    for a, b in sol.edges:
        used[a, b] = used[b, a] = True
    inside = lengths <= lam
    idx = np.clip(np.searchsorted(bin_edges, lengths[inside], "right") - 1, 0, len(bin_edges) - 2)
    tot = np.bincount(idx, minlength=len(bin_edges) - 1)
    part = np.bincount(idx, weights=used[iu, ju][inside], minlength=len(bin_edges) - 1)
    return sol, tot, part


def ensemble_stats(
    n: int, lam: float, replicas: int, seed: int, *, bins: int = 6, threads: int = 1
) -> EnsembleSummary:
    """Solve ``replicas`` seeded instances exactly and collect finite-size statistics.

    Participation frequencies are binned over edge lengths in ``[0, lam]``.
    """
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if n > MAX_MATCHING_N:
        raise CapacityError(f"ensemble_stats supports n <= {MAX_MATCHING_N}; got {n}")
    bin_edges = np.linspace(0.0, lam, bins + 1)
    job = lambda r: _replica(n, lam, seed, r, bin_edges)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(replicas)))
    else:
        results = [job(r) for r in range(replicas)]
    sols = [s for s, _, _ in results]
    return EnsembleSummary(
        n=n,
        lam=float(lam),
        replicas=replicas,
        seed=seed,
        costs=np.array([s.cost for s in sols]),
        unmatched=np.array([s.unmatched_count for s in sols]),
        longest=np.array([s.longest_edge for s in sols]),
        bin_edges=bin_edges,
        participated=np.sum([p for _, _, p in results], axis=0),
        totals=np.sum([t for _, t, _ in results], axis=0),
    )
