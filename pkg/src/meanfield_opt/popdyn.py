"""Population dynamics for valuations on the Poisson weighted infinite tree.

A population is an i.i.d. sample of root values ``f``.  One generation
rebuilds every member from a fresh root with Poisson(lam) children whose
edge lengths are uniform on ``[0, lam]`` and whose values are resampled
from the previous generation:

    f = min(lam/2, min_i (l_i - f_i))       (mode ``min``)
    f = min(lam/2, min2_i (l_i - f_i))      (mode ``min2``, second smallest)

Random streams are keyed by ``(seed, stream, generation, batch)`` so the
output is a pure function of the parameters, independent of ``threads``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .recursion import GridDistribution, Mode

__all__ = [
    "Population",
    "AlternatingRun",
    "popdyn_step",
    "run_alternating",
    "run_chain",
    "ks_distance",
    "atom_fraction",
    "default_threads",
    "BATCH_SIZE",
]

BATCH_SIZE = 1 << 16


def default_threads() -> int:
    env = os.environ.get("MEANFIELD_OPT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass(frozen=True)
class Population:
    samples: np.ndarray
    lam: float
    mode: Mode
    generation: int = 0
    seed: int | None = None
    stream: int = 0

    def __post_init__(self):
        half = 0.5 * self.lam
        s = self.samples
        if s.ndim != 1:
            raise ContractError("samples must be one-dimensional")
        if len(s) and (s.min() < -half - 1e-12 or s.max() > half + 1e-12):
            raise ContractError(f"samples must lie in [-{half}, {half}]")
        s.setflags(write=False)

    @classmethod
    def constant(cls, value: float, size: int, lam: float, mode, **kw) -> "Population":
        return cls(np.full(size, float(value)), float(lam), Mode.parse(mode), **kw)

    @property
    def size(self) -> int:
        return len(self.samples)

    def mean(self) -> float:
        return float(np.mean(self.samples))


def _rng(seed: int, stream: int, generation: int, batch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, generation, batch))
    return np.random.Generator(np.random.PCG64(ss))


def _batch(source: np.ndarray, lam: float, mode: Mode, size: int, rng: np.random.Generator) -> np.ndarray:
    half = 0.5 * lam
    # Only children with l <= lam matter: f_i >= -lam/2 means l - f_i > lam/2
    # beyond that, so they can never beat the quit value.  Truncating the
    # rate-1 Poisson process to [0, lam] is therefore exact.
    counts = rng.poisson(lam, size=size)
    total = int(counts.sum())
    lengths = rng.uniform(0.0, lam, size=total)
    values = lengths - source[rng.integers(0, len(source), size=total)]
    out = np.full(size, half)
    has = counts > 0
    if not np.any(has):
        return out
    starts = (np.cumsum(counts) - counts)[has]
    first = np.minimum.reduceat(values, starts)
    if mode is Mode.MIN:
        out[has] = np.minimum(half, first)
        return out
    # drop one copy of each segment minimum, then take the minimum again
    seg = np.repeat(np.arange(len(starts)), counts[has])
    hits = np.flatnonzero(values == first[seg])
    lead = hits[np.concatenate([[True], seg[hits][1:] != seg[hits][:-1]])]
    rest = values.copy()
    rest[lead] = np.inf
    second = np.minimum.reduceat(rest, starts)
    out[has] = np.minimum(half, second)
    return out


def popdyn_step(
    source: Population,
    seed: int,
    *,
    stream: int | None = None,
    size: int | None = None,
    threads: int | None = None,
    batch_size: int = BATCH_SIZE,
) -> Population:
    """Build generation ``source.generation + 1`` from ``source``."""
    if source.size == 0:
        raise ContractError("source population is empty")
    size = source.size if size is None else int(size)
    stream = source.stream if stream is None else stream
    threads = default_threads() if threads is None else max(1, int(threads))
    generation = source.generation + 1
    edges = list(range(0, size, batch_size)) + [size]
    jobs = [(b, edges[b + 1] - edges[b]) for b in range(len(edges) - 1)]

    def run(job):
        b, n = job
        return _batch(source.samples, source.lam, source.mode, n, _rng(seed, stream, generation, b))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return Population(np.concatenate(parts), source.lam, source.mode, generation, seed, stream)


@dataclass(frozen=True)
class AlternatingRun:
    A: Population
    B: Population

    @property
    def gap(self) -> float:
        """Estimate of ``E[f_B] - E[f_A]``."""
        return self.B.mean() - self.A.mean()

    @property
    def gap_stderr(self) -> float:
        n_a, n_b = self.A.size, self.B.size
        return float(np.sqrt(np.var(self.A.samples) / n_a + np.var(self.B.samples) / n_b))


def run_alternating(
    lam: float, mode, k: int, pop_size: int, seed: int, *, threads: int | None = None
) -> AlternatingRun:
    """Depth-``k`` populations started from the Alice- and Bob-favoured boundaries.

    ``A`` starts at ``-lam/2`` and ``B`` at ``lam/2``; each generation builds
    ``A`` from the previous ``B`` and vice versa.
    """
    mode = Mode.parse(mode)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if k < 0 or pop_size < 1:
        raise DomainError("k must be >= 0 and pop_size >= 1")
    half = 0.5 * lam
    A = Population.constant(-half, pop_size, lam, mode, seed=seed, stream=0)
    B = Population.constant(half, pop_size, lam, mode, seed=seed, stream=1)
    for _ in range(k):
        A, B = (
            popdyn_step(B, seed, stream=0, threads=threads),
            popdyn_step(A, seed, stream=1, threads=threads),
        )
    return AlternatingRun(A, B)


def run_chain(
    lam: float, mode, generations: int, pop_size: int, seed: int, *, start: str = "B",
    threads: int | None = None,
) -> Population:
    """A single population iterated ``generations`` times from one boundary.

    Started at ``lam/2`` (``start="B"``) the population after an even number
    of generations has the law of ``f_B`` at that depth, after an odd number
    the law of ``f_A``.
    """
    mode = Mode.parse(mode)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    half = 0.5 * lam
    value = {"A": -half, "B": half}.get(start.upper())
    if value is None:
        raise DomainError(f"start must be 'A' or 'B'; got {start!r}")
    pop = Population.constant(value, pop_size, lam, mode, seed=seed, stream=2)
    for _ in range(generations):
        pop = popdyn_step(pop, seed, threads=threads)
    return pop


def atom_fraction(pop: Population) -> float:
    """Fraction of samples sitting on the quit value ``lam/2``."""
    return float(np.mean(pop.samples >= 0.5 * pop.lam))


def ks_distance(pop: Population, reference: GridDistribution) -> float:
    """Sup distance between the empirical and reference survival functions.

    Taken over ``(-lam/2, lam/2]``; the right end compares the atoms, the
    left end compares ``P(f > -lam/2)``.
    """
    if not np.isclose(pop.lam, reference.lam, rtol=1e-12, atol=0.0):
        raise DomainError(f"lambda mismatch: population {pop.lam}, reference {reference.lam}")
    half = 0.5 * pop.lam
    s = np.sort(pop.samples)
    n = len(s)
    xs, vs = reference.x, reference.values
    inner = np.unique(s[(s > -half) & (s < half)])
    d = 0.0
    if len(inner):
        ref = np.interp(inner, xs, vs)
        ge = (n - np.searchsorted(s, inner, "left")) / n
        gt = (n - np.searchsorted(s, inner, "right")) / n
        d = float(max(np.max(np.abs(ge - ref)), np.max(np.abs(gt - ref))))
    d = max(d, abs(atom_fraction(pop) - reference.atom))
    d = max(d, abs(float(np.mean(s > -half)) - float(vs[0])))
    return d
