"""Deterministic grid iteration of the partial-valuation recursions.

``A_k(x)`` and ``B_k(x)`` are the survival functions ``P(f >= x)`` of the
root value of the depth-``k`` partial valuations started in favour of Alice
and Bob.  One level of the tree maps

    A_{k+1}(x) = Phi(int_{-x}^{lam/2} B_k),    B_{k+1}(x) = Phi(int_{-x}^{lam/2} A_k),

with ``Phi(s) = exp(-s)`` for the minimum rule (matching) and
``Phi(s) = (1 + s) exp(-s)`` for the second-minimum rule (TSP).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "Mode",
    "GridDistribution",
    "IterationTrace",
    "IterationResult",
    "init_boundary",
    "iterate_step",
    "run_iteration",
    "expectation",
    "cost_from_F",
    "suffix_integral",
]

SANDWICH_TOL = 1e-12


class Mode(str, enum.Enum):
    MIN = "min"
    MIN2 = "min2"

    @classmethod
    def parse(cls, mode) -> "Mode":
        if isinstance(mode, Mode):
            return mode
        aliases = {"min": cls.MIN, "matching": cls.MIN, "min2": cls.MIN2, "tsp": cls.MIN2}
        try:
            return aliases[str(mode).lower()]
        except KeyError:
            raise DomainError(f"unknown mode {mode!r}; expected 'min' or 'min2'") from None


def _phi(mode: Mode, s: np.ndarray) -> np.ndarray:
    if mode is Mode.MIN:
        return np.exp(-s)
    return (1.0 + s) * np.exp(-s)


@dataclass(frozen=True)
class GridDistribution:
    """Survival function on the uniform grid ``x_i = -lam/2 + i lam/n_cells``.

    ``values[i] = P(f >= x_i)`` for ``i >= 1``.  At the left endpoint the
    stored value is the right limit ``P(f > -lam/2)``, so a point mass at
    ``-lam/2`` (the Alice-favoured start) integrates to zero; the survival
    itself is 1 there for every distribution.  ``values[-1]`` is the atom at
    ``lam/2``.
    """

    lam: float
    values: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.values) - 1

    @property
    def atom(self) -> float:
        return float(self.values[-1])

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-0.5 * self.lam, 0.5 * self.lam, self.n_cells + 1)

    @property
    def h(self) -> float:
        return self.lam / self.n_cells

    def survival(self, x):
        """``P(f >= x)`` by linear interpolation between grid nodes."""
        x = np.asarray(x, dtype=float)
        half = 0.5 * self.lam
        out = np.interp(x, self.x, self.values)
        out = np.where(x <= -half, 1.0, out)
        return np.where(x > half, 0.0, out)

    def check(self) -> None:
        v = self.values
        if v.ndim != 1 or len(v) < 17:
            raise ContractError("grid distribution needs at least 16 cells")
        if np.any(v < -SANDWICH_TOL) or np.any(v > 1 + SANDWICH_TOL):
            raise ContractError("survival values must lie in [0, 1]")
        if np.any(np.diff(v) > SANDWICH_TOL):
            i = int(np.argmax(np.diff(v)))
            raise ContractError(f"survival increases between x = {self.x[i]:.6g} and {self.x[i + 1]:.6g}")


def suffix_integral(dist: GridDistribution) -> np.ndarray:
    """``int_{-x_i}^{lam/2} dist`` at every node by cumulative trapezoid.

    The grid is symmetric, so ``-x_i`` is node ``n - i``.
    """
    v = dist.values
    panels = 0.5 * dist.h * (v[1:] + v[:-1])
    # S[j] = int_{x_j}^{x_n}
    S = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
    return S[::-1]


def init_boundary(mode, lam: float, n_cells: int, side: str) -> GridDistribution:
    """Depth-0 boundary condition: all mass at ``-lam/2`` (A) or at ``lam/2`` (B)."""
    Mode.parse(mode)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if n_cells < 16:
        raise DomainError("n_cells must be >= 16")
    side = side.upper()
    if side == "A":
        values = np.zeros(n_cells + 1)
    elif side == "B":
        values = np.ones(n_cells + 1)
    else:
        raise DomainError(f"side must be 'A' or 'B'; got {side!r}")
    return GridDistribution(float(lam), values)


def iterate_step(mode, dist: GridDistribution) -> GridDistribution:
    """One level of the recursion: ``x -> Phi(int_{-x}^{lam/2} dist)``."""
    mode = Mode.parse(mode)
    dist.check()
    return GridDistribution(dist.lam, _phi(mode, suffix_integral(dist)))


def expectation(dist: GridDistribution) -> float:
    """Mean of the valuation, ``-lam/2 + int survival``."""
    return -0.5 * dist.lam + float(np.trapezoid(dist.values, dx=dist.h))


def _bounds(mode: Mode, lam: float, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore"):
        terminal = np.where(k > 0, lam / np.maximum(k, 1), np.inf)
    factor = lam * math.exp(lam) if mode is Mode.MIN else math.exp(lam)
    return terminal, factor / (k + 1.0)


@dataclass
class IterationTrace:
    """Per-depth gap diagnostics of an A/B iteration.

    ``terminal_bound`` is ``lam / k`` (``k >= 1``), the bound on
    ``B_k(lam/2) - A_k(lam/2)`` for the minimum rule; ``expectation_bound``
    is ``lam e^lam / (k+1)`` (min) or ``e^lam / (k+1)`` (min2).
    """

    mode: Mode
    lam: float
    k: np.ndarray
    sup_gap: np.ndarray
    terminal_gap: np.ndarray
    expectation_gap: np.ndarray
    terminal_bound: np.ndarray
    expectation_bound: np.ndarray
    converged: bool

    @property
    def bounds_hold(self) -> bool:
        ok = bool(np.all(self.expectation_gap <= self.expectation_bound + SANDWICH_TOL))
        if self.mode is Mode.MIN:
            ok &= bool(np.all(self.terminal_gap <= self.terminal_bound + SANDWICH_TOL))
        return ok

    def rows(self):
        for row in zip(self.k, self.sup_gap, self.terminal_gap, self.expectation_gap, self.expectation_bound):
            yield (int(row[0]),) + tuple(float(v) for v in row[1:])


@dataclass
class IterationResult:
    A: GridDistribution
    B: GridDistribution
    trace: IterationTrace

    def __iter__(self):
        return iter((self.A, self.B, self.trace))


def _check_sandwich(k: int, A0, A1, B1, B0, x) -> None:
    for lower, upper, what in ((A0, A1, "A_k <= A_k+1"), (A1, B1, "A_k+1 <= B_k+1"), (B1, B0, "B_k+1 <= B_k")):
        bad = lower.values - upper.values > SANDWICH_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ContractError(f"sandwich violated ({what}) at k = {k}, x = {x[i]:.6g}")


def run_iteration(mode, lam: float, n_cells: int, k_max: int, *, tol: float = 1e-6) -> IterationResult:
    """Iterate from both boundary conditions until the terminal gap drops below ``tol``.

    Stops at depth ``k_max`` if the gap is still larger; ``trace.converged``
    records which.  Pass ``tol=0`` to always run ``k_max`` steps.
    """
    mode = Mode.parse(mode)
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    A = init_boundary(mode, lam, n_cells, "A")
    B = init_boundary(mode, lam, n_cells, "B")
    x = A.x
    sup_gap, terminal, egap = [], [], []

    def record(A, B):
        sup_gap.append(float(np.max(B.values - A.values)))
        terminal.append(B.atom - A.atom)
        egap.append(expectation(B) - expectation(A))

    record(A, B)
    converged = False
    for k in range(k_max):
        A_next, B_next = iterate_step(mode, B), iterate_step(mode, A)
        _check_sandwich(k, A, A_next, B_next, B, x)
        A, B = A_next, B_next
        record(A, B)
        if terminal[-1] < tol:
            converged = True
            break
    ks = np.arange(len(sup_gap))
    tb, eb = _bounds(mode, float(lam), ks)
    trace = IterationTrace(
        mode, float(lam), ks, np.array(sup_gap), np.array(terminal), np.array(egap), tb, eb, converged
    )
    return IterationResult(A, B, trace)


def cost_from_F(dist: GridDistribution, mode, *, fixed_point_tol: float = 1e-4) -> float:
    """Per-vertex edge cost ``(1/2) int F(u) G(u) du`` with ``G(u) = int_{-u}^{lam/2} F``.

    ``dist`` must be a fixed point of :func:`iterate_step` for ``mode`` to
    within ``fixed_point_tol`` in sup norm.
    """
    mode = Mode.parse(mode)
    image = iterate_step(mode, dist)
    resid = float(np.max(np.abs(image.values[1:] - dist.values[1:])))
    if resid > fixed_point_tol:
        raise ContractError(f"distribution is not a converged fixed point (residual {resid:.3e})")
    G = suffix_integral(dist)
    return 0.5 * float(np.trapezoid(dist.values * G, dx=dist.h))
