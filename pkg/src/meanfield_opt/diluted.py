"""Closed-form theory of the diluted (finite penalty) matching problem.

With penalty ``lambda/2`` per unmatched vertex the valuation at the root of
the PWIT has survival function

    F(x) = (1 + q) / (1 + exp((1 + q) x)),   -lambda/2 <= x <= lambda/2,

plus an atom of mass ``q`` at ``lambda/2``, where ``q = exp(-(1 + q) lambda/2)``
is also the limiting fraction of unmatched vertices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError
from .recursion import GridDistribution

__all__ = [
    "DilutedMatchingModel",
    "q_from_lambda",
    "lambda_from_q",
    "limit_F",
    "limit_F_quantile",
    "limit_distribution",
    "h_matching",
    "matching_edge_cost",
    "total_diluted_cost",
    "longest_edge_limit",
    "ALPHA_SWITCH",
]

# below |alpha - 1| the closed form for h loses digits; use the integral form
ALPHA_SWITCH = 1e-4


def q_from_lambda(lam: float) -> float:
    """Unmatched density ``q`` in (0, 1) solving ``q = exp(-(1 + q) lam / 2)``."""
    if not lam > 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be positive and finite; got {lam!r}")
    # log q + (1 + q) lam / 2 is increasing in log q; solve in log space so
    # that q keeps full relative precision when it is tiny.
    f = lambda u: u + (1.0 + math.exp(u)) * 0.5 * lam
    u = optimize.brentq(f, -lam, 0.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    return math.exp(u)


def lambda_from_q(q: float) -> float:
    """Inverse of :func:`q_from_lambda`, ``-2 log q / (1 + q)``."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1); got {q!r}")
    return -2.0 * math.log(q) / (1.0 + q)


@dataclass(frozen=True)
class DilutedMatchingModel:
    lam: float
    q: float

    @classmethod
    def from_lambda(cls, lam: float) -> "DilutedMatchingModel":
        return cls(float(lam), q_from_lambda(lam))

    @classmethod
    def from_q(cls, q: float) -> "DilutedMatchingModel":
        return cls(lambda_from_q(q), float(q))


def limit_F(model: DilutedMatchingModel, x):
    """Survival ``P(f >= x)`` of the limiting root valuation."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    half = 0.5 * model.lam
    if np.any(np.abs(x) > half * (1 + 1e-12)):
        raise DomainError(f"limit_F is defined on [-{half}, {half}]")
    a = 1.0 + model.q
    out = a / (1.0 + np.exp(a * x))
    return float(out) if scalar else out


def limit_F_quantile(model: DilutedMatchingModel, u):
    """Inverse-transform map: ``u`` uniform on (0, 1] gives a sample of the valuation.

    ``u <= q`` lands on the atom at ``lam/2``.
    """
    u = np.asarray(u, dtype=float)
    a = 1.0 + model.q
    half = 0.5 * model.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.log(a / u - 1.0) / a
    return np.where(u <= model.q, half, np.clip(x, -half, half))


def limit_distribution(model: DilutedMatchingModel, n_cells: int) -> GridDistribution:
    """The limit law tabulated on the uniform grid used by the recursion module."""
    x = np.linspace(-0.5 * model.lam, 0.5 * model.lam, n_cells + 1)
    a = 1.0 + model.q
    values = a / (1.0 + np.exp(a * x))
    values[-1] = model.q
    return GridDistribution(model.lam, values)


def _h_integral(alpha_minus_1: float, q: float) -> float:
    # direct form: atom of f1 plus int over the density of f1 at u, t = e^{(1+q)u}
    alpha = 1.0 + alpha_minus_1
    a = 1.0 + q
    upper = math.inf if q == 0.0 else 1.0 / q
    val, _ = integrate.quad(
        lambda t: t / ((1.0 + t) ** 2 * (t + alpha)), alpha * q, upper, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return q * a / (1.0 + alpha * q) + a**2 * val


def h_matching(x, q: float):
    """Probability that an edge of length ``x`` is in the optimal diluted matching.

    This is ``P(x <= f1 + f2)`` for independent valuations drawn from the
    limit law (survival :func:`limit_F` on ``[-lam/2, lam/2]`` with the atom
    ``q`` at ``lam/2``).  Both the atom term and the integration range respect
    the bounded support, so ``int_0^lam h = 1 - q`` and ``h(lam) = q^2``.

    Parameters
    ----------
    x : float or array_like
        Rescaled edge length, ``0 <= x <= lambda(q)``.
    q : float
        Unmatched density in ``[0, 1)``; ``q = 0`` is the perfect-matching limit.
    """
    if not 0.0 <= q < 1.0:
        raise DomainError(f"q must lie in [0, 1); got {q!r}")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = math.inf if q == 0.0 else lambda_from_q(q)
    if np.any(x < 0) or np.any(x > lam * (1 + 1e-12)):
        raise DomainError(f"h_matching requires 0 <= x <= lambda(q) = {lam!r}")
    a = 1.0 + q
    am1 = np.expm1(a * x)
    out = np.empty_like(x)
    small = np.abs(am1) < ALPHA_SWITCH
    for i in np.flatnonzero(small):
        out[i] = _h_integral(float(am1[i]), q)
    big = ~small
    if np.any(big):
        d = am1[big]
        alpha = 1.0 + d
        aq = 1.0 + alpha * q
        # log(alpha (1+q)^2 / (1 + alpha q)^2) with (1+q)/(1+alpha q) = 1 - q d/(1 + alpha q)
        log_ratio = np.log1p(d) + 2.0 * np.log1p(-q * d / aq)
        out[big] = q * a / aq + a**2 * (alpha / d**2 * log_ratio + (q / a - 1.0 / aq) / d)
    return float(out[0]) if scalar else out


def matching_edge_cost(q: float) -> float:
    """Per-vertex length of the optimal diluted matching, ``(1/2) int_q^1 -2 log t/(1+t) dt``."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1]; got {q!r}")
    if q == 1.0:
        return 0.0
    # t = exp(-s) removes the log singularity at t = 0
    upper = math.inf if q == 0.0 else -math.log(q)
    val, _ = integrate.quad(lambda s: s * math.exp(-s) / (1.0 + math.exp(-s)), 0.0, upper, epsabs=1e-14, epsrel=1e-13)
    return val


def total_diluted_cost(lam: float) -> float:
    """Per-vertex cost including penalties: edge cost plus ``lam q / 2``."""
    q = q_from_lambda(lam)
    return matching_edge_cost(q) + 0.5 * lam * q


def longest_edge_limit(q: float) -> float:
    """Limit in probability of the longest edge of the min partial matching missing ``qn`` vertices."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie strictly inside (0, 1); got {q!r}")
    return lambda_from_q(q)
