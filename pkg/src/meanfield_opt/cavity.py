"""Order-parameter equations for random-link matching and TSP.

Both problems reduce to ``G'(x) = T(G(-x))`` for a kernel ``T``.  With ``W``
the primitive of ``T`` vanishing at zero, ``W(G(x)) + W(G(-x))`` is constant
along any solution, so ``G(-x) = Lambda(G(x))`` where ``Lambda`` solves
``W(t) + W(y) = c``.  This turns the integral equation into the first order
ODE ``G'(x) = T(Lambda(G(x)))``, integrated here by quadrature in ``G``.

Conventions
-----------
``c`` is always the *W-constant*, ``W(G(x)) + W(G(-x)) = c``.  The full
problem has ``c = c_star = W(inf)``.  Writing ``R = c_star - W`` for the
kernel's tail function, the same relation reads ``R(G(x)) + R(G(-x)) =
2 c_star - c``; for the TSP kernel ``R(g) = (2 + g) exp(-g)`` and this tail
sum is the constant ``C`` of the finite-penalty problem, ``C = 4 - c``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NumericError, PrecisionWarning

__all__ = [
    "Kernel",
    "MATCHING",
    "TSP",
    "get_kernel",
    "OrderParameterCurve",
    "lambda_map",
    "fixed_point_g0",
    "solve_order_parameter",
    "ground_state_energy",
    "verify_consistency",
    "curve_area",
    "tsp_constant_from_lambda",
    "tsp_domain_length",
    "tsp_finite_lambda_curve",
]

LOG2 = math.log(2.0)

# quadrature / root-finding defaults
QUAD_EPS = 1e-13
TAIL_CUTOFF = 1e-12
ROOT_XTOL = 1e-13


def _matching_inverse_tail(s):
    return -np.log(s)


def _tsp_inverse_tail(s):
    # Solve (2 + y) exp(-y) = s, i.e. phi(y) = y - log(2 + y) = -log(s).
    # phi is increasing and convex on y >= 0 with phi' >= 1/2, so Newton
    # started right of the root decreases monotonically onto it.
    target = -np.log(s)
    lo = np.maximum(target + LOG2, 0.0)
    y = lo + 2.0 * (target - (lo - np.log(2.0 + lo)))
    for _ in range(100):
        step = (y - np.log(2.0 + y) - target) / (1.0 - 1.0 / (2.0 + y))
        y_new = np.maximum(y - step, lo)
        if np.all(y - y_new <= 2e-15 * np.maximum(1.0, y)):
            return y_new
        y = y_new
    raise NumericError("TSP tail inversion did not converge")


@dataclass(frozen=True)
class Kernel:
    """A problem family, packaged as ``T``, its primitive ``W`` and ``W(inf)``.

    ``tail(g) = c_star - W(g)`` and its inverse are carried along because
    they keep full relative precision where ``W`` itself saturates.
    """

    name: str
    T: Callable[[np.ndarray], np.ndarray]
    W: Callable[[np.ndarray], np.ndarray]
    c_star: float
    tail: Callable[[np.ndarray], np.ndarray]
    inverse_tail: Callable[[np.ndarray], np.ndarray]

    def __repr__(self) -> str:
        return f"Kernel({self.name!r})"


MATCHING = Kernel(
    name="matching",
    T=lambda g: np.exp(-np.asarray(g, dtype=float)),
    W=lambda g: -np.expm1(-np.asarray(g, dtype=float)),
    c_star=1.0,
    tail=lambda g: np.exp(-np.asarray(g, dtype=float)),
    inverse_tail=_matching_inverse_tail,
)

TSP = Kernel(
    name="tsp",
    T=lambda g: (1.0 + np.asarray(g, dtype=float)) * np.exp(-np.asarray(g, dtype=float)),
    W=lambda g: (-2.0 * np.expm1(-np.asarray(g, dtype=float))
                 - np.asarray(g, dtype=float) * np.exp(-np.asarray(g, dtype=float))),
    c_star=2.0,
    tail=lambda g: (2.0 + np.asarray(g, dtype=float)) * np.exp(-np.asarray(g, dtype=float)),
    inverse_tail=_tsp_inverse_tail,
)

_KERNELS = {"matching": MATCHING, "tsp": TSP}


def get_kernel(name: str | Kernel) -> Kernel:
    if isinstance(name, Kernel):
        return name
    try:
        return _KERNELS[name.lower()]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; expected one of {sorted(_KERNELS)}") from None


def _as_output(y, scalar):
    return float(y) if scalar else y


def _lambda_map_excess(kernel: Kernel, t, excess: float, c: float):
    """``Lambda`` parameterised by ``excess = c_star - c``.

    Passing the excess directly keeps precision when ``c`` is within a few
    ulps of ``c_star`` (large penalty parameters).
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("lambda_map requires t >= 0")
    wt = kernel.W(t)
    if np.any(wt > c + 1e-12 * max(c, 1.0)):
        raise DomainError(f"lambda_map requires W(t) <= c = {c!r}; got W(t) = {np.max(wt)!r}")
    s = excess + wt
    if np.any(s <= 0.0):
        bad = s <= 0.0
        if excess == 0.0 and np.all(t[bad] == 0.0):
            y = np.empty_like(t)
            y[bad] = np.inf
            good = ~bad
            y[good] = kernel.inverse_tail(np.minimum(s[good], kernel.c_star))
            return _as_output(y, scalar)
        raise DomainError(
            f"lambda_map requires W(t) >= c - c_star = {-excess!r}; no bracketing interval exists"
        )
    y = kernel.inverse_tail(np.minimum(s, kernel.c_star))
    return _as_output(y, scalar)


def _check_c(kernel: Kernel, c: float, upper: float) -> None:
    if not (0.0 < c <= upper) or math.isnan(c):
        raise DomainError(f"constant c = {c!r} outside (0, {upper!r}] for kernel {kernel.name}")


def lambda_map(kernel: Kernel, t, c: float):
    """Return ``y >= 0`` with ``W(t) + W(y) = c``.

    Works elementwise on arrays.  ``t = 0`` with ``c = c_star`` maps to
    ``inf`` (the logarithmic singularity of the full-problem curve).

    Raises
    ------
    DomainError
        If ``c`` is outside ``(0, 2 c_star]`` or no ``y >= 0`` exists.
    """
    kernel = get_kernel(kernel)
    _check_c(kernel, c, 2.0 * kernel.c_star)
    return _lambda_map_excess(kernel, t, kernel.c_star - c, c)


def fixed_point_g0(kernel: Kernel, c: float) -> float:
    """Value ``G(0)``, the symmetric point with ``2 W(g0) = c``."""
    kernel = get_kernel(kernel)
    if not (0.0 < c < 2.0 * kernel.c_star):
        raise DomainError(f"fixed_point_g0 requires 0 < c < {2 * kernel.c_star}; got {c!r}")
    return float(kernel.inverse_tail(np.float64(kernel.c_star - 0.5 * c)))


def _w_inverse(kernel: Kernel, w: float, excess: float | None = None) -> float:
    """Smallest ``g`` with ``W(g) = w``; ``excess`` overrides ``c_star - w``."""
    s = kernel.c_star - w if excess is None else excess
    if s <= 0.0:
        return math.inf
    return float(kernel.inverse_tail(np.float64(min(s, kernel.c_star))))


@dataclass(frozen=True)
class OrderParameterCurve:
    """Tabulated solution ``G`` of the ODE-reduced order-parameter equation.

    ``x`` is symmetric about zero and ascending.  Points with ``x >= 0`` are
    uniform in ``G``; the ``x < 0`` half is their image under ``Lambda``.
    """

    kernel: Kernel
    c: float
    g0: float
    x: np.ndarray
    G: np.ndarray
    g_max: float
    x_half_width: float

    @property
    def tail_constant(self) -> float:
        """``R(G(x)) + R(G(-x))``; the constant ``C`` for the TSP kernel."""
        return 2.0 * self.kernel.c_star - self.c

    @property
    def n_positive(self) -> int:
        return (len(self.x) + 1) // 2

    def positive_branch(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(x, G(x), G(-x))`` for the ``x >= 0`` half."""
        m = len(self.x) // 2
        return self.x[m:], self.G[m:], self.G[m::-1]

    def conservation_residual(self) -> np.ndarray:
        """``W(G(x)) + W(G(-x)) - c`` at every tabulated point."""
        W = self.kernel.W
        return W(self.G) + W(self.G[::-1]) - self.c

    def __call__(self, x):
        return np.interp(x, self.x, self.G)


def _inv_slope(kernel: Kernel, excess: float, c: float):
    def f(t):
        return 1.0 / kernel.T(_lambda_map_excess(kernel, t, excess, c))

    return f


_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


def _panel_integrals(f, edges: np.ndarray, rule) -> np.ndarray:
    nodes, weights = rule
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    return half * (vals @ weights)


def _cumulative_x(f, g: np.ndarray, tol: float) -> np.ndarray:
    hi = _panel_integrals(f, g, _GL_HI)
    lo = _panel_integrals(f, g, _GL_LO)
    worst = float(np.max(np.abs(hi - lo))) if len(hi) else 0.0
    if worst > tol:
        raise NumericError(f"panel quadrature did not converge; worst panel residual {worst:.3e}")
    return np.concatenate([[0.0], np.cumsum(hi)])


def _quad(f, a: float, b: float, what: str) -> float:
    val, err = integrate.quad(f, a, b, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=400)
    if not np.isfinite(val) or err > 1e-9:
        raise NumericError(f"quadrature for {what} failed; error estimate {err:.3e}")
    return val


def solve_order_parameter(
    kernel: Kernel,
    c: float,
    x_limit: float,
    n_points: int,
    *,
    tol: float = 1e-10,
) -> OrderParameterCurve:
    """Tabulate ``G`` on ``[-x_limit, x_limit]`` from ``x = int dt / T(Lambda(t))``.

    ``n_points`` samples are placed uniformly in ``G`` on the ``x >= 0``
    half; the curve has ``2 n_points - 1`` points in all.  For ``c < c_star``
    the solution only exists on ``|x| <= x_half_width`` and ``x_limit`` is
    clipped to that half-width.
    """
    kernel = get_kernel(kernel)
    return _solve(kernel, c, kernel.c_star - c, x_limit, n_points, tol)


def _solve(kernel, c, excess, x_limit, n_points, tol) -> OrderParameterCurve:
    _check_c(kernel, c, kernel.c_star)
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    if not x_limit > 0:
        raise DomainError("x_limit must be > 0")
    g0 = float(kernel.inverse_tail(np.float64(excess + 0.5 * c)))
    f = _inv_slope(kernel, excess, c)
    g_end = _w_inverse(kernel, c, excess=excess)
    half_width = math.inf
    if math.isfinite(g_end):
        half_width = _quad(f, g0, g_end, "half-width")
    if x_limit >= half_width:
        g_top = g_end
    else:
        hi = g0 + x_limit + 1.0
        if math.isfinite(g_end):
            hi = g_end
        else:
            # x(g) <= g - g0 since T(Lambda) <= 1
            while _quad(f, g0, hi, "domain length") < x_limit:
                hi += x_limit + 1.0
        g_top = optimize.brentq(
            lambda g: _quad(f, g0, g, "domain length") - x_limit, g0, hi, xtol=ROOT_XTOL
        )
    g_pos = np.linspace(g0, g_top, n_points)
    x_pos = _cumulative_x(f, g_pos, tol)
    g_neg = _lambda_map_excess(kernel, g_pos, excess, c)
    if math.isfinite(g_end) and g_top == g_end:
        g_neg[-1] = 0.0
    x = np.concatenate([-x_pos[:0:-1], x_pos])
    G = np.concatenate([g_neg[:0:-1], g_pos])
    curve = OrderParameterCurve(kernel, c, g0, x, G, float(g_top), half_width)
    res = float(np.max(np.abs(curve.conservation_residual())))
    if res > 1e-8:
        raise NumericError(f"W-conservation residual {res:.3e} exceeds 1e-8")
    return curve


def _lambda_integral(kernel: Kernel, excess: float, c: float) -> float:
    """``int_0^{x_max} Lambda(t) dt`` with ``Lambda(x_max) = 0``."""
    x_max = _w_inverse(kernel, c, excess=excess)

    def L(t):
        return _lambda_map_excess(kernel, t, excess, c)

    split = min(1.0, x_max)
    # t = exp(-s) on (0, split]; Lambda(t) ~ log(1/t) near 0 when excess = 0
    s0 = -math.log(split)
    if excess > 0.0:
        s_cut = s0 + max(1.0, math.log(max(float(L(np.float64(0.0))), 1.0) / TAIL_CUTOFF))
    else:
        s_cut = s0 + 1.0
        while math.exp(-s_cut) * s_cut >= TAIL_CUTOFF:
            s_cut += 1.0
    head = _quad(lambda s: float(L(np.float64(math.exp(-s)))) * math.exp(-s), s0, s_cut, "area near 0")
    if x_max <= 1.0:
        return head
    # truncate where Lambda(t) < TAIL_CUTOFF
    t_cut = x_max
    if not math.isfinite(x_max):
        t_cut = _w_inverse(kernel, c - float(kernel.W(np.float64(TAIL_CUTOFF))))
    body = _quad(lambda t: float(L(np.float64(t))), 1.0, t_cut, "area")
    return head + body


def curve_area(kernel: Kernel, c: float) -> float:
    """Area under the curve ``W(x) + W(y) = c`` in the positive quadrant.

    For matching with ``c = 1 - q`` this is ``int_0^{-log q} -log(1 + q - e^-x) dx``.
    """
    kernel = get_kernel(kernel)
    if c == 0.0:
        return 0.0
    _check_c(kernel, c, kernel.c_star)
    return _lambda_integral(kernel, kernel.c_star - c, c)


def ground_state_energy(kernel: Kernel) -> float:
    """Limit optimum per vertex, ``(1/2) int_0^inf Lambda(t) dt`` at ``c = c_star``."""
    kernel = get_kernel(kernel)
    return 0.5 * _lambda_integral(kernel, 0.0, kernel.c_star)


def _tail_integrals(kernel: Kernel, g_top: float) -> tuple[float, float]:
    # Beyond the tabulated range G(x) ~ G(X) + (x - X) for x > X, with
    # relative corrections of order G(-X); both tails follow from that.
    T = kernel.T
    upper = 60.0 + g_top
    pos = _quad(lambda s: float((g_top + s) * T(g_top + s)), 0.0, upper, "positive tail")
    neg = _quad(lambda s: float(s * T(g_top + s)), 0.0, upper, "negative tail")
    return pos, neg


def verify_consistency(kernel: Kernel, curve: OrderParameterCurve) -> float:
    """Gap between the two ground-state formulas evaluated on ``curve``.

    One side is ``(1/2) int G T(G) dx`` over the tabulated curve, integrated
    in ``G`` using ``dx = dG / T(G(-x))`` and closed off with leading-order
    asymptotic tails beyond ``|x| > x_limit``.  The other is
    :func:`ground_state_energy`.  A curve cut off too early yields a large
    residual rather than an error.
    """
    kernel = get_kernel(kernel)
    if curve.kernel.name != kernel.name:
        raise DomainError("curve was solved for a different kernel")
    if curve.c != kernel.c_star:
        raise DomainError("consistency is defined for the full problem only (c = c_star)")
    _, g, y = curve.positive_branch()
    T = kernel.T
    right = integrate.simpson(g * T(g) / T(y), x=g)
    left = integrate.simpson(y, x=g)
    pos_tail, neg_tail = _tail_integrals(kernel, float(g[-1]))
    energy = 0.5 * (right + left + pos_tail + neg_tail)
    return abs(energy - ground_state_energy(kernel))


# ---------------------------------------------------------------------------
# finite-penalty TSP


def tsp_domain_length(C: float, *, excess: float | None = None) -> float:
    """Domain length ``int_0^{g_max} dt / T(Lambda(t))`` for tail constant ``C``.

    ``excess = C - 2`` may be passed directly when ``C`` is within rounding
    of 2.
    """
    e = C - 2.0 if excess is None else excess
    if not 0.0 < e < 2.0:
        raise DomainError(f"tail constant must lie in (2, 4); got C - 2 = {e!r}")
    c = 2.0 - e
    g_max = float(TSP.inverse_tail(np.float64(e)))
    return _quad(_inv_slope(TSP, e, c), 0.0, g_max, "TSP domain length")


def _tsp_excess_from_lambda(lam: float) -> float:
    if not lam > 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be positive and finite; got {lam!r}")

    def f(log_e):
        return tsp_domain_length(2.0, excess=math.exp(log_e)) - lam

    hi = math.log(2.0) - 1e-12
    lo = -lam - 2.0
    while f(lo) < 0.0:
        lo -= lam + 2.0
        if lo < -700.0:
            raise NumericError(f"C - 2 underflows for lambda = {lam!r}")
    log_e = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=400)
    return math.exp(log_e)


def tsp_constant_from_lambda(lam: float) -> float:
    """Tail constant ``C`` in (2, 4) whose finite TSP curve spans length ``lam``.

    ``C`` decreases to 2 as ``lam`` grows.  If ``C - 2`` drops below float
    resolution the result is clamped just above 2 and a
    :class:`PrecisionWarning` is issued.
    """
    try:
        e = _tsp_excess_from_lambda(lam)
    except NumericError:
        e = 0.0
    C = 2.0 + e
    if C <= 2.0 or e < 8.0 * np.finfo(float).eps:
        warnings.warn(
            f"C - 2 = {e:.3e} is below float resolution at lambda = {lam}; result clamped",
            PrecisionWarning,
            stacklevel=2,
        )
        C = max(C, float(np.nextafter(2.0, 4.0)))
    return C


def tsp_finite_lambda_curve(lam: float, n_points: int = 1001) -> OrderParameterCurve:
    """Finite-penalty TSP order parameter on ``[-lam/2, lam/2]``."""
    e = _tsp_excess_from_lambda(lam)
    return _solve(TSP, 2.0 - e, e, math.inf, n_points, 1e-10)
