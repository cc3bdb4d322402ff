import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanfield_opt import (
    MATCHING,
    TSP,
    DomainError,
    PrecisionWarning,
    curve_area,
    fixed_point_g0,
    get_kernel,
    ground_state_energy,
    lambda_map,
    solve_order_parameter,
    tsp_constant_from_lambda,
    tsp_domain_length,
    tsp_finite_lambda_curve,
    verify_consistency,
)

mpmath.mp.dps = 25


def mp_tsp_W(g):
    g = mpmath.mpf(g)
    return -2 * mpmath.expm1(-g) - g * mpmath.exp(-g)


def mp_tsp_lambda(t, c):
    """Independent high-precision solve of W(t) + W(y) = c for the TSP kernel.

    Written as log R(y) = log(2 - c + W(t)) with R(y) = (2 + y) e^{-y}, which
    keeps full precision when y is large or small.
    """
    rhs = mpmath.log(2 - mpmath.mpf(c) + mp_tsp_W(t))
    hi = max(mpmath.mpf(1), -rhs + 20)
    return mpmath.findroot(lambda y: mpmath.log(2 + y) - y - rhs, (mpmath.mpf(0), hi), solver="bisect")


@pytest.fixture(scope="module")
def matching_curve():
    return solve_order_parameter(MATCHING, 1.0, 10.0, 1000)


@pytest.fixture(scope="module")
def tsp_curve():
    return solve_order_parameter(TSP, 2.0, 10.0, 1000)


class TestKernel:
    @pytest.mark.parametrize("kernel", [MATCHING, TSP])
    def test_W_is_primitive_of_T(self, kernel):
        g = np.linspace(0.05, 40.0, 400)
        h = 1e-5
        dW = (kernel.W(g + h) - kernel.W(g - h)) / (2 * h)
        assert np.max(np.abs(dW - kernel.T(g))) < 1e-8

    @pytest.mark.parametrize("kernel", [MATCHING, TSP])
    def test_shape(self, kernel):
        g = np.linspace(0.0, 30.0, 301)
        assert kernel.W(0.0) == 0.0
        assert np.all(kernel.T(g) > 0) and np.all(np.diff(kernel.T(g)) < 0)
        assert np.all(np.diff(kernel.W(g)) > 0)
        assert kernel.W(200.0) == pytest.approx(kernel.c_star)

    def test_lookup(self):
        assert get_kernel("Matching") is MATCHING
        assert get_kernel(TSP) is TSP
        with pytest.raises(DomainError):
            get_kernel("assignment")


class TestLambdaMap:
    def test_matching_log2_fixed(self):
        assert lambda_map(MATCHING, math.log(2), 1.0) == pytest.approx(math.log(2), abs=1e-14)

    def test_matching_closed_form(self):
        t = np.linspace(0.01, 30, 50)
        assert np.allclose(lambda_map(MATCHING, t, 1.0), -np.log(-np.expm1(-t)), rtol=1e-12, atol=1e-14)

    def test_tsp_symmetry_point(self):
        g0 = fixed_point_g0(TSP, 2.0)
        assert lambda_map(TSP, g0, 2.0) == pytest.approx(g0, abs=1e-12)

    def test_tsp_against_high_precision_root(self):
        y = lambda_map(TSP, 3.0, 2.0)
        assert abs(y - float(mp_tsp_lambda(3, 2))) < 1e-12

    def test_tsp_against_fine_tabulation(self):
        # independent of any root finder: invert a dense tabulation of W
        grid = np.linspace(0.0, 12.0, 2_000_001)
        target = 2.0 - TSP.W(3.0)
        y_tab = np.interp(target, TSP.W(grid), grid)
        assert abs(lambda_map(TSP, 3.0, 2.0) - y_tab) < 1e-9

    def test_singularity_at_zero(self):
        assert lambda_map(MATCHING, 0.0, 1.0) == math.inf
        assert lambda_map(TSP, 0.0, 2.0) == math.inf

    @pytest.mark.parametrize("c", [-0.1, 4.5])
    def test_c_out_of_range(self, c):
        with pytest.raises(DomainError):
            lambda_map(TSP, 1.0, c)

    def test_t_without_bracket(self):
        # W(t) > c leaves no y >= 0
        with pytest.raises(DomainError):
            lambda_map(TSP, 5.0, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.sampled_from(["matching", "tsp"]),
        st.floats(0.05, 0.999),
        st.floats(0.001, 0.999),
    )
    def test_conservation_and_involution(self, name, c_frac, t_frac):
        k = get_kernel(name)
        c = c_frac * k.c_star
        # choose t with W(t) < c
        t_max = float(np.interp(c, k.W(np.linspace(0, 60, 60001)), np.linspace(0, 60, 60001)))
        t = t_frac * t_max
        y = lambda_map(k, t, c)
        assert abs(k.W(t) + k.W(y) - c) < 1e-10
        assert abs(lambda_map(k, y, c) - t) < 1e-9 * max(1.0, t)


class TestFixedPoint:
    def test_matching(self):
        assert fixed_point_g0(MATCHING, 1.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_tsp_full(self):
        g0 = fixed_point_g0(TSP, 2.0)
        assert abs(g0 - 1.146) < 1e-3
        assert abs((2 + g0) * math.exp(-g0) - 1.0) < 1e-12

    def test_tsp_c3_satisfies_post_condition(self):
        # 2 W(g0) = 3, i.e. (2 + g0) e^{-g0} = 1/2
        g0 = fixed_point_g0(TSP, 3.0)
        assert abs(2 * TSP.W(g0) - 3.0) < 1e-12
        oracle = float(mpmath.findroot(lambda g: (2 + g) * mpmath.exp(-g) - mpmath.mpf(1) / 2, (1, 10), solver="bisect"))
        assert abs(g0 - oracle) < 1e-12

    @pytest.mark.parametrize("c", [0.0, 2.0])
    def test_range(self, c):
        with pytest.raises(DomainError):
            fixed_point_g0(MATCHING, c)


class TestOrderParameter:
    def test_matching_closed_form(self, matching_curve):
        cv = matching_curve
        assert np.max(np.abs(cv.G - np.logaddexp(0.0, cv.x))) < 1e-6
        assert cv.x[0] == pytest.approx(-10.0) and cv.x[-1] == pytest.approx(10.0)

    def test_matching_origin(self, matching_curve):
        assert matching_curve.g0 == pytest.approx(math.log(2), abs=1e-14)
        assert matching_curve(0.0) == pytest.approx(math.log(2), abs=1e-12)

    @pytest.mark.parametrize("name", ["matching", "tsp"])
    def test_invariants(self, name, matching_curve, tsp_curve):
        cv = matching_curve if name == "matching" else tsp_curve
        assert np.all(np.diff(cv.G) > 0)
        assert np.all(np.diff(cv.x) > 0)
        assert np.allclose(cv.x, -cv.x[::-1], atol=1e-12)
        assert np.max(np.abs(cv.conservation_residual())) <= 1e-8
        assert abs(2 * cv.kernel.W(cv.g0) - cv.c) < 1e-12

    def test_tsp_curve_origin(self, tsp_curve):
        assert abs(tsp_curve.g0 - 1.146) < 1e-3
        assert tsp_curve(0.0) == pytest.approx(tsp_curve.g0, abs=1e-9)

    def test_tsp_slope_matches_equation(self, tsp_curve):
        # G'(x) = T(G(-x)) on the tabulated curve, by finite differences
        cv = tsp_curve
        mid = slice(1, -1)
        dG = (cv.G[2:] - cv.G[:-2]) / (cv.x[2:] - cv.x[:-2])
        target = TSP.T(cv.G[::-1][mid])
        inner = np.abs(cv.x[mid]) < 6
        assert np.max(np.abs(dG - target)[inner]) < 1e-3

    def test_bad_arguments(self):
        with pytest.raises(DomainError):
            solve_order_parameter(MATCHING, 1.0, 10.0, 1)
        with pytest.raises(DomainError):
            solve_order_parameter(MATCHING, 1.0, -1.0, 100)
        with pytest.raises(DomainError):
            solve_order_parameter(MATCHING, 1.5, 10.0, 100)


class TestGroundState:
    def test_matching(self):
        assert abs(ground_state_energy(MATCHING) - math.pi**2 / 12) < 1e-6

    def test_tsp(self):
        assert abs(ground_state_energy(TSP) - 2.0415) < 5e-4

    def test_tsp_high_precision(self):
        # mpmath quadrature of (1/2) int Lambda with an mpmath root at each node
        f = lambda t: mp_tsp_lambda(t, 2)
        val = 0.5 * mpmath.quad(f, [0, mpmath.mpf("1e-6"), 0.1, 1, 3, 10, 30, 70])
        assert abs(ground_state_energy(TSP) - float(val)) < 1e-6

    def test_consistency(self, matching_curve, tsp_curve):
        assert verify_consistency(MATCHING, matching_curve) <= 1e-6
        assert verify_consistency(TSP, tsp_curve) <= 1e-5

    def test_truncated_curve_reports_large_residual(self):
        short = solve_order_parameter(TSP, 2.0, 1.0, 200)
        assert verify_consistency(TSP, short) > 1e-3

    def test_consistency_kernel_mismatch(self, matching_curve):
        with pytest.raises(DomainError):
            verify_consistency(TSP, matching_curve)


class TestCurveArea:
    def test_matching_full_is_twice_ground_state(self):
        assert abs(curve_area(MATCHING, 1.0) - math.pi**2 / 6) < 1e-9

    def test_empty_curve(self):
        assert curve_area(MATCHING, 0.0) == 0.0

    @pytest.mark.parametrize("q", [0.05, 0.3, 0.7])
    def test_matching_diluted_area_formula(self, q):
        oracle = mpmath.quad(lambda x: -mpmath.log(1 + q - mpmath.exp(-x)), [0, -mpmath.log(q)])
        assert abs(curve_area(MATCHING, 1 - q) - float(oracle)) < 1e-9

    def test_tsp_full(self):
        assert abs(curve_area(TSP, 2.0) - 4.0830) < 1e-3
        assert curve_area(TSP, 2.0) == pytest.approx(2 * ground_state_energy(TSP), abs=1e-12)


LAMS = [1.0, 2.0, 4.0, 8.0]


@pytest.fixture(scope="module")
def constants():
    return [tsp_constant_from_lambda(lam) for lam in LAMS]


class TestFiniteLambdaTSP:
    def test_range_and_monotone(self, constants):
        assert all(2.0 < C < 4.0 for C in constants)
        assert all(a > b for a, b in zip(constants, constants[1:]))

    def test_round_trip(self, constants):
        for lam, C in zip(LAMS, constants):
            assert abs(tsp_domain_length(C) - lam) <= 1e-8

    def test_domain_length_high_precision(self):
        # int_0^{g_max} dt / T(Lambda(t)) in mpmath at C = 2.5, W-constant c = 1.5
        e = mpmath.mpf("0.5")
        g_max = mpmath.findroot(lambda g: (2 + g) * mpmath.exp(-g) - e, (0, 20), solver="bisect")
        c = 2 - e

        def inv_slope(t):
            y = mp_tsp_lambda(t, c)
            return 1 / ((1 + y) * mpmath.exp(-y))

        val = mpmath.quad(inv_slope, [0, g_max / 2, g_max])
        assert abs(tsp_domain_length(2.5) - float(val)) < 1e-9

    def test_curve_boundary(self):
        cv = tsp_finite_lambda_curve(4.0, 401)
        assert cv.x_half_width == pytest.approx(2.0, abs=1e-9)
        assert cv.G[0] == pytest.approx(0.0, abs=1e-12)
        assert 2 < cv.tail_constant < 4
        R = TSP.tail
        assert np.max(np.abs(R(cv.G) + R(cv.G[::-1]) - cv.tail_constant)) < 1e-8

    def test_large_lambda_approaches_two(self):
        C = [tsp_constant_from_lambda(lam) - 2.0 for lam in (10.0, 20.0, 40.0)]
        assert C[0] > C[1] > C[2] > 0 and C[2] < 1e-7

    def test_underflow_warns_and_clamps(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            C = tsp_constant_from_lambda(80.0)
        assert any(issubclass(x.category, PrecisionWarning) for x in w)
        assert 2.0 < C < 2.0 + 1e-12

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf])
    def test_bad_lambda(self, lam):
        with pytest.raises(DomainError):
            tsp_constant_from_lambda(lam)

    def test_domain_length_range(self):
        with pytest.raises(DomainError):
            tsp_domain_length(4.5)
