import math

import numpy as np
import pytest

from meanfield_opt import (
    TSP,
    ContractError,
    DilutedMatchingModel,
    DomainError,
    GridDistribution,
    Mode,
    cost_from_F,
    curve_area,
    expectation,
    init_boundary,
    iterate_step,
    limit_F,
    matching_edge_cost,
    q_from_lambda,
    run_iteration,
    tsp_constant_from_lambda,
)
from meanfield_opt.recursion import _check_sandwich, suffix_integral

LAM = 3.0


@pytest.fixture(scope="module")
def min_run():
    return run_iteration("min", LAM, 2000, 200)


@pytest.fixture(scope="module")
def min2_run():
    return run_iteration("min2", LAM, 2000, 200, tol=0)


class TestBoundary:
    def test_sides(self):
        A = init_boundary("min", LAM, 16, "A")
        B = init_boundary("min", LAM, 16, "B")
        assert np.all(A.values == 0) and A.atom == 0
        assert np.all(B.values == 1) and B.atom == 1
        assert A.n_cells == 16 and len(A.x) == 17

    def test_survival_extension(self):
        A = init_boundary("min", LAM, 16, "A")
        assert A.survival(-LAM) == 1.0 and A.survival(LAM) == 0.0

    def test_errors(self):
        with pytest.raises(DomainError):
            init_boundary("min", LAM, 15, "A")
        with pytest.raises(DomainError):
            init_boundary("min", LAM, 16, "C")
        with pytest.raises(DomainError):
            init_boundary("min", -1.0, 16, "A")
        with pytest.raises(DomainError):
            init_boundary("max", LAM, 16, "A")

    def test_mode_aliases(self):
        assert Mode.parse("matching") is Mode.MIN
        assert Mode.parse("TSP") is Mode.MIN2


class TestStep:
    def test_min_from_B0(self):
        B0 = init_boundary("min", LAM, 400, "B")
        A1 = iterate_step("min", B0)
        x = A1.x
        assert np.allclose(A1.values, np.exp(-(LAM / 2 + x)), atol=1e-13)

    def test_min2_from_B0(self):
        B0 = init_boundary("min2", LAM, 400, "B")
        A1 = iterate_step("min2", B0)
        s = LAM / 2 + A1.x
        assert np.allclose(A1.values, (1 + s) * np.exp(-s), atol=1e-13)

    def test_from_A0_is_one(self):
        A0 = init_boundary("min", LAM, 64, "A")
        assert np.all(iterate_step("min", A0).values == 1.0)
        assert np.all(iterate_step("min2", A0).values == 1.0)

    def test_suffix_integral_of_linear(self):
        # trapezoid is exact for linear survival
        n = 100
        x = np.linspace(-LAM / 2, LAM / 2, n + 1)
        d = GridDistribution(LAM, 0.5 - x / LAM)
        S = suffix_integral(d)
        lower = -x
        exact = (0.5 * (LAM / 2 - lower) - (LAM**2 / 4 - lower**2) / (2 * LAM))
        assert np.allclose(S, exact, atol=1e-13)

    def test_input_contract(self):
        bad = GridDistribution(LAM, np.linspace(0, 1, 33))
        with pytest.raises(ContractError):
            iterate_step("min", bad)
        with pytest.raises(ContractError):
            iterate_step("min", GridDistribution(LAM, np.full(33, 1.5)))


class TestExpectation:
    def test_boundaries(self):
        assert expectation(init_boundary("min", LAM, 64, "B")) == pytest.approx(LAM / 2)
        assert expectation(init_boundary("min", LAM, 64, "A")) == pytest.approx(-LAM / 2)

    def test_converged_mean(self, min_run):
        q = q_from_lambda(LAM)
        assert expectation(min_run.B) == pytest.approx(q * LAM / 2, abs=1e-5)


class TestIteration:
    def test_converges_to_closed_form(self, min_run):
        A, B, tr = min_run
        assert tr.converged
        F = limit_F(DilutedMatchingModel.from_lambda(LAM), A.x)
        assert np.max(np.abs(A.values[1:] - F[1:])) <= 1e-3
        assert np.max(np.abs(B.values[1:] - F[1:])) <= 1e-3

    def test_atom(self, min_run):
        assert min_run.B.atom == pytest.approx(q_from_lambda(LAM), abs=1e-5)

    def test_symmetry(self, min_run):
        B = min_run.B
        q = q_from_lambda(LAM)
        v = B.values[1:-1]
        assert np.max(np.abs(v + v[::-1] - (1 + q))) < 1e-5

    def test_terminal_gap_bounds(self, min_run):
        tr = min_run.trace
        k = tr.k
        assert np.all(tr.terminal_gap[1:] <= LAM / k[1:] + 1e-12)
        # the stricter form lam/(k+1) also holds at lam = 3
        assert np.all(tr.terminal_gap <= LAM / (k + 1) + 1e-12)

    def test_expectation_bounds(self, min_run, min2_run):
        for run, factor in ((min_run, LAM * math.exp(LAM)), (min2_run, math.exp(LAM))):
            tr = run.trace
            assert np.all(tr.expectation_gap <= factor / (tr.k + 1) + 1e-12)
            assert tr.bounds_hold

    def test_gaps_nonincreasing(self, min_run, min2_run):
        for tr in (min_run.trace, min2_run.trace):
            assert np.all(np.diff(tr.sup_gap) <= 1e-12)
            assert np.all(np.diff(tr.expectation_gap) <= 1e-12)

    def test_k10_and_k50_examples(self, min_run, min2_run):
        assert min_run.trace.terminal_gap[10] <= 3 / 11
        assert min2_run.trace.expectation_gap[50] <= math.exp(3) / 51

    def test_small_lambda_paper_bound(self):
        tr = run_iteration("min", 1.0, 400, 40, tol=0).trace
        assert np.all(tr.terminal_gap[1:] <= 1.0 / tr.k[1:] + 1e-12)

    def test_k_max_respected(self):
        res = run_iteration("min", LAM, 200, 5)
        assert not res.trace.converged and res.trace.k[-1] == 5

    def test_refinement_order(self):
        F = lambda d: limit_F(DilutedMatchingModel.from_lambda(LAM), d.x)
        errs = []
        for n in (250, 500, 1000):
            A = run_iteration("min", LAM, n, 400, tol=1e-12).B
            errs.append(np.max(np.abs(A.values[1:] - F(A)[1:])))
        assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3

    def test_sandwich_violation_is_reported(self):
        x = np.linspace(-1, 1, 17)
        lo = GridDistribution(2.0, np.full(17, 0.2))
        hi = GridDistribution(2.0, np.full(17, 0.8))
        bad = GridDistribution(2.0, np.where(x > 0.3, 0.9, 0.5))
        with pytest.raises(ContractError, match=r"k = 7, x = 0\.375"):
            _check_sandwich(7, lo, bad, hi, hi, x)

    def test_bad_k(self):
        with pytest.raises(DomainError):
            run_iteration("min", LAM, 64, 0)


class TestCost:
    def test_matching_against_closed_form(self, min_run):
        q = q_from_lambda(LAM)
        assert abs(cost_from_F(min_run.B, "min") - matching_edge_cost(q)) < 2e-3

    def test_small_lambda(self):
        res = run_iteration("min", 1e-3, 64, 50)
        assert cost_from_F(res.B, "min") < 1e-6

    def test_unconverged_rejected(self):
        res = run_iteration("min", LAM, 200, 2)
        with pytest.raises(ContractError):
            cost_from_F(res.B, "min")

    def test_tsp_against_curve_area(self):
        res = run_iteration("min2", 4.0, 2000, 400)
        C = tsp_constant_from_lambda(4.0)
        assert abs(cost_from_F(res.B, "min2") - 0.5 * curve_area(TSP, 4 - C)) < 1e-3

    def test_tsp_fixed_point_conservation(self):
        res = run_iteration("min2", 4.0, 2000, 400)
        G = suffix_integral(res.B)
        tail = (2 + G) * np.exp(-G) + (2 + G[::-1]) * np.exp(-G[::-1])
        assert np.ptp(tail) <= 1e-4
        assert 2 < tail.mean() < 4
        assert tail.mean() == pytest.approx(tsp_constant_from_lambda(4.0), abs=1e-4)
