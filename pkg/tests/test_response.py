"""Best response of a single agent: closed form, generic bisection, bounds."""

import numpy as np
import pytest

from conftest import golden_section
from engine.errors import InvalidParameter, SolverDiverged
from engine.models import GameParams, InfectionModel
from engine.response import (
    ScalarSolveSettings,
    minimize_scalar_convex,
    optimal_investment,
    optimal_investments,
    p_star,
)

PARAMS = GameParams(tau_a=0.7, beta_ia=1.0, i_min=0.0, i_max=1000.0)
POWER_LAW = InfectionModel.power_law(1.5, 10.0)
# same p(a) = (1 + a)^-1.5, forced through the generic path
GENERIC = InfectionModel.custom(
    lambda a: np.power(1.0 + np.asarray(a, dtype=float), -1.5),
    lambda a: -1.5 * np.power(1.0 + np.asarray(a, dtype=float), -2.5),
    loss=10.0,
)


class TestOptimalInvestment:

    def test_zero_rate_gives_lower_bound(self):
        assert optimal_investment(0.0, POWER_LAW, PARAMS) == 0.0
        assert optimal_investment(0.0, GENERIC, PARAMS) == 0.0

    def test_reference_value(self):
        expected = 10.5 ** 0.4 - 1.0
        assert expected == pytest.approx(1.5614, abs=1e-4)
        assert optimal_investment(0.7, POWER_LAW, PARAMS) == pytest.approx(expected, abs=1e-12)

    def test_reference_value_against_golden_section(self):
        oracle = golden_section(lambda a: 0.7 * 10 * (1 + a) ** -1.5 + a, 0.0, 1000.0)
        assert optimal_investment(0.7, POWER_LAW, PARAMS) == pytest.approx(oracle, abs=1e-6)

    def test_huge_rate_gives_upper_bound(self):
        assert optimal_investment(1e12, POWER_LAW, PARAMS) == 1000.0
        assert optimal_investment(1e12, GENERIC, PARAMS) == 1000.0

    def test_negative_rate_rejected(self):
        with pytest.raises(InvalidParameter):
            optimal_investment(-0.1, POWER_LAW, PARAMS)

    @pytest.mark.parametrize("r", [0.05, 0.7, 3.0, 42.0, 800.0])
    def test_generic_path_matches_closed_form(self, r):
        assert optimal_investment(r, GENERIC, PARAMS) == pytest.approx(
            optimal_investment(r, POWER_LAW, PARAMS), abs=1e-8)

    def test_nondecreasing_in_rate(self):
        rates = np.linspace(0.0, 100.0, 201)
        investments = optimal_investments(rates, POWER_LAW, PARAMS)
        assert np.all(np.diff(investments) >= 0)

    def test_vectorised_matches_scalar(self):
        rates = np.array([0.0, 0.7, 5.0, 1e9])
        expected = [optimal_investment(r, GENERIC, PARAMS) for r in rates]
        np.testing.assert_allclose(optimal_investments(rates, GENERIC, PARAMS), expected)
        np.testing.assert_allclose(optimal_investments(rates, POWER_LAW, PARAMS), expected, atol=1e-8)

    def test_vectorised_rejects_negative_rates(self):
        with pytest.raises(InvalidParameter):
            optimal_investments(np.array([1.0, -1.0]), POWER_LAW, PARAMS)

    def test_positive_lower_bound_respected(self):
        params = GameParams(tau_a=0.7, beta_ia=1.0, i_min=5.0, i_max=1000.0)
        assert optimal_investment(0.7, POWER_LAW, params) == 5.0


class TestPStar:

    def test_zero_rate(self):
        assert p_star(0.0, POWER_LAW, PARAMS) == 1.0

    def test_reference_value(self):
        a = 10.5 ** 0.4 - 1.0
        assert p_star(0.7, POWER_LAW, PARAMS) == pytest.approx((1 + a) ** -1.5, rel=1e-12)
        assert p_star(0.7, POWER_LAW, PARAMS) == pytest.approx(0.2440, abs=1e-4)

    def test_against_numeric_minimizer(self):
        a = golden_section(lambda x: 0.7 * 10 * (1 + x) ** -1.5 + x, 0.0, 1000.0)
        assert p_star(0.7, GENERIC, PARAMS) == pytest.approx((1 + a) ** -1.5, abs=1e-7)

    def test_nonincreasing_in_rate(self):
        values = [p_star(r, POWER_LAW, PARAMS) for r in np.linspace(0, 50, 101)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestMinimizeScalarConvex:

    def test_quadratic_vertex(self):
        assert minimize_scalar_convex(lambda a: (a - 3) ** 2, lambda a: 2 * (a - 3), 0.0, 10.0) == pytest.approx(
            3.0, abs=1e-9)

    def test_boundary_clamp(self):
        assert minimize_scalar_convex(lambda a: (a - 3) ** 2, lambda a: 2 * (a - 3), 5.0, 10.0) == 5.0

    def test_reference_objective(self):
        found = minimize_scalar_convex(
            lambda a: 0.7 * 10 * (1 + a) ** -1.5 + a,
            lambda a: -0.7 * 10 * 1.5 * (1 + a) ** -2.5 + 1,
            0.0, 1000.0,
        )
        assert found == pytest.approx(10.5 ** 0.4 - 1.0, abs=1e-9)

    def test_objective_is_optional(self):
        assert minimize_scalar_convex(None, lambda a: 2 * (a - 3), 0.0, 10.0) == pytest.approx(3.0, abs=1e-9)

    def test_empty_interval_rejected(self):
        with pytest.raises(InvalidParameter):
            minimize_scalar_convex(None, lambda a: a, 1.0, 1.0)

    def test_iteration_cap(self):
        settings = ScalarSolveSettings(tolerance=1e-14, max_iterations=3)
        with pytest.raises(SolverDiverged):
            minimize_scalar_convex(None, lambda a: 2 * (a - 3.3), 0.0, 10.0, settings)


def _grid_bisection_oracle(r: float, zeta: float, params: GameParams, step: float = 1e-4) -> float:
    """Exhaustive search on a step grid, then bisection on the derivative next to the best point."""
    grid = np.arange(params.i_min, params.i_max + step / 2, step)
    best = grid[np.argmin(r * 10.0 * (1.0 + grid) ** -zeta + grid)]

    def slope(a):
        return -r * 10.0 * zeta * (1.0 + a) ** (-zeta - 1.0) + 1.0

    lo, hi = max(params.i_min, best - step), min(params.i_max, best + step)
    if slope(lo) >= 0:
        return lo
    if slope(hi) <= 0:
        return hi
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if slope(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestOracleEquivalence:

    @pytest.mark.slow
    def test_random_draws_match_grid_search(self, rng):
        params = GameParams(tau_a=0.7, beta_ia=1.0, i_min=0.0, i_max=50.0)
        for _ in range(100):
            r, zeta = float(rng.uniform(0.0, 50.0)), float(rng.uniform(1.1, 3.0))
            expected = _grid_bisection_oracle(r, zeta, params)
            assert optimal_investment(r, InfectionModel.power_law(zeta, 10.0), params) == pytest.approx(
                expected, abs=1e-6)

    def test_first_order_condition_at_interior_solutions(self, rng):
        for _ in range(100):
            r = float(rng.uniform(0.05, 100.0))
            zeta = float(rng.uniform(1.1, 3.0))
            infection = InfectionModel.power_law(zeta, 10.0)
            for model in (infection, GENERIC):
                a = optimal_investment(r, model, PARAMS)
                if PARAMS.i_min < a < PARAMS.i_max:
                    assert abs(r * model.loss * float(model.dp(a)) + 1.0) <= 1e-8
