"""
Social optimum and the internalization of externalities

The social cost is minimized by the NE of a modified game in which every
agent perceives vartheta(rho) = g+(rho) + g+'(rho) * rho instead of g+(rho).
"""

import itertools
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from logzero import logger
from scipy.optimize import minimize_scalar

from .equilibrium import (
    FixedPointSettings,
    agent_costs,
    neighbor_vulnerability,
    solve_fixed_point,
    solve_ne,
    _as_profile,
    _check_degree,
)
from .errors import BudgetExceeded, InvalidParameter, VarthetaNotMonotone
from .models import (
    DERIVATIVE_FLOOR,
    EXPOSURE_CHECK_POINTS,
    POWER,
    ArrayLike,
    EquilibriumResult,
    ExposureModel,
    IdsGame,
    PopulationVector,
    StrategyProfile,
    avg_degree,
    check_dimensions,
    normalize,
    weighted_fraction,
)

KKT_BOUND_TOLERANCE = 1e-9
DEFAULT_BRUTE_FORCE_BUDGET = 2_000_000
COORDINATE_TOLERANCE = 1e-6
MAX_COORDINATE_SWEEPS = 1000
_GRID_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class KktReport:
    """
    First-order conditions of min social cost over [i_min, i_max]^D_max.

    ``stationarity`` is the raw gradient s_d ((tau_A + d vartheta) L p'(a_d) + 1).
    ``residuals`` keep only the part no bound multiplier can absorb: the full
    gradient for interior coordinates, its negative part at the lower bound
    and its positive part at the upper bound. Multipliers are normalized by s_d.
    """

    stationarity: np.ndarray
    residuals: np.ndarray
    active_lower: np.ndarray
    active_upper: np.ndarray
    lambdas: np.ndarray
    mus: np.ndarray

    @property
    def max_violation(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def is_kkt_point(self, tolerance: float = 1e-6) -> bool:
        return self.max_violation <= tolerance


@dataclass(frozen=True, eq=False)
class PenaltySchedule:
    """Per-degree penalty that turns the selfish NE into the social optimum."""

    penalties: np.ndarray
    indirect_losses: np.ndarray
    rho: float
    profile: StrategyProfile

    @property
    def ratios(self) -> np.ndarray:
        """penalty / indirect loss per degree (b for every degree under a power g+)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.indirect_losses > 0, self.penalties / self.indirect_losses, np.nan)

    def to_dict(self) -> Dict:
        return {
            "rho": self.rho,
            "investments": [float(x) for x in self.profile.investments],
            "penalties": [float(x) for x in self.penalties],
            "indirect_losses": [float(x) for x in self.indirect_losses],
        }


def vartheta(z: ArrayLike, exposure: ExposureModel) -> ArrayLike:
    """
    vartheta(z) = g+(z) + g+'(z) * z, the exposure perceived in the modified game.

    For g+(z) = a z^b this is exactly (1 + b) g+(z).
    """
    if exposure.kind == POWER:
        return (1.0 + exposure.b) * exposure.gplus(z)
    z = np.asarray(z, dtype=float)
    # z * g+'(z) -> 0 at z = 0; the derivative is floored there
    marginal = np.where(z > 0, exposure.dgplus(z) * z, 0.0)
    return exposure.gplus(z) + marginal


def is_vartheta_increasing(exposure: ExposureModel, z_max: float = 1.0) -> bool:
    """True iff vartheta is strictly increasing on a 1000-point grid over (0, z_max]."""
    if not z_max > 0:
        raise InvalidParameter(f"z_max must be positive, got {z_max}")
    grid = np.linspace(z_max / EXPOSURE_CHECK_POINTS, z_max, EXPOSURE_CHECK_POINTS)
    values = np.asarray(vartheta(grid, exposure), dtype=float)
    return bool(np.all(np.isfinite(values)) and np.all(np.diff(values) > 0))


def _check_modified_game(game: IdsGame) -> None:
    if game.exposure.is_decoupled:
        # separable social cost: the modified game is the original one
        return
    if not is_vartheta_increasing(game.exposure):
        raise VarthetaNotMonotone(
            "vartheta is not strictly increasing on (0, 1]; the modified NE is not "
            "certified as the social optimum, use brute_force_minimizer instead"
        )


def social_cost(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> float:
    """
    Mass-weighted sum of agent costs.

    Raises:
        DimensionMismatch: profile and census lengths differ
    """
    s = normalize(s)
    a = _as_profile(a)
    check_dimensions(a, s)
    return float(np.dot(s.masses, agent_costs(a, s, game)))


def modified_cost(a: StrategyProfile, d: int, s: PopulationVector, game: IdsGame) -> float:
    """
    Cost of a degree-d agent in the modified game:
    (tau_A + d vartheta(rho(a; s))) L p(a_d) + a_d.
    """
    s = normalize(s)
    _check_degree(d, s)
    a = _as_profile(a)
    rho = neighbor_vulnerability(a, s, game.infection)
    a_d = a.investments[int(d) - 1]
    attacks = game.params.tau_a + d * float(vartheta(rho, game.exposure))
    return float(attacks * game.infection.expected_loss(a_d) + a_d)


def social_cost_gradient(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> np.ndarray:
    """dSC/da_d = s_d ((tau_A + d vartheta(rho)) L p'(a_d) + 1)."""
    s = normalize(s)
    a = _as_profile(a)
    rho = neighbor_vulnerability(a, s, game.infection)
    attacks = game.params.tau_a + s.degrees * float(vartheta(rho, game.exposure))
    return s.masses * (attacks * game.infection.loss * game.infection.dp(a.investments) + 1.0)


def solve_social_optimum(
    s: PopulationVector,
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> EquilibriumResult:
    """
    Unique global minimizer of social cost, computed as the NE of the
    modified game.

    Reported exposure, costs and social cost are those of the original game
    evaluated at the optimal profile.

    Raises:
        VarthetaNotMonotone: vartheta not strictly increasing
    """
    game.validate()
    _check_modified_game(game)

    def modified_exposure(rho: float) -> float:
        return float(vartheta(rho, game.exposure))

    return solve_fixed_point(s, game, modified_exposure, settings, game_kind="modified")


def brute_force_minimizer(
    s: PopulationVector,
    game: IdsGame,
    grid_step: float,
    budget: int = DEFAULT_BRUTE_FORCE_BUDGET,
) -> StrategyProfile:
    """
    Exhaustive grid search of social cost over [i_min, i_max]^D_max,
    refined by coordinate descent until no coordinate moves by more than 1e-6.

    Independent of the modified-game route; meant for D_max <= 4. Ties on
    the grid go to the lexicographically smallest profile.

    Raises:
        InvalidParameter: grid_step not positive
        BudgetExceeded: grid has more than ``budget`` points
    """
    if not grid_step > 0:
        raise InvalidParameter(f"grid_step must be positive, got {grid_step}")
    s = normalize(s)
    params = game.params
    n_points = int(np.floor((params.i_max - params.i_min) / grid_step + 1e-9)) + 1
    grid = np.minimum(params.i_min + grid_step * np.arange(n_points), params.i_max)
    if grid[-1] < params.i_max:
        grid = np.append(grid, params.i_max)
    total = len(grid) ** s.d_max
    if total > budget:
        raise BudgetExceeded(f"grid of {len(grid)}^{s.d_max} = {total} points exceeds budget {budget}")

    probs = np.asarray(game.infection.p(grid), dtype=float)
    weights = weighted_fraction(s)
    best_cost, best_index = np.inf, None
    index_iter = itertools.product(range(len(grid)), repeat=s.d_max)
    while True:
        chunk = np.array(list(itertools.islice(index_iter, _GRID_CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, s.d_max)
        p = probs[chunk]
        rho = p @ weights
        exposure = np.asarray(game.exposure.gplus(rho), dtype=float).reshape(-1, 1)
        attacks = params.tau_a + exposure * s.degrees
        costs = (attacks * game.infection.loss * p + grid[chunk]) @ s.masses
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost, best_index = float(costs[k]), chunk[k]

    investments = grid[best_index].astype(float)
    logger.debug(f"Brute-force grid ({total} points) best cost {best_cost:.10g} at {investments}")
    return StrategyProfile(_coordinate_descent(investments, s, game, grid_step))


def _coordinate_descent(investments: np.ndarray, s: PopulationVector, game: IdsGame,
                        radius: float) -> np.ndarray:
    params = game.params
    investments = investments.copy()
    for sweep in range(1, MAX_COORDINATE_SWEEPS + 1):
        largest_move = 0.0
        for d in range(s.d_max):
            if s.masses[d] == 0:
                continue

            def cost_along(x: float, d: int = d) -> float:
                trial = investments.copy()
                trial[d] = x
                return social_cost(StrategyProfile(trial), s, game)

            lo = max(params.i_min, investments[d] - radius)
            hi = min(params.i_max, investments[d] + radius)
            found = minimize_scalar(cost_along, bounds=(lo, hi), method="bounded",
                                    options={"xatol": 1e-10})
            candidates = [(cost_along(investments[d]), investments[d]), (float(found.fun), float(found.x))]
            for edge in (lo, hi):
                candidates.append((cost_along(edge), edge))
            new_value = min(candidates)[1]
            largest_move = max(largest_move, abs(new_value - investments[d]))
            investments[d] = new_value
        if largest_move <= COORDINATE_TOLERANCE:
            logger.debug(f"Coordinate descent settled after {sweep} sweeps")
            break
    return investments


def kkt_residual(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> KktReport:
    """
    First-order KKT check of a profile against min social cost.

    At an interior local minimizer every residual is within 1e-6 of zero;
    a negative residual means investing more would lower the social cost.
    """
    s = normalize(s)
    a = _as_profile(a)
    check_dimensions(a, s)
    gradient = social_cost_gradient(a, s, game)
    at_lower = a.investments <= game.params.i_min + KKT_BOUND_TOLERANCE
    at_upper = a.investments >= game.params.i_max - KKT_BOUND_TOLERANCE

    residuals = gradient.copy()
    residuals[at_lower] = np.minimum(gradient[at_lower], 0.0)
    residuals[at_upper] = np.maximum(gradient[at_upper], 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        normalized = np.where(s.masses > 0, gradient / s.masses, 0.0)
    lambdas = np.where(at_lower, np.maximum(normalized, 0.0), 0.0)
    mus = np.where(at_upper, np.maximum(-normalized, 0.0), 0.0)
    return KktReport(
        stationarity=gradient,
        residuals=residuals,
        active_lower=at_lower,
        active_upper=at_upper,
        lambdas=lambdas,
        mus=mus,
    )


def penalty_schedule(
    s: PopulationVector,
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> PenaltySchedule:
    """
    Penalty d g+'(rho*) rho* L p(a*_d) per degree at the social optimum.

    For g+(z) = a z^b the penalty is b times the expected indirect-attack
    losses d g+(rho*) L p(a*_d).

    Raises:
        VarthetaNotMonotone: vartheta not strictly increasing
    """
    s = normalize(s)
    optimum = solve_social_optimum(s, game, settings)
    rho = optimum.rho
    expected_losses = game.infection.expected_loss(optimum.profile.investments)
    slope = float(game.exposure.dgplus(max(rho, DERIVATIVE_FLOOR))) if rho > 0 else 0.0
    penalties = s.degrees * slope * rho * expected_losses
    indirect = s.degrees * float(game.exposure.gplus(rho)) * expected_losses
    return PenaltySchedule(penalties=penalties, indirect_losses=indirect, rho=rho, profile=optimum.profile)


def price_of_anarchy(
    s: PopulationVector,
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> float:
    """
    Social cost at the NE over the minimum social cost.

    The NE is unique, so the worst NE is the NE.
    """
    return efficiency_report(s, game, settings)["poa"]


def efficiency_report(
    s: PopulationVector,
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> Dict:
    """NE, social optimum, PoA and average degree for one census."""
    s = normalize(s)
    equilibrium = solve_ne(s, game, settings)
    optimum = solve_social_optimum(s, game, settings)
    if optimum.social_cost > 0:
        poa = equilibrium.social_cost / optimum.social_cost
    else:
        # zero cost at both solutions (no attacks, nothing invested)
        poa = 1.0
    logger.info(f"PoA={poa:.10g} (NE cost {equilibrium.social_cost:.6g}, SO cost {optimum.social_cost:.6g})")
    return {
        "ne": equilibrium,
        "so": optimum,
        "poa": float(poa),
        "avg_degree": avg_degree(s),
    }
